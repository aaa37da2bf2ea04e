#include <cstdio>

int main() {
  std::puts("equigrasp: command-line surface not wired up yet");
  return 0;
}
