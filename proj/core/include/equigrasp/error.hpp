#pragma once

#include <stdexcept>
#include <string>

namespace equigrasp {

// Single exception type; Kind maps onto the CLI exit-code contract
// (config -> 2, io -> 3, numeric -> 4).
struct Error : std::runtime_error {
  enum class Kind { config, io, numeric };
  Kind kind;
  Error(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

[[noreturn]] inline void fail_config(const std::string& msg) {
  throw Error(Error::Kind::config, msg);
}
[[noreturn]] inline void fail_io(const std::string& msg) {
  throw Error(Error::Kind::io, msg);
}
[[noreturn]] inline void fail_numeric(const std::string& msg) {
  throw Error(Error::Kind::numeric, msg);
}

}  // namespace equigrasp
