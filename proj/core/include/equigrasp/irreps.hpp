#pragma once

#include <vector>

namespace equigrasp {

// One block type in a feature layout: `mult` channels of degree `l`,
// each channel occupying 2l+1 consecutive components.
struct Irrep {
  int mult = 0;
  int l = 0;
  friend bool operator==(const Irrep&, const Irrep&) = default;
};

// Ordered list of blocks; the feature vector is their concatenation.
using IrrepsSpec = std::vector<Irrep>;

inline int irreps_width(const IrrepsSpec& spec) {
  int w = 0;
  for (const auto& ir : spec) w += ir.mult * (2 * ir.l + 1);
  return w;
}

// Offset of the first component of degree-l channel c, or -1 if absent.
inline int irreps_offset(const IrrepsSpec& spec, int l, int channel = 0) {
  int off = 0;
  for (const auto& ir : spec) {
    if (ir.l == l) return off + channel * (2 * ir.l + 1);
    off += ir.mult * (2 * ir.l + 1);
  }
  return -1;
}

inline int irreps_mult(const IrrepsSpec& spec, int l) {
  for (const auto& ir : spec) {
    if (ir.l == l) return ir.mult;
  }
  return 0;
}

inline int irreps_max_l(const IrrepsSpec& spec) {
  int m = 0;
  for (const auto& ir : spec) m = ir.l > m ? ir.l : m;
  return m;
}

}  // namespace equigrasp
