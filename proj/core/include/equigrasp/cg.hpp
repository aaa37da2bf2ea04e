#pragma once

#include <vector>

namespace equigrasp {

// One nonzero of a real coupling tensor: component indices are 0-based
// within their blocks (index l+m), value is the coefficient.
struct CgEntry {
  int m1 = 0;
  int m2 = 0;
  int m3 = 0;
  double v = 0.0;
};

// Real Clebsch-Gordan coefficients in this library's real-SH basis,
// normalized so that the (2l3+1) x (2l1+1)(2l2+1) coupling matrix has
// orthonormal rows; the sign is fixed so the first nonzero entry in
// lexicographic (m3, m1, m2) order is positive. Results are cached.
// Requires |l1-l2| <= l3 <= l1+l2 and all degrees <= kMaxDegree.
const std::vector<CgEntry>& cg_coefficients(int l1, int l2, int l3);

}  // namespace equigrasp
