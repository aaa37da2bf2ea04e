#include "equigrasp/cg.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "equigrasp/error.hpp"
#include "equigrasp/rng.hpp"
#include "equigrasp/so3.hpp"

namespace equigrasp {

namespace {

// Solve for the intertwiner C (n3 x n1*n2) with D3(g) C = C (D1(g) (x) D2(g))
// for all g, by the least eigenvector of the stacked constraint normal matrix
// over a fixed set of random rotations. The solution space is 1-dimensional
// for admissible (l1, l2, l3), so the eigengap certifies the result.
std::vector<CgEntry> compute_cg(int l1, int l2, int l3) {
  const int n1 = 2 * l1 + 1, n2 = 2 * l2 + 1, n3 = 2 * l3 + 1;
  const int dim = n3 * n1 * n2;

  Rng rng(0x9e3779b97f4a7c15ull ^ (static_cast<uint64_t>(l1) << 16) ^
          (static_cast<uint64_t>(l2) << 8) ^ static_cast<uint64_t>(l3));
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(dim, dim);
  for (int s = 0; s < 6; ++s) {
    const Rotation g = sample_uniform_rotation(rng);
    const Eigen::MatrixXd d1 = wigner_d(l1, g);
    const Eigen::MatrixXd d2 = wigner_d(l2, g);
    const Eigen::MatrixXd d3 = wigner_d(l3, g);

    Eigen::MatrixXd kron(n1 * n2, n1 * n2);
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n2; ++b)
        for (int c = 0; c < n1; ++c)
          for (int d = 0; d < n2; ++d) kron(a * n2 + b, c * n2 + d) = d1(a, c) * d2(b, d);

    // vec(C) column-major: A_g = I_{n1 n2} (x) D3 - kron^T (x) I_{n3}
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    for (int j = 0; j < n1 * n2; ++j) a.block(j * n3, j * n3, n3, n3) = d3;
    for (int j = 0; j < n1 * n2; ++j)
      for (int jp = 0; jp < n1 * n2; ++jp)
        for (int r = 0; r < n3; ++r) a(j * n3 + r, jp * n3 + r) -= kron(jp, j);
    normal.noalias() += a.transpose() * a;
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
  if (eig.eigenvalues()(0) > 1e-8 || (dim > 1 && eig.eigenvalues()(1) < 1e-4))
    fail_numeric(fmt::format("coupling ({}, {}, {}) has no unique invariant subspace", l1, l2, l3));
  const Eigen::VectorXd vec = eig.eigenvectors().col(0);

  Eigen::MatrixXd c(n3, n1 * n2);
  for (int j = 0; j < n1 * n2; ++j)
    for (int r = 0; r < n3; ++r) c(r, j) = vec(j * n3 + r);

  // Schur: C C^T is a multiple of the identity; rescale rows to orthonormal.
  const Eigen::MatrixXd gram = c * c.transpose();
  const double scale = gram(0, 0);
  if (scale < 1e-12 || (gram - scale * Eigen::MatrixXd::Identity(n3, n3)).cwiseAbs().maxCoeff() >
                           1e-9 * scale)
    fail_numeric(fmt::format("coupling ({}, {}, {}) row Gram is not a scaled identity", l1, l2, l3));
  c /= std::sqrt(scale);

  // Fix the overall sign: first nonzero in (m3, m1, m2) lexicographic order
  // is positive, so the tensor is a deterministic function of (l1, l2, l3).
  double lead = 0.0;
  for (int r = 0; r < n3 && lead == 0.0; ++r)
    for (int j = 0; j < n1 * n2 && lead == 0.0; ++j)
      if (std::abs(c(r, j)) > 1e-9) lead = c(r, j);
  if (lead < 0.0) c = -c;

  std::vector<CgEntry> out;
  for (int r = 0; r < n3; ++r)
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n2; ++b)
        if (std::abs(c(r, a * n2 + b)) > 1e-10) out.push_back({a, b, r, c(r, a * n2 + b)});
  return out;
}

}  // namespace

const std::vector<CgEntry>& cg_coefficients(int l1, int l2, int l3) {
  if (l1 < 0 || l2 < 0 || l3 < 0 || l1 > kMaxDegree || l2 > kMaxDegree || l3 > kMaxDegree)
    fail_config(fmt::format("coupling degrees ({}, {}, {}) out of range", l1, l2, l3));
  if (l3 < std::abs(l1 - l2) || l3 > l1 + l2)
    fail_config(fmt::format("coupling ({}, {}, {}) violates the selection rule", l1, l2, l3));
  if (l1 > 4 || l2 > 4 || l3 > 4)
    fail_config(fmt::format("coupling ({}, {}, {}) above the supported degree 4", l1, l2, l3));

  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::vector<CgEntry>> cache;
  std::scoped_lock lock(mu);
  auto it = cache.find({l1, l2, l3});
  if (it == cache.end()) it = cache.emplace(std::tuple{l1, l2, l3}, compute_cg(l1, l2, l3)).first;
  return it->second;
}

}  // namespace equigrasp
