#pragma once

#include <Eigen/Dense>
#include <array>
#include <utility>
#include <vector>

#include "equigrasp/rng.hpp"

namespace equigrasp {

// Real orthonormal spherical harmonics without the Condon-Shortley phase,
// orders m = -l..l. Coefficient vectors are degree-major: block l occupies
// offsets [l^2, l^2 + 2l], entry (l, m) sits at l^2 + l + m. In this basis
// every Wigner matrix is real orthogonal and sh_basis(g*u) = D^l(g) * sh_basis(u)
// holds blockwise.

constexpr int kMaxDegree = 8;

constexpr int sh_size(int L) { return (L + 1) * (L + 1); }
constexpr int sh_index(int l, int m) { return l * l + l + m; }

struct Rotation {
  Eigen::Matrix3d mat = Eigen::Matrix3d::Identity();

  static Rotation identity() { return Rotation{}; }
  // Validates orthonormality and det = +1 (1e-9 slack on both).
  static Rotation from_matrix(const Eigen::Matrix3d& m);
  // R = Rz(alpha) * Ry(beta) * Rz(gamma)
  static Rotation from_euler_zyz(double alpha, double beta, double gamma);
  static Rotation from_axis_angle(const Eigen::Vector3d& axis, double angle);
  static Rotation about_z(double angle);
  // Orthonormal frame from columns; validated like from_matrix.
  static Rotation from_columns(const Eigen::Vector3d& c0, const Eigen::Vector3d& c1,
                               const Eigen::Vector3d& c2);

  // (alpha, beta, gamma) with beta in [0, pi]; gimbal-degenerate cases pick gamma = 0.
  std::array<double, 3> to_euler_zyz() const;

  Rotation inverse() const {
    Rotation r;
    r.mat = mat.transpose();
    return r;
  }
  Rotation operator*(const Rotation& o) const {
    Rotation r;
    r.mat = mat * o.mat;
    return r;
  }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return mat * v; }
};

struct Direction {
  Eigen::Vector3d u{0.0, 0.0, 1.0};

  static Direction from_unit(const Eigen::Vector3d& v);    // requires |v| = 1 within 1e-9
  static Direction from_vector(const Eigen::Vector3d& v);  // normalizes; rejects near-zero
  static Direction from_spherical(double theta, double phi);

  double theta() const;  // polar angle in [0, pi]
  double phi() const;    // azimuth in [-pi, pi]
};

struct FourierCoeffs {
  int L = 0;
  std::vector<double> data;  // length (L+1)^2

  static FourierCoeffs zeros(int L) {
    FourierCoeffs c;
    c.L = L;
    c.data.assign(sh_size(L), 0.0);
    return c;
  }
  double& at(int l, int m) { return data[sh_index(l, m)]; }
  double at(int l, int m) const { return data[sh_index(l, m)]; }
};

// Per-point coefficient vectors, aligned index-for-index with the query set
// of the Neighborhood they were inferred for.
struct FourierField {
  int L = 0;
  std::vector<FourierCoeffs> coeffs;
};

// Y_l^m(u) for all 0 <= l <= L in the block layout above. u must be unit.
std::vector<double> sh_basis(const Eigen::Vector3d& u, int L);

// sum_l sum_m F_l^m Y_l^m(u)
double eval_signal(const FourierCoeffs& c, const Eigen::Vector3d& u);

struct ShFit {
  FourierCoeffs coeffs;
  double residual = 0.0;  // rms residual of the least-squares fit
};
// Least-squares coefficients from (direction, value) samples. Throws a numeric
// Error naming the condition number when the design matrix is rank-deficient.
ShFit sh_fit(const std::vector<std::pair<Eigen::Vector3d, double>>& samples, int L);

// Real Wigner D-matrix for degree l: sh_basis(g*u) block l = wigner_d(l,g) * block l.
Eigen::MatrixXd wigner_d(int l, const Rotation& g);
std::vector<Eigen::MatrixXd> wigner_d_all(int L, const Rotation& g);

// Blockwise c' = D^l(g) c; the rotated signal satisfies (g.f)(u) = f(g^-1 u).
FourierCoeffs rotate_coeffs(const FourierCoeffs& c, const Rotation& g);

// Haar-uniform rotation (Shoemake quaternion method), deterministic in rng state.
Rotation sample_uniform_rotation(Rng& rng);

// Near-uniform unit sphere grid; default quadrature set for the tests.
std::vector<Eigen::Vector3d> fibonacci_sphere(int n);

}  // namespace equigrasp
