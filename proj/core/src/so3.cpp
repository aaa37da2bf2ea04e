#include "equigrasp/so3.hpp"

#include <fmt/format.h>

#include <cmath>

#include "equigrasp/error.hpp"

namespace equigrasp {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kY00 = 0.28209479177387814347;  // 1 / (2 sqrt(pi))

void check_degree(int L) {
  if (L < 0 || L > kMaxDegree)
    fail_config(fmt::format("spherical-harmonic degree {} outside [0, {}]", L, kMaxDegree));
}

}  // namespace

Rotation Rotation::from_matrix(const Eigen::Matrix3d& m) {
  const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const double det = m.determinant();
  if (ortho > 1e-9 || std::abs(det - 1.0) > 1e-9)
    fail_numeric(fmt::format(
        "matrix is not a rotation: |R^T R - I|_max = {:.3e}, det = {:.12f}", ortho, det));
  Rotation r;
  r.mat = m;
  return r;
}

Rotation Rotation::from_euler_zyz(double alpha, double beta, double gamma) {
  Rotation r;
  r.mat = (Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()) *
           Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()) *
           Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ()))
              .toRotationMatrix();
  return r;
}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n < 1e-300) fail_numeric("axis-angle rotation with zero axis");
  Rotation r;
  r.mat = Eigen::AngleAxisd(angle, axis / n).toRotationMatrix();
  return r;
}

Rotation Rotation::about_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Rotation r;
  // Bottom row stays exactly (0, 0, 1): rotating about z preserves z bitwise.
  r.mat << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Rotation Rotation::from_columns(const Eigen::Vector3d& c0, const Eigen::Vector3d& c1,
                                const Eigen::Vector3d& c2) {
  Eigen::Matrix3d m;
  m.col(0) = c0;
  m.col(1) = c1;
  m.col(2) = c2;
  return from_matrix(m);
}

std::array<double, 3> Rotation::to_euler_zyz() const {
  const Eigen::Matrix3d& m = mat;
  const double sb = std::hypot(m(0, 2), m(1, 2));
  const double beta = std::atan2(sb, m(2, 2));
  if (sb > 1e-12) {
    return {std::atan2(m(1, 2), m(0, 2)), beta, std::atan2(m(2, 1), -m(2, 0))};
  }
  // Gimbal-degenerate: only alpha +/- gamma is determined; pick gamma = 0.
  if (m(2, 2) > 0.0) return {std::atan2(m(1, 0), m(0, 0)), 0.0, 0.0};
  return {std::atan2(-m(1, 0), -m(0, 0)), kPi, 0.0};
}

Direction Direction::from_unit(const Eigen::Vector3d& v) {
  if (std::abs(v.norm() - 1.0) > 1e-9)
    fail_numeric(fmt::format("direction is not unit: |v| = {:.12f}", v.norm()));
  Direction d;
  d.u = v;
  return d;
}

Direction Direction::from_vector(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (n < 1e-12) fail_numeric("cannot normalize a near-zero vector into a direction");
  Direction d;
  d.u = v / n;
  return d;
}

Direction Direction::from_spherical(double theta, double phi) {
  const double st = std::sin(theta);
  Direction d;
  d.u = Eigen::Vector3d(st * std::cos(phi), st * std::sin(phi), std::cos(theta));
  return d;
}

double Direction::theta() const { return std::acos(std::clamp(u.z(), -1.0, 1.0)); }
double Direction::phi() const { return std::atan2(u.y(), u.x()); }

std::vector<double> sh_basis(const Eigen::Vector3d& u, int L) {
  check_degree(L);
  const double x = u.x(), y = u.y(), z = u.z();

  // Fully normalized associated Legendre values are split as
  // N_l^m(theta) = S_l^m(z) * sin(theta)^m; the sin^m factor is absorbed into
  // the azimuthal polynomials A_m = Re[(x+iy)^m], B_m = Im[(x+iy)^m], which
  // keeps everything polynomial in (x, y, z) and well-behaved at the poles.
  double S[kMaxDegree + 1][kMaxDegree + 1];
  double A[kMaxDegree + 1], B[kMaxDegree + 1];

  A[0] = 1.0;
  B[0] = 0.0;
  for (int m = 1; m <= L; ++m) {
    A[m] = A[m - 1] * x - B[m - 1] * y;
    B[m] = A[m - 1] * y + B[m - 1] * x;
  }

  S[0][0] = kY00;
  for (int m = 1; m <= L; ++m)
    S[m][m] = S[m - 1][m - 1] * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
  for (int m = 0; m < L; ++m) {
    S[m + 1][m] = std::sqrt(2.0 * m + 3.0) * z * S[m][m];
    for (int l = m + 2; l <= L; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
      const double b =
          std::sqrt((double(l - 1) * (l - 1) - double(m) * m) / (4.0 * double(l - 1) * (l - 1) - 1.0));
      S[l][m] = a * (z * S[l - 1][m] - b * S[l - 2][m]);
    }
  }

  const double sqrt2 = std::sqrt(2.0);
  std::vector<double> Y(sh_size(L));
  for (int l = 0; l <= L; ++l) {
    Y[sh_index(l, 0)] = S[l][0];
    for (int m = 1; m <= l; ++m) {
      Y[sh_index(l, m)] = sqrt2 * S[l][m] * A[m];
      Y[sh_index(l, -m)] = sqrt2 * S[l][m] * B[m];
    }
  }
  return Y;
}

double eval_signal(const FourierCoeffs& c, const Eigen::Vector3d& u) {
  const std::vector<double> Y = sh_basis(u, c.L);
  double s = 0.0;
  for (int i = 0; i < sh_size(c.L); ++i) s += c.data[i] * Y[i];
  return s;
}

ShFit sh_fit(const std::vector<std::pair<Eigen::Vector3d, double>>& samples, int L) {
  check_degree(L);
  const int n = static_cast<int>(samples.size());
  const int d = sh_size(L);
  if (n < d)
    fail_numeric(fmt::format("sh_fit needs at least {} samples for degree {}, got {}", d, L, n));

  Eigen::MatrixXd A(n, d);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> Y = sh_basis(samples[i].first, L);
    for (int j = 0; j < d; ++j) A(i, j) = Y[j];
    b(i) = samples[i].second;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(d - 1);
  const double cond = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond < 1e10))
    fail_numeric(fmt::format("sh_fit design matrix is rank-deficient: condition number {:.3e}", cond));

  Eigen::VectorXd c = svd.solve(b);
  ShFit fit;
  fit.coeffs.L = L;
  fit.coeffs.data.assign(c.data(), c.data() + d);
  fit.residual = (A * c - b).norm() / std::sqrt(double(n));
  return fit;
}

// Wigner blocks by the recursive construction from the l = 1 representation
// (Ivanic & Ruedenberg, with the published errata applied). The l = 1 block is
// the rotation matrix conjugated into the real-SH axis order (y, z, x).
std::vector<Eigen::MatrixXd> wigner_d_all(int L, const Rotation& g) {
  check_degree(L);
  std::vector<Eigen::MatrixXd> D;
  D.reserve(L + 1);
  D.push_back(Eigen::MatrixXd::Ones(1, 1));
  if (L == 0) return D;

  Eigen::Matrix3d r1;
  const int perm[3] = {1, 2, 0};  // (m=-1,0,1) <-> (y, z, x)
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r1(i, j) = g.mat(perm[i], perm[j]);
  D.push_back(r1);

  for (int l = 2; l <= L; ++l) {
    const Eigen::MatrixXd& Dp = D[l - 1];
    Eigen::MatrixXd Dl = Eigen::MatrixXd::Zero(2 * l + 1, 2 * l + 1);

    auto r = [&](int i, int j) { return r1(i + 1, j + 1); };              // i, j in -1..1
    auto prev = [&](int a, int b) { return Dp(a + l - 1, b + l - 1); };   // -l+1..l-1
    auto P = [&](int i, int a, int b) {
      if (b == l) return r(i, 1) * prev(a, l - 1) - r(i, -1) * prev(a, 1 - l);
      if (b == -l) return r(i, 1) * prev(a, 1 - l) + r(i, -1) * prev(a, l - 1);
      return r(i, 0) * prev(a, b);
    };

    for (int m = -l; m <= l; ++m) {
      const int am = std::abs(m);
      for (int n = -l; n <= l; ++n) {
        const double denom =
            (std::abs(n) == l) ? double(2 * l) * (2 * l - 1) : double(l + n) * (l - n);

        double acc = 0.0;
        if (am < l) {
          const double cu = std::sqrt(double(l + m) * (l - m) / denom);
          acc += cu * P(0, m, n);
        }
        {
          const double cv = 0.5 *
                            std::sqrt((1.0 + (m == 0 ? 1.0 : 0.0)) * double(l + am - 1) *
                                      (l + am) / denom) *
                            (m == 0 ? -1.0 : 1.0);
          double V;
          if (m == 0)
            V = P(1, 1, n) + P(-1, -1, n);
          else if (m > 0)
            V = P(1, m - 1, n) * std::sqrt(1.0 + (m == 1 ? 1.0 : 0.0)) -
                P(-1, 1 - m, n) * (m == 1 ? 0.0 : 1.0);
          else
            V = P(1, m + 1, n) * (m == -1 ? 0.0 : 1.0) +
                P(-1, -m - 1, n) * std::sqrt(1.0 + (m == -1 ? 1.0 : 0.0));
          acc += cv * V;
        }
        if (m != 0 && am <= l - 2) {
          const double cw = -0.5 * std::sqrt(double(l - am - 1) * (l - am) / denom);
          const double W = (m > 0) ? P(1, m + 1, n) + P(-1, -m - 1, n)
                                   : P(1, m - 1, n) - P(-1, 1 - m, n);
          acc += cw * W;
        }
        Dl(m + l, n + l) = acc;
      }
    }
    D.push_back(std::move(Dl));
  }
  return D;
}

Eigen::MatrixXd wigner_d(int l, const Rotation& g) { return wigner_d_all(l, g)[l]; }

FourierCoeffs rotate_coeffs(const FourierCoeffs& c, const Rotation& g) {
  const std::vector<Eigen::MatrixXd> D = wigner_d_all(c.L, g);
  FourierCoeffs out = FourierCoeffs::zeros(c.L);
  for (int l = 0; l <= c.L; ++l) {
    const int off = l * l, d = 2 * l + 1;
    Eigen::Map<const Eigen::VectorXd> in(c.data.data() + off, d);
    Eigen::Map<Eigen::VectorXd> dst(out.data.data() + off, d);
    dst = D[l] * in;
  }
  return out;
}

Rotation sample_uniform_rotation(Rng& rng) {
  const double u1 = rng.uniform01();
  const double u2 = rng.uniform01();
  const double u3 = rng.uniform01();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double t2 = 2.0 * kPi * u2, t3 = 2.0 * kPi * u3;
  const Eigen::Quaterniond q(a * std::sin(t2), a * std::cos(t2), b * std::sin(t3),
                             b * std::cos(t3));
  Rotation r;
  r.mat = q.normalized().toRotationMatrix();
  return r;
}

std::vector<Eigen::Vector3d> fibonacci_sphere(int n) {
  if (n < 1) fail_config("fibonacci_sphere needs n >= 1");
  std::vector<Eigen::Vector3d> pts(n);
  const double ga = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    pts[i] = Eigen::Vector3d(r * std::cos(ga * i), r * std::sin(ga * i), z);
  }
  return pts;
}

}  // namespace equigrasp
