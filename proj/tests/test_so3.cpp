#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "equigrasp/error.hpp"
#include "equigrasp/so3.hpp"

using namespace equigrasp;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent oracle: real spherical harmonics as explicit Cartesian
// polynomials (unit-sphere table entries, no Condon-Shortley phase), written
// down separately from the recurrence used by the library.
double sh_closed_form(int l, int m, const Eigen::Vector3d& u) {
  const double x = u.x(), y = u.y(), z = u.z();
  const double x2 = x * x, y2 = y * y, z2 = z * z;
  switch (l * 100 + (m + l)) {
    case 0: return 0.5 * std::sqrt(1.0 / kPi);

    case 100: return std::sqrt(3.0 / (4.0 * kPi)) * y;
    case 101: return std::sqrt(3.0 / (4.0 * kPi)) * z;
    case 102: return std::sqrt(3.0 / (4.0 * kPi)) * x;

    case 200: return 0.5 * std::sqrt(15.0 / kPi) * x * y;
    case 201: return 0.5 * std::sqrt(15.0 / kPi) * y * z;
    case 202: return 0.25 * std::sqrt(5.0 / kPi) * (3.0 * z2 - 1.0);
    case 203: return 0.5 * std::sqrt(15.0 / kPi) * x * z;
    case 204: return 0.25 * std::sqrt(15.0 / kPi) * (x2 - y2);

    case 300: return 0.25 * std::sqrt(35.0 / (2.0 * kPi)) * y * (3.0 * x2 - y2);
    case 301: return 0.5 * std::sqrt(105.0 / kPi) * x * y * z;
    case 302: return 0.25 * std::sqrt(21.0 / (2.0 * kPi)) * y * (5.0 * z2 - 1.0);
    case 303: return 0.25 * std::sqrt(7.0 / kPi) * z * (5.0 * z2 - 3.0);
    case 304: return 0.25 * std::sqrt(21.0 / (2.0 * kPi)) * x * (5.0 * z2 - 1.0);
    case 305: return 0.25 * std::sqrt(105.0 / kPi) * z * (x2 - y2);
    case 306: return 0.25 * std::sqrt(35.0 / (2.0 * kPi)) * x * (x2 - 3.0 * y2);

    case 400: return 0.75 * std::sqrt(35.0 / kPi) * x * y * (x2 - y2);
    case 401: return 0.75 * std::sqrt(35.0 / (2.0 * kPi)) * y * z * (3.0 * x2 - y2);
    case 402: return 0.75 * std::sqrt(5.0 / kPi) * x * y * (7.0 * z2 - 1.0);
    case 403: return 0.75 * std::sqrt(5.0 / (2.0 * kPi)) * y * z * (7.0 * z2 - 3.0);
    case 404: return (3.0 / 16.0) * std::sqrt(1.0 / kPi) * (35.0 * z2 * z2 - 30.0 * z2 + 3.0);
    case 405: return 0.75 * std::sqrt(5.0 / (2.0 * kPi)) * x * z * (7.0 * z2 - 3.0);
    case 406: return (3.0 / 8.0) * std::sqrt(5.0 / kPi) * (x2 - y2) * (7.0 * z2 - 1.0);
    case 407: return 0.75 * std::sqrt(35.0 / (2.0 * kPi)) * x * z * (x2 - 3.0 * y2);
    case 408: return (3.0 / 16.0) * std::sqrt(35.0 / kPi) * (x2 * (x2 - 3.0 * y2) - y2 * (3.0 * x2 - y2));
  }
  REQUIRE(false);
  return 0.0;
}

Eigen::Vector3d random_dir(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(-kPi, kPi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

// Independent oracle for the Wigner block: solve sh(g u_i) = D sh(u_i) in the
// least-squares sense over a dense direction set; no recursion involved.
Eigen::MatrixXd wigner_from_basis(int l, const Rotation& g) {
  const int d = 2 * l + 1;
  const int n = 6 * d;
  const auto dirs = fibonacci_sphere(n);
  Eigen::MatrixXd A(n, d), B(n, d);
  for (int i = 0; i < n; ++i) {
    const auto yu = sh_basis(dirs[i], l);
    const auto ygu = sh_basis(g * dirs[i], l);
    for (int j = 0; j < d; ++j) {
      A(i, j) = yu[l * l + j];
      B(i, j) = ygu[l * l + j];
    }
  }
  // A * D^T = B
  return A.colPivHouseholderQr().solve(B).transpose();
}

}  // namespace

TEST_CASE("rotation invariants and euler round trip") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Rotation g = sample_uniform_rotation(rng);
    CHECK((g.mat.transpose() * g.mat - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(g.mat.determinant() == doctest::Approx(1.0).epsilon(1e-12));

    const auto [a, b, c] = g.to_euler_zyz();
    const Rotation back = Rotation::from_euler_zyz(a, b, c);
    CHECK((back.mat - g.mat).cwiseAbs().maxCoeff() < 1e-12);
  }
  // gimbal-degenerate cases round-trip at matrix level
  for (const double beta : {0.0, kPi}) {
    const Rotation g = Rotation::from_euler_zyz(0.7, beta, -0.3);
    const auto [a, b, c] = g.to_euler_zyz();
    const Rotation back = Rotation::from_euler_zyz(a, b, c);
    CHECK((back.mat - g.mat).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(Rotation::from_matrix(2.0 * Eigen::Matrix3d::Identity()), Error);
}

TEST_CASE("direction spherical round trip") {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const Direction d = Direction::from_unit(random_dir(rng));
    const Direction back = Direction::from_spherical(d.theta(), d.phi());
    CHECK((back.u - d.u).norm() < 1e-12);
  }
  CHECK_THROWS_AS(Direction::from_unit(Eigen::Vector3d(0, 0, 2)), Error);
  CHECK_THROWS_AS(Direction::from_vector(Eigen::Vector3d::Zero()), Error);
}

TEST_CASE("sh_basis analytic values") {
  CHECK(sh_basis(Eigen::Vector3d(0.36, -0.48, 0.8), 0)[0] ==
        doctest::Approx(0.28209479177).epsilon(1e-10));

  const auto np = sh_basis(Eigen::Vector3d(0, 0, 1), 1);
  CHECK(np[sh_index(1, 0)] == doctest::Approx(std::sqrt(3.0 / (4.0 * kPi))).epsilon(1e-12));
  CHECK(np[sh_index(1, -1)] == doctest::Approx(0.0));
  CHECK(np[sh_index(1, 1)] == doctest::Approx(0.0));
}

TEST_CASE("sh_basis matches the closed-form table up to degree 4") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d u = random_dir(rng);
    const auto Y = sh_basis(u, 4);
    for (int l = 0; l <= 4; ++l)
      for (int m = -l; m <= l; ++m)
        CHECK(Y[sh_index(l, m)] == doctest::Approx(sh_closed_form(l, m, u)).epsilon(1e-11));
  }
}

TEST_CASE("sh_basis gram matrix on the fibonacci grid is near identity") {
  const int L = 3, d = sh_size(L);
  const auto dirs = fibonacci_sphere(5000);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  for (const auto& u : dirs) {
    const auto Y = sh_basis(u, L);
    Eigen::Map<const Eigen::VectorXd> y(Y.data(), d);
    gram += y * y.transpose();
  }
  gram *= 4.0 * kPi / dirs.size();
  CHECK((gram - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() < 2e-2);
}

TEST_CASE("sh_basis equivariance against wigner blocks") {
  Rng rng(14);
  for (int i = 0; i < 25; ++i) {
    const Rotation g = sample_uniform_rotation(rng);
    const Eigen::Vector3d u = random_dir(rng);
    const auto Yu = sh_basis(u, 3);
    const auto Ygu = sh_basis(g * u, 3);
    const auto D = wigner_d_all(3, g);
    for (int l = 0; l <= 3; ++l) {
      Eigen::Map<const Eigen::VectorXd> yl(Yu.data() + l * l, 2 * l + 1);
      Eigen::Map<const Eigen::VectorXd> ygl(Ygu.data() + l * l, 2 * l + 1);
      CHECK((D[l] * yl - ygl).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("eval_signal") {
  Rng rng(15);
  FourierCoeffs constant = FourierCoeffs::zeros(2);
  constant.at(0, 0) = 2.0 * std::sqrt(kPi);
  for (int i = 0; i < 10; ++i)
    CHECK(eval_signal(constant, random_dir(rng)) == doctest::Approx(1.0).epsilon(1e-12));

  FourierCoeffs e10 = FourierCoeffs::zeros(1);
  e10.at(1, 0) = 1.0;
  CHECK(eval_signal(e10, Eigen::Vector3d(0, 0, 1)) == doctest::Approx(0.4886025119).epsilon(1e-9));

  // brute-force summation over the closed-form table
  for (int i = 0; i < 50; ++i) {
    FourierCoeffs c = FourierCoeffs::zeros(3);
    for (auto& v : c.data) v = rng.uniform(-1.0, 1.0);
    const Eigen::Vector3d u = random_dir(rng);
    double want = 0.0;
    for (int l = 0; l <= 3; ++l)
      for (int m = -l; m <= l; ++m) want += c.at(l, m) * sh_closed_form(l, m, u);
    CHECK(eval_signal(c, u) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("sh_fit recovers band-limited signals") {
  Rng rng(16);
  const int L = 3;

  // constant signal
  {
    std::vector<std::pair<Eigen::Vector3d, double>> samples;
    for (const auto& u : fibonacci_sphere(4 * sh_size(L))) samples.emplace_back(u, 1.0);
    const ShFit fit = sh_fit(samples, L);
    CHECK(fit.coeffs.at(0, 0) == doctest::Approx(2.0 * std::sqrt(kPi)).epsilon(1e-9));
    for (int i = 1; i < sh_size(L); ++i) CHECK(std::abs(fit.coeffs.data[i]) < 1e-9);
    CHECK(fit.residual < 1e-9);
  }

  // round trip from known coefficients
  {
    FourierCoeffs c = FourierCoeffs::zeros(L);
    for (auto& v : c.data) v = rng.uniform(-2.0, 2.0);
    std::vector<std::pair<Eigen::Vector3d, double>> samples;
    for (const auto& u : fibonacci_sphere(4 * sh_size(L))) samples.emplace_back(u, eval_signal(c, u));
    const ShFit fit = sh_fit(samples, L);
    for (int i = 0; i < sh_size(L); ++i)
      CHECK(fit.coeffs.data[i] == doctest::Approx(c.data[i]).epsilon(1e-8));
  }

  // band-limit violation shows up as residual
  {
    FourierCoeffs c = FourierCoeffs::zeros(L + 1);
    c.at(L + 1, 0) = 3.0;
    std::vector<std::pair<Eigen::Vector3d, double>> samples;
    for (const auto& u : fibonacci_sphere(4 * sh_size(L + 1)))
      samples.emplace_back(u, eval_signal(c, u));
    CHECK(sh_fit(samples, L).residual > 0.1);
  }

  // rank-deficient design matrix: all samples at one point
  {
    std::vector<std::pair<Eigen::Vector3d, double>> samples(
        3 * sh_size(L), {Eigen::Vector3d(0, 0, 1), 1.0});
    CHECK_THROWS_WITH_AS(sh_fit(samples, L), doctest::Contains("condition number"), Error);
  }
}

TEST_CASE("wigner_d identity and l=1 similarity") {
  for (int l = 0; l <= 3; ++l)
    CHECK((wigner_d(l, Rotation::identity()) - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1))
              .cwiseAbs()
              .maxCoeff() < 1e-14);

  Rng rng(17);
  const Rotation g = sample_uniform_rotation(rng);
  const Eigen::MatrixXd D1 = wigner_d(1, g);
  Eigen::Matrix3d P = Eigen::Matrix3d::Zero();  // (x,y,z) -> (y,z,x)
  P(0, 1) = P(1, 2) = P(2, 0) = 1.0;
  CHECK((D1 - P * g.mat * P.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("wigner_d homomorphism and orthogonality") {
  Rng rng(18);
  for (int pair = 0; pair < 100; ++pair) {
    const Rotation g1 = sample_uniform_rotation(rng);
    const Rotation g2 = sample_uniform_rotation(rng);
    const auto D1 = wigner_d_all(3, g1);
    const auto D2 = wigner_d_all(3, g2);
    const auto D12 = wigner_d_all(3, g1 * g2);
    for (int l = 0; l <= 3; ++l) {
      CHECK((D1[l] * D2[l] - D12[l]).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((D1[l] * D1[l].transpose() - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1))
                .cwiseAbs()
                .maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("wigner_d matches the least-squares reconstruction from the basis") {
  Rng rng(19);
  for (int i = 0; i < 10; ++i) {
    const Rotation g = sample_uniform_rotation(rng);
    for (int l = 1; l <= 4; ++l)
      CHECK((wigner_d(l, g) - wigner_from_basis(l, g)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("rotate_coeffs consistency") {
  Rng rng(20);

  FourierCoeffs constant = FourierCoeffs::zeros(3);
  constant.at(0, 0) = 1.7;
  const Rotation g0 = sample_uniform_rotation(rng);
  const FourierCoeffs rc = rotate_coeffs(constant, g0);
  for (int i = 0; i < sh_size(3); ++i)
    CHECK(rc.data[i] == doctest::Approx(constant.data[i]).epsilon(1e-14));

  // eval(rotate(c, g), g u) == eval(c, u) over dense directions
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    FourierCoeffs c = FourierCoeffs::zeros(3);
    for (auto& v : c.data) v = rng.uniform(-1.0, 1.0);
    const Rotation g = sample_uniform_rotation(rng);
    const FourierCoeffs cg = rotate_coeffs(c, g);
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector3d u = random_dir(rng);
      CHECK(std::abs(eval_signal(cg, g * u) - eval_signal(c, u)) < 1e-9);
      ++checked;
    }
  }
  CHECK(checked == 1000);
}

TEST_CASE("parseval on the quadrature grid") {
  Rng rng(21);
  FourierCoeffs c = FourierCoeffs::zeros(3);
  for (auto& v : c.data) v = rng.uniform(-1.0, 1.0);
  const auto dirs = fibonacci_sphere(20000);
  double integral = 0.0;
  for (const auto& u : dirs) {
    const double f = eval_signal(c, u);
    integral += f * f;
  }
  integral *= 4.0 * kPi / dirs.size();
  double norm2 = 0.0;
  for (const double v : c.data) norm2 += v * v;
  CHECK(integral == doctest::Approx(norm2).epsilon(5e-3));
}

TEST_CASE("sample_uniform_rotation determinism and haar mean") {
  Rng a(42), b(42);
  for (int i = 0; i < 5; ++i)
    CHECK((sample_uniform_rotation(a).mat - sample_uniform_rotation(b).mat).cwiseAbs().maxCoeff() ==
          0.0);

  Rng rng(43);
  Eigen::Matrix3d mean = Eigen::Matrix3d::Zero();
  const int n = 10000;
  for (int i = 0; i < n; ++i) mean += sample_uniform_rotation(rng).mat;
  mean /= double(n);
  // Haar mean is zero; per-entry variance 1/3 -> se = 1/sqrt(3 n)
  CHECK(mean.cwiseAbs().maxCoeff() < 3.0 / std::sqrt(3.0 * n));
}
