#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "equigrasp/cg.hpp"
#include "equigrasp/error.hpp"
#include "equigrasp/rng.hpp"
#include "equigrasp/so3.hpp"
#include "equigrasp/tape.hpp"

using namespace equigrasp;

namespace {

Eigen::MatrixXd cg_dense(int l1, int l2, int l3) {
  const int n1 = 2 * l1 + 1, n2 = 2 * l2 + 1, n3 = 2 * l3 + 1;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n3, n1 * n2);
  for (const CgEntry& e : cg_coefficients(l1, l2, l3)) c(e.m3, e.m1 * n2 + e.m2) = e.v;
  return c;
}

Tensor random_tensor(Rng& rng, int r, int c, double scale = 1.0) {
  Tensor t(r, c);
  for (double& x : t.v) x = scale * rng.uniform(-1.0, 1.0);
  return t;
}

// rotate every channel block of every row by the matching Wigner matrix
Tensor rotate_rows(const Tensor& x, const IrrepsSpec& spec, const Rotation& g) {
  Tensor y(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    int off = 0;
    for (const auto& ir : spec) {
      const Eigen::MatrixXd d = wigner_d(ir.l, g);
      const int n = 2 * ir.l + 1;
      for (int c = 0; c < ir.mult; ++c) {
        for (int a = 0; a < n; ++a) {
          double acc = 0.0;
          for (int b = 0; b < n; ++b) acc += d(a, b) * x.at(r, off + b);
          y.at(r, off + a) = acc;
        }
        off += n;
      }
    }
  }
  return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

// central finite differences over every entry of every parameter tensor;
// loss_of must run backward itself when its leafs require gradients
void check_gradients(std::vector<Tensor> params,
                     const std::function<double(Tape&, const std::vector<int>&)>& loss_of,
                     double tol, double eps = 1e-3) {
  Tape tape;
  std::vector<int> ids;
  for (const auto& p : params) ids.push_back(tape.leaf(p, true));
  loss_of(tape, ids);
  std::vector<Tensor> grads;
  for (const int id : ids) grads.push_back(tape.grad(id));

  for (size_t pi = 0; pi < params.size(); ++pi) {
    for (size_t k = 0; k < params[pi].v.size(); ++k) {
      auto eval = [&](double delta) {
        std::vector<Tensor> pp = params;
        pp[pi].v[k] += delta;
        Tape t;
        std::vector<int> jj;
        for (const auto& p : pp) jj.push_back(t.leaf(p, false));
        return loss_of(t, jj);
      };
      const double fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
      const double an = grads[pi].v[k];
      const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      CHECK(err < tol);
    }
  }
}

}  // namespace

TEST_CASE("coupling tensors: scalar path is the identity") {
  for (int l = 0; l <= 3; ++l) {
    const Eigen::MatrixXd c = cg_dense(0, l, l);
    const int n = 2 * l + 1;
    CHECK((c - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-11);
    const Eigen::MatrixXd cl = cg_dense(l, 0, l);
    CHECK((cl - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("coupling tensors: vector pair to scalar is the dot product") {
  const Eigen::MatrixXd c = cg_dense(1, 1, 0);
  REQUIRE(c.rows() == 1);
  const double s = 1.0 / std::sqrt(3.0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(c(0, a * 3 + b) == doctest::Approx(a == b ? s : 0.0).epsilon(1e-10));
}

TEST_CASE("coupling tensors: vector pair to vector is the cross product") {
  const Eigen::MatrixXd c = cg_dense(1, 1, 1);
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(3, 9);
  // components ordered (y, z, x): the cross-product formula keeps its cyclic
  // form under this even permutation of axes
  want(0, 1 * 3 + 2) = s;
  want(0, 2 * 3 + 1) = -s;
  want(1, 2 * 3 + 0) = s;
  want(1, 0 * 3 + 2) = -s;
  want(2, 0 * 3 + 1) = s;
  want(2, 1 * 3 + 0) = -s;
  CHECK((c - want).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("coupling tensors intertwine rotations") {
  Rng rng(41);
  for (int l1 = 0; l1 <= 3; ++l1)
    for (int l2 = 0; l2 <= 2; ++l2)
      for (int l3 = std::abs(l1 - l2); l3 <= std::min(l1 + l2, 3); ++l3) {
        const Eigen::MatrixXd c = cg_dense(l1, l2, l3);
        const Rotation g = sample_uniform_rotation(rng);
        const Eigen::MatrixXd d1 = wigner_d(l1, g), d2 = wigner_d(l2, g), d3 = wigner_d(l3, g);
        const int n1 = 2 * l1 + 1, n2 = 2 * l2 + 1;
        Eigen::MatrixXd kron(n1 * n2, n1 * n2);
        for (int a = 0; a < n1; ++a)
          for (int b = 0; b < n2; ++b)
            for (int p = 0; p < n1; ++p)
              for (int q = 0; q < n2; ++q) kron(a * n2 + b, p * n2 + q) = d1(a, p) * d2(b, q);
        CHECK((d3 * c - c * kron).cwiseAbs().maxCoeff() < 1e-11);
        // orthonormal rows
        const Eigen::MatrixXd gram = c * c.transpose();
        CHECK((gram - Eigen::MatrixXd::Identity(2 * l3 + 1, 2 * l3 + 1)).cwiseAbs().maxCoeff() <
              1e-11);
      }
}

TEST_CASE("coupling tensors reject bad degrees") {
  CHECK_THROWS_AS(cg_coefficients(1, 1, 3), Error);
  CHECK_THROWS_AS(cg_coefficients(-1, 0, 1), Error);
  CHECK_THROWS_AS(cg_coefficients(5, 5, 5), Error);
}

TEST_CASE("linear_blockwise identity and zero maps") {
  Rng rng(42);
  const IrrepsSpec spec = {{2, 0}, {2, 1}, {1, 2}};
  Tensor x = random_tensor(rng, 4, irreps_width(spec));

  Tensor wid(1, linear_weight_count(spec, spec));
  // per-degree identity matrices, laid out in spec order
  int off = 0;
  for (const auto& ir : spec) {
    for (int oc = 0; oc < ir.mult; ++oc)
      for (int ic = 0; ic < ir.mult; ++ic) wid.v[off + oc * ir.mult + ic] = oc == ic ? 1.0 : 0.0;
    off += ir.mult * ir.mult;
  }

  Tape tape;
  const int xi = tape.leaf(x);
  const int wi = tape.leaf(wid);
  const int y = tape.linear_blockwise(xi, wi, -1, spec, spec);
  CHECK(max_abs_diff(tape.value(y), x) == 0.0);

  const int wz = tape.leaf(Tensor(1, linear_weight_count(spec, spec)));
  const int yz = tape.linear_blockwise(xi, wz, -1, spec, spec);
  for (const double v : tape.value(yz).v) CHECK(v == 0.0);
}

TEST_CASE("linear_blockwise commutes with rotations") {
  Rng rng(43);
  const IrrepsSpec in = {{3, 0}, {2, 1}, {2, 2}};
  const IrrepsSpec out = {{2, 0}, {4, 1}, {1, 2}};
  const Tensor x = random_tensor(rng, 5, irreps_width(in));
  const Tensor w = random_tensor(rng, 1, linear_weight_count(in, out));
  const Tensor b = random_tensor(rng, 1, 2);

  for (int trial = 0; trial < 10; ++trial) {
    const Rotation g = sample_uniform_rotation(rng);
    Tape t1;
    const int y1 = t1.linear_blockwise(t1.leaf(x), t1.leaf(w), t1.leaf(b), in, out);
    Tape t2;
    const int y2 =
        t2.linear_blockwise(t2.leaf(rotate_rows(x, in, g)), t2.leaf(w), t2.leaf(b), in, out);
    CHECK(max_abs_diff(rotate_rows(t1.value(y1), out, g), t2.value(y2)) < 1e-12);
  }
}

TEST_CASE("gate fixed points and equivariance") {
  Rng rng(44);
  const IrrepsSpec pre = {{5, 0}, {2, 1}, {1, 2}};  // 2 content + 3 gates
  const IrrepsSpec out = Tape::gate_out_spec(pre);
  CHECK(out == IrrepsSpec{{2, 0}, {2, 1}, {1, 2}});

  Tensor x = random_tensor(rng, 1, irreps_width(pre));
  x.at(0, 2) = 50.0;   // saturated gate for the first l=1 channel
  x.at(0, 3) = 0.0;    // exactly half for the second
  Tape tape;
  const int y = tape.gate(tape.leaf(x), pre);
  for (int m = 0; m < 3; ++m) {
    CHECK(tape.value(y).at(0, 2 + m) == doctest::Approx(x.at(0, 5 + m)).epsilon(1e-12));
    CHECK(tape.value(y).at(0, 5 + m) == doctest::Approx(0.5 * x.at(0, 8 + m)).epsilon(1e-12));
  }

  const Tensor xr = random_tensor(rng, 3, irreps_width(pre));
  const Rotation g = sample_uniform_rotation(rng);
  Tape t1, t2;
  const int y1 = t1.gate(t1.leaf(xr), pre);
  const int y2 = t2.gate(t2.leaf(rotate_rows(xr, pre, g)), pre);
  CHECK(max_abs_diff(rotate_rows(t1.value(y1), out, g), t2.value(y2)) < 1e-12);
}

TEST_CASE("tensor-product conv: self-loop graph acts degree-wise") {
  Rng rng(45);
  const IrrepsSpec in = {{2, 0}, {1, 1}};
  const auto paths = tp_paths(in, 2, 2);
  EdgeList edges;
  edges.src = {0};
  edges.dst = {0};
  edges.n_dst = 1;

  Tensor sh(1, sh_size(2));
  sh.at(0, 0) = sh_basis(Eigen::Vector3d(0, 0, 1), 0)[0];  // l=0-only self-loop attr
  Tensor rb(1, 4);
  for (int k = 0; k < 4; ++k) rb.at(0, k) = rng.uniform(0.0, 1.0);

  const Tensor x = random_tensor(rng, 1, irreps_width(in));
  const Tensor w = random_tensor(rng, tp_weight_rows(paths), 4);

  Tape tape;
  const int y = tape.tp_message_mean(tape.leaf(x), tape.leaf(w), edges, sh, rb, in, paths);
  const Tensor& yv = tape.value(y);

  // only (l, 0, l) paths survive: each output channel is a scalar multiple
  // of its input channel; all other path channels are zero. Output channels
  // are grouped by degree, path order within a degree.
  const auto spec = tp_out_spec(paths);
  CHECK(irreps_width(spec) == yv.cols);
  std::array<int, 4> assigned{};
  int pc = 0;
  for (const auto& p : paths) {
    const int n3 = 2 * p.l3 + 1;
    const int base = irreps_offset(spec, p.l3) + assigned[p.l3] * n3;
    for (int c = 0; c < p.channels; ++c) {
      double r = 0.0;
      for (int k = 0; k < 4; ++k) r += w.at(pc + c, k) * rb.at(0, k);
      for (int m = 0; m < n3; ++m) {
        const double got = yv.at(0, base + c * n3 + m);
        if (p.l2 == 0) {
          const int in_off = irreps_offset(in, p.l1) + c * n3;
          CHECK(got == doctest::Approx(r * sh.at(0, 0) * x.at(0, in_off + m)).epsilon(1e-12));
        } else {
          CHECK(got == 0.0);
        }
      }
    }
    assigned[p.l3] += p.channels;
    pc += p.channels;
  }

  // zero weights annihilate
  Tape tz;
  const int yz = tz.tp_message_mean(tz.leaf(x), tz.leaf(Tensor(tp_weight_rows(paths), 4)), edges,
                                    sh, rb, in, paths);
  for (const double v : tz.value(yz).v) CHECK(v == 0.0);
}

TEST_CASE("tensor-product conv commutes with rotations") {
  Rng rng(46);
  const IrrepsSpec in = {{3, 0}, {2, 1}, {1, 2}};
  const auto paths = tp_paths(in, 2, 2);
  const IrrepsSpec out = tp_out_spec(paths);

  const int n_src = 6, n_dst = 4, e_count = 14;
  EdgeList edges;
  edges.n_dst = n_dst;
  std::vector<Eigen::Vector3d> dirs;
  for (int e = 0; e < e_count; ++e) {
    edges.src.push_back(static_cast<int>(rng.uniform_int(n_src)));
    edges.dst.push_back(static_cast<int>(rng.uniform_int(n_dst)));
    Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
    dirs.push_back(d.normalized());
  }
  Tensor rb = random_tensor(rng, e_count, 5, 0.5);
  const Tensor x = random_tensor(rng, n_src, irreps_width(in));
  const Tensor w = random_tensor(rng, tp_weight_rows(paths), 5);

  auto sh_of = [&](const Rotation* g) {
    Tensor sh(e_count, sh_size(2));
    for (int e = 0; e < e_count; ++e) {
      const Eigen::Vector3d d = g ? (*g * dirs[e]) : dirs[e];
      const auto row = sh_basis(d, 2);
      for (int j = 0; j < sh_size(2); ++j) sh.at(e, j) = row[j];
    }
    return sh;
  };

  for (int trial = 0; trial < 5; ++trial) {
    const Rotation g = sample_uniform_rotation(rng);
    const Tensor sh0 = sh_of(nullptr), shg = sh_of(&g);
    Tape t1;
    const int y1 = t1.tp_message_mean(t1.leaf(x), t1.leaf(w), edges, sh0, rb, in, paths);
    Tape t2;
    const int y2 =
        t2.tp_message_mean(t2.leaf(rotate_rows(x, in, g)), t2.leaf(w), edges, shg, rb, in, paths);
    CHECK(max_abs_diff(rotate_rows(t1.value(y1), out, g), t2.value(y2)) < 1e-11);
  }
}

TEST_CASE("bce_mean analytic values") {
  Tape tape;
  Tensor q(2, 1);
  q.v = {0.0, 20.0};
  const int qi = tape.leaf(q, true);
  const int loss = tape.bce_mean(qi, {1.0, 1.0});
  const double ln2 = std::log(2.0);
  CHECK(tape.value(loss).v[0] == doctest::Approx(ln2 / 2.0).epsilon(1e-9));
  tape.backward(loss);
  CHECK(tape.grad(qi).v[0] == doctest::Approx(-0.5 / 2.0).epsilon(1e-9));
  CHECK(std::abs(tape.grad(qi).v[1]) < 1e-8);
}

TEST_CASE("finite differences validate every op end to end") {
  Rng rng(47);
  const IrrepsSpec in = {{2, 0}, {2, 1}, {1, 2}};
  const auto paths = tp_paths(in, 2, 2);
  const IrrepsSpec mid = tp_out_spec(paths);
  const IrrepsSpec pre = {{4, 0}, {1, 1}, {1, 2}};  // 2 content + 2 gates
  const IrrepsSpec gated = Tape::gate_out_spec(pre);

  const int n_src = 5, e_count = 10, n_samples = 7;
  EdgeList edges;
  edges.n_dst = n_src;
  for (int e = 0; e < e_count; ++e) {
    edges.src.push_back(static_cast<int>(rng.uniform_int(n_src)));
    edges.dst.push_back(static_cast<int>(rng.uniform_int(n_src)));
  }
  Tensor sh(e_count, sh_size(2));
  for (int e = 0; e < e_count; ++e) {
    Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
    const auto row = sh_basis(d.normalized(), 2);
    for (int j = 0; j < sh_size(2); ++j) sh.at(e, j) = row[j];
  }
  const Tensor rb = random_tensor(rng, e_count, 4, 0.6);

  std::vector<int> row_of;
  Tensor basis(n_samples, irreps_width(gated));
  for (int s = 0; s < n_samples; ++s) {
    row_of.push_back(static_cast<int>(rng.uniform_int(n_src)));
    for (int j = 0; j < basis.cols; ++j) basis.at(s, j) = rng.uniform(-1.0, 1.0);
  }
  std::vector<double> labels;
  for (int s = 0; s < n_samples; ++s) labels.push_back(rng.uniform_int(2) ? 1.0 : 0.0);

  std::vector<Tensor> params;
  params.push_back(random_tensor(rng, n_src, irreps_width(in)));        // input features
  params.push_back(random_tensor(rng, tp_weight_rows(paths), 4, 0.7));  // tp weights
  params.push_back(random_tensor(rng, 1, linear_weight_count(mid, pre), 0.4));
  params.push_back(random_tensor(rng, 1, 4, 0.3));                      // bias
  params.push_back(random_tensor(rng, n_src, irreps_width(gated)));     // skip feature

  auto loss_of = [&](Tape& t, const std::vector<int>& ids) {
    const int conv = t.tp_message_mean(ids[0], ids[1], edges, sh, rb, in, paths);
    const int lin = t.linear_blockwise(conv, ids[2], ids[3], mid, pre);
    const int g = t.gate(lin, pre);
    const int skip = t.add(g, ids[4]);
    const int logits = t.row_dot(skip, row_of, basis);
    const int loss = t.bce_mean(logits, labels);
    if (t.requires_grad(loss)) t.backward(loss);
    return t.value(loss).v[0];
  };
  check_gradients(params, loss_of, 1e-5);
}

TEST_CASE("bce gradient matches finite differences tightly") {
  Rng rng(49);
  std::vector<Tensor> params = {random_tensor(rng, 9, 1, 2.0)};
  std::vector<double> labels;
  for (int i = 0; i < 9; ++i) labels.push_back(rng.uniform_int(2) ? 1.0 : 0.0);
  auto loss_of = [&](Tape& t, const std::vector<int>& ids) {
    const int loss = t.bce_mean(ids[0], labels);
    if (t.requires_grad(loss)) t.backward(loss);
    return t.value(loss).v[0];
  };
  check_gradients(params, loss_of, 1e-6);
}

TEST_CASE("gather_rows forwards and scatters") {
  Rng rng(48);
  const Tensor x = random_tensor(rng, 6, 3);
  Tape tape;
  const int xi = tape.leaf(x, true);
  const int y = tape.gather_rows(xi, {4, 0, 4});
  CHECK(tape.value(y).at(0, 1) == x.at(4, 1));
  CHECK(tape.value(y).at(1, 2) == x.at(0, 2));

  // duplicate rows must accumulate in the backward scatter
  const int logits = tape.row_dot(y, {0, 1, 2}, random_tensor(rng, 3, 3));
  const int loss = tape.bce_mean(logits, {1.0, 0.0, 1.0});
  tape.backward(loss);
  double grad_norm = 0.0;
  for (const double v : tape.grad(xi).v) grad_norm += std::abs(v);
  CHECK(grad_norm > 0.0);
}

TEST_CASE("tape rejects malformed graphs") {
  Tape tape;
  const int x = tape.leaf(Tensor(2, 3));
  CHECK_THROWS_AS(tape.gather_rows(x, {5}), Error);
  CHECK_THROWS_AS(tape.add(x, tape.leaf(Tensor(2, 4))), Error);
  CHECK_THROWS_AS(tape.backward(x), Error);

  EdgeList edges;
  edges.src = {7};
  edges.dst = {0};
  edges.n_dst = 1;
  const IrrepsSpec in = {{3, 0}};
  const auto paths = tp_paths(in, 0, 0);
  Tensor sh(1, 1), rb(1, 2);
  const int w = tape.leaf(Tensor(tp_weight_rows(paths), 2));
  CHECK_THROWS_AS(tape.tp_message_mean(x, w, edges, sh, rb, in, paths), Error);
}
