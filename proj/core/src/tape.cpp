#include "equigrasp/tape.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <utility>

#include "equigrasp/cg.hpp"
#include "equigrasp/error.hpp"
#include "equigrasp/so3.hpp"

namespace equigrasp {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_unique_degrees(const IrrepsSpec& spec, const char* where) {
  for (size_t i = 0; i < spec.size(); ++i)
    for (size_t j = i + 1; j < spec.size(); ++j)
      if (spec[i].l == spec[j].l)
        fail_config(fmt::format("{}: layout repeats degree {}", where, spec[i].l));
}

}  // namespace

std::vector<TpPath> tp_paths(const IrrepsSpec& in, int l_edge, int l_out_max) {
  std::vector<TpPath> paths;
  for (const auto& ir : in)
    for (int l2 = 0; l2 <= l_edge; ++l2)
      for (int l3 = std::abs(ir.l - l2); l3 <= std::min(ir.l + l2, l_out_max); ++l3)
        paths.push_back({ir.l, l2, l3, ir.mult});
  return paths;
}

IrrepsSpec tp_out_spec(const std::vector<TpPath>& paths) {
  // one block per degree, ascending; channels from all paths into that degree
  std::array<int, kMaxDegree + 1> per_degree{};
  for (const auto& p : paths) per_degree[p.l3] += p.channels;
  IrrepsSpec out;
  for (int l = 0; l <= kMaxDegree; ++l)
    if (per_degree[l] > 0) out.push_back({per_degree[l], l});
  return out;
}

int tp_weight_rows(const std::vector<TpPath>& paths) {
  int n = 0;
  for (const auto& p : paths) n += p.channels;
  return n;
}

int linear_weight_count(const IrrepsSpec& in, const IrrepsSpec& out) {
  int n = 0;
  for (const auto& o : out) {
    const int im = irreps_mult(in, o.l);
    n += o.mult * im;
  }
  return n;
}

int Tape::push(Tensor value, bool requires_grad, std::function<void()> back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor t, bool requires_grad) { return push(std::move(t), requires_grad, {}); }

int Tape::linear_blockwise(int x, int w, int b, const IrrepsSpec& in, const IrrepsSpec& out) {
  require_unique_degrees(in, "linear");
  require_unique_degrees(out, "linear");
  const Tensor& xv = nodes_[x].value;
  if (xv.cols != irreps_width(in))
    fail_config(fmt::format("linear: input width {} does not match its layout width {}", xv.cols,
                            irreps_width(in)));
  if (static_cast<int>(nodes_[w].value.size()) != linear_weight_count(in, out))
    fail_config(fmt::format("linear: weight count {} does not match layouts (need {})",
                            nodes_[w].value.size(), linear_weight_count(in, out)));

  // per-degree slices shared by forward and backward
  struct Slice {
    int n;       // 2l+1
    int in_off, out_off, in_mult, out_mult, w_off;
  };
  auto slices = std::make_shared<std::vector<Slice>>();
  int w_off = 0;
  int mult0_out = 0;
  for (const auto& o : out) {
    if (o.l == 0) mult0_out = o.mult;
    const int im = irreps_mult(in, o.l);
    if (im == 0) continue;
    slices->push_back({2 * o.l + 1, irreps_offset(in, o.l), irreps_offset(out, o.l), im, o.mult,
                       w_off});
    w_off += o.mult * im;
  }
  if (b >= 0 && static_cast<int>(nodes_[b].value.size()) != mult0_out)
    fail_config(fmt::format("linear: bias size {} does not match {} scalar channels",
                            nodes_[b].value.size(), mult0_out));

  const int rows = xv.rows, out_width = irreps_width(out);
  Tensor y(rows, out_width);
  {
    const Tensor& wv = nodes_[w].value;
    for (int r = 0; r < rows; ++r) {
      const double* xr = &xv.v[static_cast<size_t>(r) * xv.cols];
      double* yr = &y.v[static_cast<size_t>(r) * out_width];
      for (const Slice& s : *slices)
        for (int oc = 0; oc < s.out_mult; ++oc)
          for (int ic = 0; ic < s.in_mult; ++ic) {
            const double c = wv.v[s.w_off + oc * s.in_mult + ic];
            if (c == 0.0) continue;
            const double* xb = xr + s.in_off + ic * s.n;
            double* yb = yr + s.out_off + oc * s.n;
            for (int m = 0; m < s.n; ++m) yb[m] += c * xb[m];
          }
    }
    if (b >= 0) {
      const Tensor& bv = nodes_[b].value;
      const int off0 = irreps_offset(out, 0);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < mult0_out; ++c) y.at(r, off0 + c) += bv.v[c];
    }
  }

  const bool needs = nodes_[x].requires_grad || nodes_[w].requires_grad ||
                     (b >= 0 && nodes_[b].requires_grad);
  const int off0 = irreps_offset(out, 0);
  const int id = push(std::move(y), needs, {});
  if (needs)
    nodes_[id].back = [this, x, w, b, id, slices, mult0_out, off0]() {
      const Tensor& gy = nodes_[id].grad;
      const Tensor& xv2 = nodes_[x].value;
      const Tensor& wv = nodes_[w].value;
      Tensor& gx = nodes_[x].grad;
      Tensor& gw = nodes_[w].grad;
      for (int r = 0; r < xv2.rows; ++r) {
        const double* xr = &xv2.v[static_cast<size_t>(r) * xv2.cols];
        const double* gyr = &gy.v[static_cast<size_t>(r) * gy.cols];
        double* gxr = &gx.v[static_cast<size_t>(r) * gx.cols];
        for (const Slice& s : *slices)
          for (int oc = 0; oc < s.out_mult; ++oc)
            for (int ic = 0; ic < s.in_mult; ++ic) {
              const double c = wv.v[s.w_off + oc * s.in_mult + ic];
              const double* gyb = gyr + s.out_off + oc * s.n;
              const double* xb = xr + s.in_off + ic * s.n;
              double* gxb = gxr + s.in_off + ic * s.n;
              double acc = 0.0;
              for (int m = 0; m < s.n; ++m) {
                gxb[m] += c * gyb[m];
                acc += gyb[m] * xb[m];
              }
              gw.v[s.w_off + oc * s.in_mult + ic] += acc;
            }
      }
      if (b >= 0) {
        Tensor& gb = nodes_[b].grad;
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < mult0_out; ++c) gb.v[c] += gy.at(r, off0 + c);
      }
    };
  return id;
}

int Tape::tp_message_mean(int x, int w, const EdgeList& edges, const Tensor& sh,
                          const Tensor& radial, const IrrepsSpec& in,
                          const std::vector<TpPath>& paths) {
  const Tensor& xv = nodes_[x].value;
  const Tensor& wv = nodes_[w].value;
  const int e_count = edges.size();
  if (xv.cols != irreps_width(in))
    fail_config("tensor-product conv: input width does not match its layout");
  if (wv.rows != tp_weight_rows(paths) || wv.cols != radial.cols)
    fail_config("tensor-product conv: weight shape does not match paths x radial basis");
  if (sh.rows != e_count || radial.rows != e_count)
    fail_config("tensor-product conv: edge attribute row count does not match edges");
  int max_l2 = 0;
  for (const auto& p : paths) max_l2 = std::max(max_l2, p.l2);
  if (sh.cols < (max_l2 + 1) * (max_l2 + 1))
    fail_config("tensor-product conv: edge harmonics truncated below the path degrees");
  for (int e = 0; e < e_count; ++e)
    if (edges.src[e] < 0 || edges.src[e] >= xv.rows || edges.dst[e] < 0 ||
        edges.dst[e] >= edges.n_dst)
      fail_config(fmt::format("tensor-product conv: edge {} references a missing node", e));

  struct PathMeta {
    const std::vector<CgEntry>* cg;
    int n1, n3, channels, in_off, out_off, sh_off, pc_base;
  };
  // output channels grouped by degree (ascending), path order within a degree
  require_unique_degrees(in, "tensor-product conv");
  const IrrepsSpec out_spec = tp_out_spec(paths);
  auto metas = std::make_shared<std::vector<PathMeta>>();
  {
    std::array<int, kMaxDegree + 1> assigned{};
    int pc_base = 0;
    for (const auto& p : paths) {
      const int in_off = irreps_offset(in, p.l1);
      if (in_off < 0) fail_config("tensor-product conv: path degree missing from input layout");
      const int out_off = irreps_offset(out_spec, p.l3) + assigned[p.l3] * (2 * p.l3 + 1);
      metas->push_back({&cg_coefficients(p.l1, p.l2, p.l3), 2 * p.l1 + 1, 2 * p.l3 + 1,
                        p.channels, in_off, out_off, p.l2 * p.l2, pc_base});
      assigned[p.l3] += p.channels;
      pc_base += p.channels;
    }
  }
  const int out_width = irreps_width(out_spec);
  const int pc_total = tp_weight_rows(paths);
  const int rb = radial.cols;

  auto inv_deg = std::make_shared<std::vector<double>>(edges.n_dst, 0.0);
  for (int e = 0; e < e_count; ++e) (*inv_deg)[edges.dst[e]] += 1.0;
  for (double& d : *inv_deg) d = d > 0.0 ? 1.0 / d : 0.0;

  // learned radial profile per (edge, path-channel), cached for backward
  auto profile = std::make_shared<std::vector<double>>(static_cast<size_t>(e_count) * pc_total);

  Tensor y(edges.n_dst, out_width);
  for (int e = 0; e < e_count; ++e) {
    const double* xr = &xv.v[static_cast<size_t>(edges.src[e]) * xv.cols];
    double* yr = &y.v[static_cast<size_t>(edges.dst[e]) * out_width];
    const double* shr = &sh.v[static_cast<size_t>(e) * sh.cols];
    const double* rbr = &radial.v[static_cast<size_t>(e) * rb];
    double* prof = &(*profile)[static_cast<size_t>(e) * pc_total];
    for (const PathMeta& pm : *metas) {
      const auto& entries = *pm.cg;
      for (int c = 0; c < pm.channels; ++c) {
        const double* wr = &wv.v[static_cast<size_t>(pm.pc_base + c) * rb];
        double r = 0.0;
        for (int k = 0; k < rb; ++k) r += wr[k] * rbr[k];
        prof[pm.pc_base + c] = r;
        const double* xb = xr + pm.in_off + c * pm.n1;
        double* yb = yr + pm.out_off + c * pm.n3;
        for (const CgEntry& en : entries) yb[en.m3] += r * en.v * xb[en.m1] * shr[pm.sh_off + en.m2];
      }
    }
  }
  for (int d = 0; d < edges.n_dst; ++d) {
    double* yr = &y.v[static_cast<size_t>(d) * out_width];
    for (int c = 0; c < out_width; ++c) yr[c] *= (*inv_deg)[d];
  }

  const bool needs = nodes_[x].requires_grad || nodes_[w].requires_grad;
  const int id = push(std::move(y), needs, {});
  if (needs) {
    const EdgeList* ep = &edges;
    const Tensor* shp = &sh;
    const Tensor* rbp = &radial;
    nodes_[id].back = [this, x, w, id, ep, shp, rbp, metas, inv_deg, profile, pc_total]() {
      const Tensor& gy = nodes_[id].grad;
      const Tensor& xv2 = nodes_[x].value;
      Tensor& gx = nodes_[x].grad;
      Tensor& gw = nodes_[w].grad;
      const int rb2 = rbp->cols;
      for (int e = 0; e < ep->size(); ++e) {
        const int s = ep->src[e], d = ep->dst[e];
        const double scale = (*inv_deg)[d];
        const double* xr = &xv2.v[static_cast<size_t>(s) * xv2.cols];
        double* gxr = &gx.v[static_cast<size_t>(s) * gx.cols];
        const double* gyr = &gy.v[static_cast<size_t>(d) * gy.cols];
        const double* shr = &shp->v[static_cast<size_t>(e) * shp->cols];
        const double* rbr = &rbp->v[static_cast<size_t>(e) * rb2];
        const double* prof = &(*profile)[static_cast<size_t>(e) * pc_total];
        for (const PathMeta& pm : *metas) {
          const auto& entries = *pm.cg;
          for (int c = 0; c < pm.channels; ++c) {
            const double r = prof[pm.pc_base + c];
            const double* xb = xr + pm.in_off + c * pm.n1;
            double* gxb = gxr + pm.in_off + c * pm.n1;
            const double* gyb = gyr + pm.out_off + c * pm.n3;
            double gr = 0.0;
            for (const CgEntry& en : entries) {
              const double go = gyb[en.m3] * scale;
              const double shv = shr[pm.sh_off + en.m2];
              gxb[en.m1] += r * en.v * go * shv;
              gr += en.v * go * xb[en.m1] * shv;
            }
            double* gwr = &gw.v[static_cast<size_t>(pm.pc_base + c) * rb2];
            for (int k = 0; k < rb2; ++k) gwr[k] += gr * rbr[k];
          }
        }
      }
    };
  }
  return id;
}

IrrepsSpec Tape::gate_out_spec(const IrrepsSpec& pre) {
  if (pre.empty() || pre[0].l != 0) fail_config("gate: layout must start with a scalar block");
  int n_gate = 0;
  for (size_t i = 1; i < pre.size(); ++i) {
    if (pre[i].l == 0) fail_config("gate: scalar channels must form a single leading block");
    n_gate += pre[i].mult;
  }
  if (pre[0].mult <= n_gate)
    fail_config(fmt::format("gate: {} scalars cannot gate {} nonscalar channels and still carry "
                            "content",
                            pre[0].mult, n_gate));
  IrrepsSpec out;
  out.push_back({pre[0].mult - n_gate, 0});
  for (size_t i = 1; i < pre.size(); ++i) out.push_back(pre[i]);
  return out;
}

int Tape::gate(int x, const IrrepsSpec& pre) {
  const IrrepsSpec out = gate_out_spec(pre);
  const Tensor& xv = nodes_[x].value;
  if (xv.cols != irreps_width(pre)) fail_config("gate: input width does not match its layout");
  const int content = out[0].mult;
  int n_gate = 0;
  for (size_t i = 1; i < pre.size(); ++i) n_gate += pre[i].mult;

  Tensor y(xv.rows, irreps_width(out));
  for (int r = 0; r < xv.rows; ++r) {
    const double* xr = &xv.v[static_cast<size_t>(r) * xv.cols];
    double* yr = &y.v[static_cast<size_t>(r) * y.cols];
    for (int c = 0; c < content; ++c) yr[c] = xr[c] * sigmoid(xr[c]);
    int in_off = pre[0].mult, out_off = content, gi = 0;
    for (size_t i = 1; i < pre.size(); ++i) {
      const int n = 2 * pre[i].l + 1;
      for (int c = 0; c < pre[i].mult; ++c, ++gi) {
        const double s = sigmoid(xr[content + gi]);
        for (int m = 0; m < n; ++m) yr[out_off + m] = s * xr[in_off + m];
        in_off += n;
        out_off += n;
      }
    }
  }

  const bool needs = nodes_[x].requires_grad;
  const int id = push(std::move(y), needs, {});
  if (needs)
    nodes_[id].back = [this, x, id, pre, content]() {
      const Tensor& gy = nodes_[id].grad;
      const Tensor& xv2 = nodes_[x].value;
      Tensor& gx = nodes_[x].grad;
      for (int r = 0; r < xv2.rows; ++r) {
        const double* xr = &xv2.v[static_cast<size_t>(r) * xv2.cols];
        const double* gyr = &gy.v[static_cast<size_t>(r) * gy.cols];
        double* gxr = &gx.v[static_cast<size_t>(r) * gx.cols];
        for (int c = 0; c < content; ++c) {
          const double s = sigmoid(xr[c]);
          gxr[c] += gyr[c] * s * (1.0 + xr[c] * (1.0 - s));
        }
        int in_off = pre[0].mult, out_off = content, gi = 0;
        for (size_t i = 1; i < pre.size(); ++i) {
          const int n = 2 * pre[i].l + 1;
          for (int c = 0; c < pre[i].mult; ++c, ++gi) {
            const double g = xr[content + gi];
            const double s = sigmoid(g);
            double dot = 0.0;
            for (int m = 0; m < n; ++m) {
              gxr[in_off + m] += s * gyr[out_off + m];
              dot += gyr[out_off + m] * xr[in_off + m];
            }
            gxr[content + gi] += dot * s * (1.0 - s);
            in_off += n;
            out_off += n;
          }
        }
      }
    };
  return id;
}

int Tape::add(int a, int b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (av.rows != bv.rows || av.cols != bv.cols) fail_config("add: shape mismatch");
  Tensor y = av;
  for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += bv.v[i];
  const bool needs = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const int id = push(std::move(y), needs, {});
  if (needs)
    nodes_[id].back = [this, a, b, id]() {
      const Tensor& gy = nodes_[id].grad;
      for (size_t i = 0; i < gy.v.size(); ++i) {
        nodes_[a].grad.v[i] += gy.v[i];
        nodes_[b].grad.v[i] += gy.v[i];
      }
    };
  return id;
}

int Tape::gather_rows(int x, std::vector<int> rows) {
  const Tensor& xv = nodes_[x].value;
  for (const int r : rows)
    if (r < 0 || r >= xv.rows) fail_config("gather_rows: row index out of range");
  Tensor y(static_cast<int>(rows.size()), xv.cols);
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy_n(&xv.v[static_cast<size_t>(rows[i]) * xv.cols], xv.cols,
                &y.v[i * static_cast<size_t>(xv.cols)]);
  const bool needs = nodes_[x].requires_grad;
  const int id = push(std::move(y), needs, {});
  if (needs)
    nodes_[id].back = [this, x, id, rows = std::move(rows)]() {
      const Tensor& gy = nodes_[id].grad;
      Tensor& gx = nodes_[x].grad;
      for (size_t i = 0; i < rows.size(); ++i)
        for (int c = 0; c < gy.cols; ++c) gx.at(rows[i], c) += gy.at(static_cast<int>(i), c);
    };
  return id;
}

int Tape::row_dot(int x, const std::vector<int>& row_of, const Tensor& basis) {
  const Tensor& xv = nodes_[x].value;
  const int n = static_cast<int>(row_of.size());
  if (basis.rows != n || basis.cols != xv.cols)
    fail_config("row_dot: basis shape does not match samples x feature width");
  for (const int r : row_of)
    if (r < 0 || r >= xv.rows) fail_config("row_dot: row index out of range");
  Tensor y(n, 1);
  for (int s = 0; s < n; ++s) {
    const double* xr = &xv.v[static_cast<size_t>(row_of[s]) * xv.cols];
    const double* br = &basis.v[static_cast<size_t>(s) * basis.cols];
    double acc = 0.0;
    for (int c = 0; c < xv.cols; ++c) acc += xr[c] * br[c];
    y.v[s] = acc;
  }
  const bool needs = nodes_[x].requires_grad;
  const int id = push(std::move(y), needs, {});
  if (needs) {
    const Tensor* bp = &basis;
    auto rows = std::make_shared<std::vector<int>>(row_of);
    nodes_[id].back = [this, x, id, bp, rows]() {
      const Tensor& gy = nodes_[id].grad;
      Tensor& gx = nodes_[x].grad;
      for (size_t s = 0; s < rows->size(); ++s) {
        const double g = gy.v[s];
        const double* br = &bp->v[s * static_cast<size_t>(bp->cols)];
        double* gxr = &gx.v[static_cast<size_t>((*rows)[s]) * gx.cols];
        for (int c = 0; c < gx.cols; ++c) gxr[c] += g * br[c];
      }
    };
  }
  return id;
}

int Tape::bce_mean(int logits, const std::vector<double>& labels) {
  const Tensor& qv = nodes_[logits].value;
  if (qv.cols != 1 || qv.rows != static_cast<int>(labels.size()))
    fail_config("bce_mean: logits must be n x 1 matching the labels");
  if (qv.rows == 0) fail_config("bce_mean: empty batch");
  const int n = qv.rows;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double q = qv.v[i];
    loss += std::max(q, 0.0) - q * labels[i] + std::log1p(std::exp(-std::abs(q)));
  }
  Tensor y(1, 1);
  y.v[0] = loss / n;
  const bool needs = nodes_[logits].requires_grad;
  const int id = push(std::move(y), needs, {});
  if (needs) {
    auto lab = std::make_shared<std::vector<double>>(labels);
    nodes_[id].back = [this, logits, id, lab, n]() {
      const double g = nodes_[id].grad.v[0];
      const Tensor& qv2 = nodes_[logits].value;
      Tensor& gq = nodes_[logits].grad;
      for (int i = 0; i < n; ++i) gq.v[i] += g * (sigmoid(qv2.v[i]) - (*lab)[i]) / n;
    };
  }
  return id;
}

int Tape::mse_mean(int x, const Tensor& target) {
  const Tensor& xv = nodes_[x].value;
  if (xv.rows != target.rows || xv.cols != target.cols) fail_config("mse_mean: shape mismatch");
  if (xv.size() == 0) fail_config("mse_mean: empty tensor");
  const size_t n = xv.size();
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = xv.v[i] - target.v[i];
    loss += d * d;
  }
  Tensor y(1, 1);
  y.v[0] = loss / static_cast<double>(n);
  const bool needs = nodes_[x].requires_grad;
  const int id = push(std::move(y), needs, {});
  if (needs) {
    auto t = std::make_shared<Tensor>(target);
    nodes_[id].back = [this, x, id, t, n]() {
      const double g = nodes_[id].grad.v[0];
      const Tensor& xv2 = nodes_[x].value;
      Tensor& gx = nodes_[x].grad;
      for (size_t i = 0; i < n; ++i)
        gx.v[i] += g * 2.0 * (xv2.v[i] - t->v[i]) / static_cast<double>(n);
    };
  }
  return id;
}

int Tape::check(int node) const {
  if (node < 0 || node >= static_cast<int>(nodes_.size()))
    fail_config("tape: node was never recorded");
  return node;
}

void Tape::backward(int node) {
  check(node);
  const Tensor& out = nodes_[node].value;
  if (out.rows != 1 || out.cols != 1) fail_config("backward: output node must be a scalar");
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.rows, n.value.cols);
  }
  nodes_[node].grad.v[0] = 1.0;
  for (int i = node; i >= 0; --i)
    if (nodes_[i].back && nodes_[i].requires_grad) nodes_[i].back();
}

}  // namespace equigrasp
