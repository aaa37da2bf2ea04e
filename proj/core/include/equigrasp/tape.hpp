#pragma once

#include <functional>
#include <vector>

#include "equigrasp/irreps.hpp"

namespace equigrasp {

// Dense row-major matrix of doubles; the only tensor type the tape records.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return v.size(); }
};

// Directed edges src[i] -> dst[i]; senders and receivers may be different
// node sets (pooling sends fine -> coarse, unpooling the reverse).
struct EdgeList {
  std::vector<int> src;
  std::vector<int> dst;
  int n_dst = 0;
  int size() const { return static_cast<int>(src.size()); }
};

// One allowed coupling (l1 in) x (l2 edge) -> (l3 out), applied depthwise:
// every input channel of degree l1 produces its own output channel of
// degree l3, so a path contributes `channels` = mult(l1) output channels.
struct TpPath {
  int l1 = 0;
  int l2 = 0;
  int l3 = 0;
  int channels = 0;
};

// All CG-allowed paths from input degrees and edge degrees 0..l_edge into
// output degrees 0..l_out_max, in deterministic (l1, l2, l3) order.
std::vector<TpPath> tp_paths(const IrrepsSpec& in, int l_edge, int l_out_max);

// Output layout of tp_message_mean: one block per degree, ascending; inside
// a degree the channels follow path enumeration order. Degrees stay unique,
// which every layout consumed by linear_blockwise and gate requires.
IrrepsSpec tp_out_spec(const std::vector<TpPath>& paths);
int tp_weight_rows(const std::vector<TpPath>& paths);

// Flat weight count of linear_blockwise for a degree-respecting linear map
// (degrees present in both specs mix; degree-0 bias not included).
int linear_weight_count(const IrrepsSpec& in, const IrrepsSpec& out);

// Reverse-mode tape. Ops record closures; backward() replays them in
// reverse. Aux inputs passed by reference (EdgeList, SH/radial tensors,
// basis rows) are captured by pointer and must outlive the tape.
class Tape {
 public:
  // New tensor node. requires_grad marks a learned parameter leaf.
  int leaf(Tensor t, bool requires_grad = false);

  // Degree-respecting linear map: per degree l present in both specs,
  // out-channel block = sum over in-channels of W_l[oc, ic] * x block.
  // w is the 1 x linear_weight_count(in, out) flat parameter tensor holding
  // the per-degree matrices in spec order, each out_mult x in_mult row-major.
  // b (or -1 for none) is 1 x mult0(out), added to degree-0 channels.
  int linear_blockwise(int x, int w, int b, const IrrepsSpec& in, const IrrepsSpec& out);

  // Per-edge depthwise tensor product of sender features with edge SH,
  // contracted through real CG on `paths`, scaled by a learned radial
  // profile (w: tp_weight_rows(paths) x R against radial: E x R), then
  // mean-aggregated over incoming edges per receiver. sh: E x (L+1)^2.
  // Output rows = edges.n_dst, layout tp_out_spec(paths).
  int tp_message_mean(int x, int w, const EdgeList& edges, const Tensor& sh,
                      const Tensor& radial, const IrrepsSpec& in,
                      const std::vector<TpPath>& paths);

  // Gated nonlinearity. pre = (content + gate scalars, 0) + nonscalar
  // blocks; the last sum(mult_{l>0}) entries of the degree-0 block gate the
  // nonscalar channels in spec order. Content scalars map to x*sigmoid(x);
  // each nonscalar channel block is scaled by sigmoid(its gate scalar).
  int gate(int x, const IrrepsSpec& pre);
  static IrrepsSpec gate_out_spec(const IrrepsSpec& pre);

  int add(int a, int b);

  // y.row(i) = x.row(rows[i]); backward scatter-adds.
  int gather_rows(int x, std::vector<int> rows);

  // out[s] = dot(x.row(row_of[s]), basis.row(s)); output is S x 1.
  int row_dot(int x, const std::vector<int>& row_of, const Tensor& basis);

  // Mean sigmoid binary cross-entropy of logits (n x 1, pre-sigmoid)
  // against 0/1 labels; output is 1 x 1. Computed in the stable logit form.
  int bce_mean(int logits, const std::vector<double>& labels);

  // Mean squared error against a constant target of the same shape; 1 x 1.
  int mse_mean(int x, const Tensor& target);

  // Seeds d(node) = 1 (node must be 1 x 1) and accumulates gradients into
  // every node reachable backwards that requires them.
  void backward(int node);

  const Tensor& value(int node) const { return nodes_[check(node)].value; }
  const Tensor& grad(int node) const { return nodes_[check(node)].grad; }
  bool requires_grad(int node) const { return nodes_[check(node)].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> back;
  };

  int push(Tensor value, bool requires_grad, std::function<void()> back);
  int check(int node) const;
  std::vector<Node> nodes_;
};

}  // namespace equigrasp
