#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "equigrasp/cloud.hpp"
#include "equigrasp/irreps.hpp"
#include "equigrasp/so3.hpp"
#include "equigrasp/tape.hpp"

namespace equigrasp {

// Rotation-equivariant point UNet over a neighborhood graph: embedding,
// tensor-product convolutions with gate nonlinearities, farthest-point
// pooling with recorded edge inversion, skip connections, and a head that
// emits per-query-point spherical-harmonic coefficients.

struct NetworkConfig {
  int l_out = 2;    // output field degree (<= 3)
  int l_edge = 2;   // edge harmonics degree
  int stages = 3;   // matched down/up stage count
  double fps_ratio = 0.25;
  int knn_k = 16;   // doubles at each coarser level
  int radial_size = 16;
  double r_scale = 0.05;  // radial basis range seed; doubles per level
  std::vector<int> hidden_mults = {8, 4, 2};  // channels per degree 0..L
  double dropout = 0.0;  // reserved knob; only 0.0 is accepted
  uint64_t seed = 1;

  IrrepsSpec hidden() const;
  IrrepsSpec gate_pre() const;  // hidden plus one gate scalar per nonscalar channel
  IrrepsSpec out_spec() const;  // one channel per degree 0..l_out
  void validate() const;
};

struct Network {
  NetworkConfig cfg;
  std::vector<Tensor> params;       // registry order; checkpoints flatten this
  std::vector<std::string> names;   // parallel to params
  int param_count() const;
  int index_of(const std::string& name) const;  // error if absent
};

// Deterministic variance-preserving init from cfg.seed.
Network make_network(const NetworkConfig& cfg);

// --- graph construction -----------------------------------------------

struct EdgeAttrs {
  Tensor sh;      // E x (l_edge+1)^2 harmonics of edge direction
  Tensor radial;  // E x radial_size Gaussian basis of edge length
};

// Harmonics of each edge direction plus a Gaussian radial basis of length
// with centers spanning [0, d_max]. Zero-length edges take the degree-0-only
// self-loop convention.
EdgeAttrs sh_edge_attrs(const std::vector<Eigen::Vector3d>& vecs, int l_edge, int radial_size,
                        double d_max);

struct PoolResult {
  std::vector<int> survivors;  // ascending fine-row indices
  EdgeList down_edges;         // src = fine row, dst = coarse row
};

// Farthest-point pooling: keeps round(ratio * n) >= 1 nodes; every survivor
// records a self down-edge and every dropped node records edges to its three
// nearest survivors, so each fine node sources at least one down-edge.
PoolResult fps_pool(const std::vector<Eigen::Vector3d>& pts, double ratio);

struct LevelPlan {
  std::vector<Eigen::Vector3d> positions;  // center-relative coordinates
  EdgeList knn_edges;                      // src sender, dst receiver
  EdgeAttrs knn_attrs;
};

struct PoolPlan {
  std::vector<int> survivors;
  EdgeList down_edges;
  EdgeAttrs down_attrs;
  EdgeList up_edges;  // swapped source/destination of down_edges
  EdgeAttrs up_attrs;
};

// Everything position-derived a forward pass needs, computed once per
// neighborhood and reusable across epochs. Edge vectors are p_src - p_dst in
// center-relative coordinates, so the plan is exactly translation invariant.
struct ForwardPlan {
  Tensor input;  // per context point: [1 | normal (y,z,x) | offset/r_l (y,z,x)]
  std::vector<LevelPlan> levels;  // stages + 1 entries
  std::vector<PoolPlan> pools;    // stages entries
  std::vector<int> query_rows;    // level-0 rows of the query subset
};

ForwardPlan build_plan(const NetworkConfig& cfg, const Neighborhood& nb, const PointCloud& cloud);

// Records the whole pass on the tape and returns the node holding one
// coefficient row (width (l_out+1)^2) per query point. When param_ids is
// non-null it receives the parameter leaf ids in registry order and the
// leafs are marked differentiable.
int forward_on_tape(Tape& tape, const Network& net, const ForwardPlan& plan,
                    std::vector<int>* param_ids);

// Convenience inference path; coefficients align with nb.query_indices.
FourierField forward(const Network& net, const Neighborhood& nb, const PointCloud& cloud);

// --- checkpoints --------------------------------------------------------

struct Checkpoint {
  Network net;
  uint32_t epoch = 0;
  double lr = 0.0;
  uint64_t seed = 0;
};

// Binary format: magic "OGSH", u32 version (1), u32 config text length,
// canonical key=value config text, u64 weight count, weights as 32-bit
// little-endian floats in registry order, then u32 epoch, f64 lr, u64 seed.
void save_checkpoint(const std::string& path, const Network& net, uint32_t epoch, double lr,
                     uint64_t seed);
Checkpoint load_checkpoint(const std::string& path);

std::string serialize_config(const NetworkConfig& cfg);  // canonical, sorted keys
NetworkConfig parse_config_text(const std::string& text);

// --- loss, optimizer, schedule -------------------------------------------

// Mean sigmoid binary cross-entropy on pre-sigmoid logits; writes
// d(loss)/d(logit) = (sigmoid(q) - y) / n into grad when non-null.
double bce_loss(const std::vector<double>& logits, const std::vector<double>& labels,
                std::vector<double>* grad);

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t step = 0;
};

// Decoupled-weight-decay Adam over the parameter list.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
               double weight_decay = 1e-2);

double cosine_lr(int step, int total_steps, double lr0 = 1e-4, double lr_min = 1e-6);

// --- training -------------------------------------------------------------

struct TrainSample {
  int row = 0;            // row in the forward output (query order)
  Eigen::Vector3d dir{0, 0, 1};
  double label = 0.0;     // 0 or 1
};

struct TrainNeighborhood {
  ForwardPlan plan;
  std::vector<TrainSample> samples;
  uint64_t scene_id = 0;  // validation split hashes this
  int id = 0;             // stable identity for shuffling and balancing
};

struct TrainConfig {
  int epochs = 15;       // total planned epochs (cosine horizon)
  int start_epoch = 0;   // resume point; fresh optimizer state
  int batch_size = 8;    // neighborhoods per optimizer step
  double lr0 = 1e-4;
  double lr_min = 1e-6;
  double weight_decay = 1e-2;
  uint64_t seed = 1;
  bool hold_out_val = true;  // scenes hashing to 0 mod 10 validate
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // over the balanced training samples
  double val_accuracy = 0.0;    // balanced; NaN when no validation split
};

struct TrainResult {
  Network net;
  std::vector<EpochLog> log;
};

// Sample indices with the majority label class subsampled to the minority,
// stateless in (seed, epoch, nb.id), ascending order. Empty when a class is
// absent.
std::vector<int> balanced_indices(const TrainNeighborhood& nb, uint64_t seed, uint64_t epoch);

// Per-neighborhood class balancing (majority subsampled to the minority,
// stateless in (seed, epoch, id)), per-epoch shuffling, mean-of-neighborhood
// losses per batch, gradients reduced in ascending neighborhood id order.
// Deterministic given inputs and seed. The callback sees each finished epoch
// with the network as it stands, so callers can checkpoint. Throws when the
// dataset is empty, single-class, or the validation split leaves no training
// data.
TrainResult train(Network net, const std::vector<TrainNeighborhood>& data, const TrainConfig& tc,
                  const std::function<void(const EpochLog&, const Network&)>& on_epoch = {});

}  // namespace equigrasp
