#include "equigrasp/equinet.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "equigrasp/error.hpp"

namespace equigrasp {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct ParamDesc {
  std::string name;
  enum class Kind { tp, linear, bias } kind;
  IrrepsSpec in, out;  // linear slices drive the init bounds
  int rows = 0, cols = 0;
};

std::vector<ParamDesc> param_registry(const NetworkConfig& cfg) {
  const IrrepsSpec hidden = cfg.hidden();
  const IrrepsSpec pre = cfg.gate_pre();
  const auto paths = tp_paths(hidden, cfg.l_edge, static_cast<int>(cfg.hidden_mults.size()) - 1);
  const IrrepsSpec tp_out = tp_out_spec(paths);
  const IrrepsSpec embed_in = {{1, 0}, {2, 1}};

  std::vector<ParamDesc> reg;
  auto lin = [&](const std::string& base, const IrrepsSpec& in, const IrrepsSpec& out) {
    reg.push_back({base + ".w", ParamDesc::Kind::linear, in, out, 1, linear_weight_count(in, out)});
    reg.push_back({base + ".b", ParamDesc::Kind::bias, {}, {}, 1, irreps_mult(out, 0)});
  };
  auto conv = [&](const std::string& base) {
    reg.push_back(
        {base + ".tp.w", ParamDesc::Kind::tp, {}, {}, tp_weight_rows(paths), cfg.radial_size});
    lin(base + ".lin", tp_out, pre);
  };

  lin("embed", embed_in, hidden);
  for (int s = 0; s < cfg.stages; ++s) {
    conv(fmt::format("down{}", s));
    conv(fmt::format("pool{}", s));
  }
  conv("mid");
  for (int s = cfg.stages - 1; s >= 0; --s) {
    conv(fmt::format("unpool{}", s));
    lin(fmt::format("merge{}", s), hidden, pre);
  }
  lin("head", hidden, cfg.out_spec());
  return reg;
}

uint64_t scene_bucket(uint64_t scene_id) {
  Rng r(scene_id);
  return r.next() % 10;
}

}  // namespace

std::vector<int> balanced_indices(const TrainNeighborhood& nb, uint64_t seed, uint64_t epoch) {
  std::vector<int> pos, neg;
  for (size_t i = 0; i < nb.samples.size(); ++i)
    (nb.samples[i].label > 0.5 ? pos : neg).push_back(static_cast<int>(i));
  const int keep = static_cast<int>(std::min(pos.size(), neg.size()));
  if (keep == 0) return {};
  Rng rng(mix_seed(mix_seed(seed, 0xba1a'ba1aull), mix_seed(static_cast<uint64_t>(nb.id), epoch)));
  auto pick = [&](std::vector<int>& v) {
    for (int i = 0; i < keep; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(v.size() - i));
      std::swap(v[i], v[j]);
    }
    v.resize(keep);
  };
  if (static_cast<int>(pos.size()) > keep) pick(pos);
  if (static_cast<int>(neg.size()) > keep) pick(neg);
  std::vector<int> sel;
  sel.reserve(2 * static_cast<size_t>(keep));
  sel.insert(sel.end(), pos.begin(), pos.end());
  sel.insert(sel.end(), neg.begin(), neg.end());
  std::sort(sel.begin(), sel.end());
  return sel;
}

IrrepsSpec NetworkConfig::hidden() const {
  IrrepsSpec spec;
  for (size_t l = 0; l < hidden_mults.size(); ++l)
    spec.push_back({hidden_mults[l], static_cast<int>(l)});
  return spec;
}

IrrepsSpec NetworkConfig::gate_pre() const {
  int gates = 0;
  for (size_t l = 1; l < hidden_mults.size(); ++l) gates += hidden_mults[l];
  IrrepsSpec spec = {{hidden_mults[0] + gates, 0}};
  for (size_t l = 1; l < hidden_mults.size(); ++l)
    spec.push_back({hidden_mults[l], static_cast<int>(l)});
  return spec;
}

IrrepsSpec NetworkConfig::out_spec() const {
  IrrepsSpec spec;
  for (int l = 0; l <= l_out; ++l) spec.push_back({1, l});
  return spec;
}

void NetworkConfig::validate() const {
  if (l_out < 0 || l_out > 3) fail_config(fmt::format("output degree {} outside [0, 3]", l_out));
  if (hidden_mults.empty() || hidden_mults.size() > 4)
    fail_config("hidden multiplicities must cover degrees 0..3 at most");
  for (const int m : hidden_mults)
    if (m < 1) fail_config("hidden multiplicities must be positive");
  if (l_out > static_cast<int>(hidden_mults.size()) - 1)
    fail_config(fmt::format("output degree {} exceeds the hidden degree {}", l_out,
                            hidden_mults.size() - 1));
  if (l_edge < 0 || l_edge > 3) fail_config(fmt::format("edge degree {} outside [0, 3]", l_edge));
  if (stages < 0 || stages > 6) fail_config(fmt::format("stage count {} outside [0, 6]", stages));
  if (!(fps_ratio > 0.0) || fps_ratio > 1.0)
    fail_config(fmt::format("pooling ratio {} outside (0, 1]", fps_ratio));
  if (knn_k < 1) fail_config("graph neighbor count must be at least 1");
  if (radial_size < 2) fail_config("radial basis needs at least 2 centers");
  if (!(r_scale > 0.0)) fail_config("radial range scale must be positive");
  if (dropout != 0.0) fail_config("dropout is a reserved knob and must be 0");
}

int Network::param_count() const {
  int n = 0;
  for (const auto& t : params) n += static_cast<int>(t.size());
  return n;
}

int Network::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  fail_config(fmt::format("network has no parameter named '{}'", name));
}

Network make_network(const NetworkConfig& cfg) {
  cfg.validate();
  Network net;
  net.cfg = cfg;
  const auto reg = param_registry(cfg);
  for (size_t i = 0; i < reg.size(); ++i) {
    const ParamDesc& d = reg[i];
    Tensor t(d.rows, d.cols);
    Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(i)));
    switch (d.kind) {
      case ParamDesc::Kind::tp: {
        const double bound = std::sqrt(3.0 / cfg.radial_size);
        for (double& x : t.v) x = rng.uniform(-bound, bound);
        break;
      }
      case ParamDesc::Kind::linear: {
        // variance-preserving per degree: the fan-in differs per slice
        size_t k = 0;
        for (const auto& o : d.out) {
          const int im = irreps_mult(d.in, o.l);
          if (im == 0) continue;
          const double bound = std::sqrt(3.0 / im);
          for (int j = 0; j < o.mult * im; ++j) t.v[k++] = rng.uniform(-bound, bound);
        }
        break;
      }
      case ParamDesc::Kind::bias:
        break;  // zeros
    }
    net.params.push_back(std::move(t));
    net.names.push_back(d.name);
  }
  return net;
}

EdgeAttrs sh_edge_attrs(const std::vector<Eigen::Vector3d>& vecs, int l_edge, int radial_size,
                        double d_max) {
  if (l_edge < 0 || l_edge > kMaxDegree) fail_config("edge harmonics degree out of range");
  if (radial_size < 2) fail_config("radial basis needs at least 2 centers");
  if (!(d_max > 0.0)) fail_config("radial basis range must be positive");
  const int e_count = static_cast<int>(vecs.size());
  EdgeAttrs attrs;
  attrs.sh = Tensor(e_count, sh_size(l_edge));
  attrs.radial = Tensor(e_count, radial_size);
  const double spacing = d_max / (radial_size - 1);
  const double y00 = sh_basis(Eigen::Vector3d(0, 0, 1), 0)[0];
  for (int e = 0; e < e_count; ++e) {
    const double len = vecs[e].norm();
    if (len < 1e-12) {
      attrs.sh.at(e, 0) = y00;  // self-loop convention: degree-0 only
    } else {
      const auto row = sh_basis(vecs[e] / len, l_edge);
      for (int j = 0; j < sh_size(l_edge); ++j) attrs.sh.at(e, j) = row[j];
    }
    for (int k = 0; k < radial_size; ++k) {
      const double z = (len - k * spacing) / spacing;
      attrs.radial.at(e, k) = std::exp(-z * z);
    }
  }
  return attrs;
}

PoolResult fps_pool(const std::vector<Eigen::Vector3d>& pts, double ratio) {
  const int n = static_cast<int>(pts.size());
  if (n == 0) fail_config("pooling needs a nonempty level");
  if (!(ratio > 0.0) || ratio > 1.0) fail_config("pooling ratio outside (0, 1]");
  const int keep = std::min(n, std::max(1, static_cast<int>(std::llround(ratio * n))));

  PoolResult res;
  res.survivors = farthest_point_sampling(pts, keep);
  std::sort(res.survivors.begin(), res.survivors.end());

  std::vector<int> coarse_row(n, -1);
  for (int c = 0; c < keep; ++c) coarse_row[res.survivors[c]] = c;

  res.down_edges.n_dst = keep;
  for (int f = 0; f < n; ++f) {
    if (coarse_row[f] >= 0) {
      res.down_edges.src.push_back(f);
      res.down_edges.dst.push_back(coarse_row[f]);
      continue;
    }
    // dropped node: route to its three nearest survivors
    std::vector<std::pair<double, int>> d;
    d.reserve(keep);
    for (const int s : res.survivors) d.push_back({(pts[f] - pts[s]).squaredNorm(), s});
    std::sort(d.begin(), d.end());
    for (int j = 0; j < std::min(3, keep); ++j) {
      res.down_edges.src.push_back(f);
      res.down_edges.dst.push_back(coarse_row[d[j].second]);
    }
  }
  return res;
}

ForwardPlan build_plan(const NetworkConfig& cfg, const Neighborhood& nb, const PointCloud& cloud) {
  cfg.validate();
  if (!cloud.has_normals()) fail_config("the embedding needs normals on the cloud");
  if (nb.context_indices.empty()) fail_config("neighborhood has no context points");

  ForwardPlan plan;
  const int m = static_cast<int>(nb.context_indices.size());

  // center-relative coordinates make translation invariance exact
  std::vector<Eigen::Vector3d> local(m);
  for (int i = 0; i < m; ++i) {
    const int idx = nb.context_indices[i];
    if (idx < 0 || idx >= cloud.size()) fail_config("neighborhood references a missing point");
    local[i] = cloud.positions[idx] - nb.center;
  }

  plan.input = Tensor(m, 7);
  for (int i = 0; i < m; ++i) {
    const Eigen::Vector3d& n = cloud.normals[nb.context_indices[i]];
    plan.input.at(i, 0) = 1.0;
    plan.input.at(i, 1) = n.y();
    plan.input.at(i, 2) = n.z();
    plan.input.at(i, 3) = n.x();
    plan.input.at(i, 4) = local[i].y() / cfg.r_scale;
    plan.input.at(i, 5) = local[i].z() / cfg.r_scale;
    plan.input.at(i, 6) = local[i].x() / cfg.r_scale;
  }

  auto knn_level = [&](const std::vector<Eigen::Vector3d>& pts, int level) {
    LevelPlan lp;
    lp.positions = pts;
    const int n = static_cast<int>(pts.size());
    const int k = std::min(cfg.knn_k * (1 << level), n - 1);
    lp.knn_edges.n_dst = n;
    std::vector<Eigen::Vector3d> vecs;
    if (k > 0) {
      for (int i = 0; i < n; ++i) {
        const auto near = knn(pts, pts[i], std::min(k + 1, n));
        int taken = 0;
        for (const int j : near) {
          if (j == i || taken == k) continue;
          lp.knn_edges.src.push_back(j);
          lp.knn_edges.dst.push_back(i);
          vecs.push_back(pts[j] - pts[i]);
          ++taken;
        }
      }
    }
    lp.knn_attrs = sh_edge_attrs(vecs, cfg.l_edge, cfg.radial_size,
                                 2.0 * cfg.r_scale * (1 << level));
    return lp;
  };

  plan.levels.push_back(knn_level(local, 0));
  for (int s = 0; s < cfg.stages; ++s) {
    const auto& pts = plan.levels[s].positions;
    PoolPlan pp;
    PoolResult pr = fps_pool(pts, cfg.fps_ratio);
    pp.survivors = pr.survivors;
    pp.down_edges = std::move(pr.down_edges);

    std::vector<Eigen::Vector3d> coarse;
    coarse.reserve(pp.survivors.size());
    for (const int s_idx : pp.survivors) coarse.push_back(pts[s_idx]);

    std::vector<Eigen::Vector3d> down_vecs, up_vecs;
    pp.up_edges.n_dst = static_cast<int>(pts.size());
    for (int e = 0; e < pp.down_edges.size(); ++e) {
      const Eigen::Vector3d v = pts[pp.down_edges.src[e]] - coarse[pp.down_edges.dst[e]];
      down_vecs.push_back(v);
      pp.up_edges.src.push_back(pp.down_edges.dst[e]);
      pp.up_edges.dst.push_back(pp.down_edges.src[e]);
      up_vecs.push_back(-v);
    }
    const double d_max = 2.0 * cfg.r_scale * (1 << (s + 1));
    pp.down_attrs = sh_edge_attrs(down_vecs, cfg.l_edge, cfg.radial_size, d_max);
    pp.up_attrs = sh_edge_attrs(up_vecs, cfg.l_edge, cfg.radial_size, d_max);
    plan.pools.push_back(std::move(pp));
    plan.levels.push_back(knn_level(coarse, s + 1));
  }

  std::unordered_map<int, int> row_of;
  row_of.reserve(nb.context_indices.size());
  for (int i = 0; i < m; ++i) row_of[nb.context_indices[i]] = i;
  for (const int q : nb.query_indices) {
    const auto it = row_of.find(q);
    if (it == row_of.end()) fail_config("query point missing from its own context");
    plan.query_rows.push_back(it->second);
  }
  return plan;
}

int forward_on_tape(Tape& tape, const Network& net, const ForwardPlan& plan,
                    std::vector<int>* param_ids) {
  const NetworkConfig& cfg = net.cfg;
  const IrrepsSpec hidden = cfg.hidden();
  const IrrepsSpec pre = cfg.gate_pre();
  const auto paths = tp_paths(hidden, cfg.l_edge, static_cast<int>(cfg.hidden_mults.size()) - 1);
  const IrrepsSpec tp_out = tp_out_spec(paths);
  const IrrepsSpec embed_in = {{1, 0}, {2, 1}};

  if (static_cast<int>(plan.levels.size()) != cfg.stages + 1 ||
      static_cast<int>(plan.pools.size()) != cfg.stages)
    fail_config("forward plan stage count does not match the network");

  std::vector<int> ids;
  ids.reserve(net.params.size());
  for (const auto& p : net.params) ids.push_back(tape.leaf(p, param_ids != nullptr));
  if (param_ids) *param_ids = ids;
  auto P = [&](const std::string& name) { return ids[net.index_of(name)]; };

  auto conv = [&](int f, const std::string& base, const EdgeList& edges, const EdgeAttrs& attrs) {
    const int tp = tape.tp_message_mean(f, P(base + ".tp.w"), edges, attrs.sh, attrs.radial,
                                        hidden, paths);
    const int lin = tape.linear_blockwise(tp, P(base + ".lin.w"), P(base + ".lin.b"), tp_out, pre);
    return tape.gate(lin, pre);
  };

  int f = tape.linear_blockwise(tape.leaf(plan.input), P("embed.w"), P("embed.b"), embed_in,
                                hidden);
  std::vector<int> skips;
  for (int s = 0; s < cfg.stages; ++s) {
    f = conv(f, fmt::format("down{}", s), plan.levels[s].knn_edges, plan.levels[s].knn_attrs);
    skips.push_back(f);
    f = conv(f, fmt::format("pool{}", s), plan.pools[s].down_edges, plan.pools[s].down_attrs);
  }
  f = conv(f, "mid", plan.levels[cfg.stages].knn_edges, plan.levels[cfg.stages].knn_attrs);
  for (int s = cfg.stages - 1; s >= 0; --s) {
    f = conv(f, fmt::format("unpool{}", s), plan.pools[s].up_edges, plan.pools[s].up_attrs);
    f = tape.add(f, skips[s]);
    const std::string base = fmt::format("merge{}", s);
    f = tape.gate(tape.linear_blockwise(f, P(base + ".w"), P(base + ".b"), hidden, pre), pre);
  }
  const int head = tape.linear_blockwise(f, P("head.w"), P("head.b"), hidden, cfg.out_spec());
  return tape.gather_rows(head, plan.query_rows);
}

FourierField forward(const Network& net, const Neighborhood& nb, const PointCloud& cloud) {
  const ForwardPlan plan = build_plan(net.cfg, nb, cloud);
  Tape tape;
  const int out = forward_on_tape(tape, net, plan, nullptr);
  const Tensor& val = tape.value(out);

  FourierField field;
  field.L = net.cfg.l_out;
  field.coeffs.reserve(val.rows);
  for (int r = 0; r < val.rows; ++r) {
    FourierCoeffs c = FourierCoeffs::zeros(net.cfg.l_out);
    for (int j = 0; j < val.cols; ++j) c.data[j] = val.at(r, j);
    field.coeffs.push_back(std::move(c));
  }
  return field;
}

// --- checkpoints -----------------------------------------------------------

namespace {

void put_bytes(std::string& buf, const void* p, size_t n) {
  buf.append(static_cast<const char*>(p), n);
}
template <typename T>
void put_pod(std::string& buf, T v) {
  put_bytes(buf, &v, sizeof(v));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  void take(void* out, size_t n, const std::string& what) {
    if (pos + n > buf.size()) fail_io(fmt::format("checkpoint truncated reading {}", what));
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T pod(const std::string& what) {
    T v;
    take(&v, sizeof(v), what);
    return v;
  }
};

}  // namespace

std::string serialize_config(const NetworkConfig& cfg) {
  std::string hidden;
  for (size_t i = 0; i < cfg.hidden_mults.size(); ++i)
    hidden += fmt::format("{}{}", i ? "," : "", cfg.hidden_mults[i]);
  // keys sorted so the serialization is canonical
  return fmt::format(
      "dropout={}\nfps_ratio={}\nhidden={}\nknn_k={}\nl_edge={}\nl_out={}\nr_scale={}\n"
      "radial={}\nseed={}\nstages={}\n",
      cfg.dropout, cfg.fps_ratio, hidden, cfg.knn_k, cfg.l_edge, cfg.l_out, cfg.r_scale,
      cfg.radial_size, cfg.seed, cfg.stages);
}

NetworkConfig parse_config_text(const std::string& text) {
  NetworkConfig cfg;
  std::unordered_map<std::string, std::string> kv;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail_io(fmt::format("malformed config line '{}'", line));
    const std::string key = line.substr(0, eq);
    if (!kv.emplace(key, line.substr(eq + 1)).second)
      fail_io(fmt::format("duplicate config key '{}'", key));
  }
  auto need = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) fail_io(fmt::format("config is missing key '{}'", key));
    return it->second;
  };
  try {
    cfg.dropout = std::stod(need("dropout"));
    cfg.fps_ratio = std::stod(need("fps_ratio"));
    cfg.knn_k = std::stoi(need("knn_k"));
    cfg.l_edge = std::stoi(need("l_edge"));
    cfg.l_out = std::stoi(need("l_out"));
    cfg.r_scale = std::stod(need("r_scale"));
    cfg.radial_size = std::stoi(need("radial"));
    cfg.seed = std::stoull(need("seed"));
    cfg.stages = std::stoi(need("stages"));
    cfg.hidden_mults.clear();
    const std::string hidden = need("hidden");
    size_t p = 0;
    while (p <= hidden.size()) {
      size_t c = hidden.find(',', p);
      if (c == std::string::npos) c = hidden.size();
      cfg.hidden_mults.push_back(std::stoi(hidden.substr(p, c - p)));
      p = c + 1;
    }
  } catch (const std::invalid_argument&) {
    fail_io("config value is not a number");
  } catch (const std::out_of_range&) {
    fail_io("config value is out of range");
  }
  if (kv.size() != 10) fail_io("config carries unknown keys");
  return cfg;
}

void save_checkpoint(const std::string& path, const Network& net, uint32_t epoch, double lr,
                     uint64_t seed) {
  std::string buf;
  buf.append("OGSH", 4);
  put_pod<uint32_t>(buf, 1u);
  const std::string cfg_text = serialize_config(net.cfg);
  put_pod<uint32_t>(buf, static_cast<uint32_t>(cfg_text.size()));
  buf += cfg_text;
  put_pod<uint64_t>(buf, static_cast<uint64_t>(net.param_count()));
  for (const auto& t : net.params)
    for (const double x : t.v) put_pod<float>(buf, static_cast<float>(x));
  put_pod<uint32_t>(buf, epoch);
  put_pod<double>(buf, lr);
  put_pod<uint64_t>(buf, seed);

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail_io(fmt::format("cannot open '{}' for writing", path));
  const size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
  if (std::fclose(f) != 0 || written != buf.size())
    fail_io(fmt::format("short write to '{}'", path));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string buf;
  {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) fail_io(fmt::format("cannot open '{}'", path));
    char chunk[1 << 16];
    size_t n;
    while ((n = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, n);
    std::fclose(f);
  }
  Reader r{buf};
  char magic[4];
  r.take(magic, 4, "magic");
  if (std::memcmp(magic, "OGSH", 4) != 0)
    fail_io(fmt::format("'{}' is not a checkpoint file", path));
  const auto version = r.pod<uint32_t>("version");
  if (version != 1) fail_io(fmt::format("unsupported checkpoint version {}", version));
  const auto cfg_len = r.pod<uint32_t>("config length");
  std::string cfg_text(cfg_len, '\0');
  r.take(cfg_text.data(), cfg_len, "config");

  Checkpoint ck;
  ck.net = make_network(parse_config_text(cfg_text));
  const auto count = r.pod<uint64_t>("weight count");
  if (count != static_cast<uint64_t>(ck.net.param_count()))
    fail_io(fmt::format("checkpoint holds {} weights but the config needs {}", count,
                        ck.net.param_count()));
  for (auto& t : ck.net.params)
    for (double& x : t.v) x = static_cast<double>(r.pod<float>("weights"));
  ck.epoch = r.pod<uint32_t>("epoch");
  ck.lr = r.pod<double>("learning rate");
  ck.seed = r.pod<uint64_t>("seed");
  if (r.pos != buf.size()) fail_io(fmt::format("'{}' has trailing bytes", path));
  return ck;
}

// --- loss, optimizer, schedule ---------------------------------------------

double bce_loss(const std::vector<double>& logits, const std::vector<double>& labels,
                std::vector<double>* grad) {
  if (logits.size() != labels.size() || logits.empty())
    fail_config("loss needs matching, nonempty logits and labels");
  const double n = static_cast<double>(logits.size());
  if (grad) grad->assign(logits.size(), 0.0);
  double loss = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double q = logits[i];
    loss += std::max(q, 0.0) - q * labels[i] + std::log1p(std::exp(-std::abs(q)));
    if (grad) (*grad)[i] = (sigmoid(q) - labels[i]) / n;
  }
  return loss / n;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps, double weight_decay) {
  if (grads.size() != params.size()) fail_config("optimizer gradients do not match parameters");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.rows, p.cols);
      state.v.emplace_back(p.rows, p.cols);
    }
  }
  if (state.m.size() != params.size()) fail_config("optimizer state does not match parameters");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || params[i].size() != state.m[i].size())
      fail_config("optimizer tensor shapes do not match");
    for (size_t k = 0; k < params[i].v.size(); ++k) {
      double& m = state.m[i].v[k];
      double& v = state.v[i].v[k];
      const double g = grads[i].v[k];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      double& p = params[i].v[k];
      p -= lr * ((m / bc1) / (std::sqrt(v / bc2) + eps) + weight_decay * p);
    }
  }
}

double cosine_lr(int step, int total_steps, double lr0, double lr_min) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    fail_config(fmt::format("schedule step {} outside [0, {}]", step, total_steps));
  const double c = std::cos(M_PI * static_cast<double>(step) / total_steps);
  return lr_min + (lr0 - lr_min) * 0.5 * (1.0 + c);
}

// --- training ----------------------------------------------------------------

TrainResult train(Network net, const std::vector<TrainNeighborhood>& data, const TrainConfig& tc,
                  const std::function<void(const EpochLog&, const Network&)>& on_epoch) {
  net.cfg.validate();
  if (data.empty()) fail_config("training dataset is empty");
  if (tc.batch_size < 1) fail_config("batch size must be at least 1");
  if (tc.epochs < 1 || tc.start_epoch < 0 || tc.start_epoch > tc.epochs)
    fail_config("epoch range is inconsistent");

  bool any_pos = false, any_neg = false;
  for (const auto& nb : data)
    for (const auto& s : nb.samples) (s.label > 0.5 ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) fail_config("training needs both grasp outcome classes");

  std::vector<int> train_ids, val_ids;
  for (size_t i = 0; i < data.size(); ++i) {
    if (tc.hold_out_val && scene_bucket(data[i].scene_id) == 0)
      val_ids.push_back(static_cast<int>(i));
    else
      train_ids.push_back(static_cast<int>(i));
  }
  if (train_ids.empty()) fail_config("validation split leaves no training neighborhoods");

  // harmonics of every sample direction, computed once
  const int width = sh_size(net.cfg.l_out);
  std::vector<Tensor> all_basis;
  all_basis.reserve(data.size());
  for (const auto& nb : data) {
    Tensor b(static_cast<int>(nb.samples.size()), width);
    for (size_t s = 0; s < nb.samples.size(); ++s) {
      const auto row = sh_basis(nb.samples[s].dir.normalized(), net.cfg.l_out);
      for (int j = 0; j < width; ++j) b.at(static_cast<int>(s), j) = row[j];
    }
    all_basis.push_back(std::move(b));
  }

  const int steps_per_epoch =
      (static_cast<int>(train_ids.size()) + tc.batch_size - 1) / tc.batch_size;
  const int total_steps = tc.epochs * steps_per_epoch;
  AdamState adam;
  int global_step = tc.start_epoch * steps_per_epoch;

  TrainResult result;
  for (int epoch = tc.start_epoch; epoch < tc.epochs; ++epoch) {
    std::vector<int> order = train_ids;
    {
      Rng rng(mix_seed(mix_seed(tc.seed, 0xe70c'5eedull), static_cast<uint64_t>(epoch)));
      for (size_t i = order.size(); i > 1; --i) {
        const size_t j = rng.uniform_int(i);
        std::swap(order[i - 1], order[j]);
      }
    }

    double loss_sum = 0.0;
    long loss_cnt = 0, train_hits = 0, train_total = 0;
    double epoch_lr = cosine_lr(std::min(global_step, total_steps), total_steps, tc.lr0,
                                tc.lr_min);
    for (size_t b0 = 0; b0 < order.size(); b0 += tc.batch_size) {
      const size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(tc.batch_size));
      std::vector<int> batch(order.begin() + static_cast<long>(b0),
                             order.begin() + static_cast<long>(b1));
      // gradients reduce in ascending neighborhood id order
      std::sort(batch.begin(), batch.end(),
                [&](int a, int c) { return data[a].id < data[c].id; });

      std::vector<Tensor> accum;
      for (const auto& p : net.params) accum.emplace_back(p.rows, p.cols);
      int contrib = 0;

      for (const int idx : batch) {
        const TrainNeighborhood& nb = data[idx];
        const auto sel = balanced_indices(nb, tc.seed, static_cast<uint64_t>(epoch));
        if (sel.empty()) continue;

        Tape tape;
        std::vector<int> pids;
        const int out = forward_on_tape(tape, net, nb.plan, &pids);
        std::vector<int> rows;
        Tensor basis(static_cast<int>(sel.size()), width);
        std::vector<double> labels;
        for (size_t s = 0; s < sel.size(); ++s) {
          rows.push_back(nb.samples[sel[s]].row);
          for (int j = 0; j < width; ++j)
            basis.at(static_cast<int>(s), j) = all_basis[idx].at(sel[s], j);
          labels.push_back(nb.samples[sel[s]].label);
        }
        const int logits = tape.row_dot(out, rows, basis);
        const int loss = tape.bce_mean(logits, labels);
        tape.backward(loss);

        loss_sum += tape.value(loss).v[0];
        ++loss_cnt;
        ++contrib;
        for (size_t p = 0; p < net.params.size(); ++p) {
          const Tensor& g = tape.grad(pids[p]);
          for (size_t k = 0; k < accum[p].v.size(); ++k) accum[p].v[k] += g.v[k];
        }
        const Tensor& lv = tape.value(logits);
        for (size_t s = 0; s < sel.size(); ++s) {
          train_hits += (lv.v[s] > 0.0) == (labels[s] > 0.5) ? 1 : 0;
          ++train_total;
        }
      }
      if (contrib == 0) continue;
      for (auto& t : accum)
        for (double& x : t.v) x /= contrib;
      epoch_lr = cosine_lr(std::min(global_step, total_steps), total_steps, tc.lr0, tc.lr_min);
      adam_step(net.params, accum, adam, epoch_lr, 0.9, 0.999, 1e-8, tc.weight_decay);
      ++global_step;
    }

    double val_acc = std::numeric_limits<double>::quiet_NaN();
    if (!val_ids.empty()) {
      long hits = 0, total = 0;
      for (const int idx : val_ids) {
        const TrainNeighborhood& nb = data[idx];
        const auto sel = balanced_indices(nb, mix_seed(tc.seed, 0x7a11'da7aull), 0);
        if (sel.empty()) continue;
        Tape tape;
        const int out = forward_on_tape(tape, net, nb.plan, nullptr);
        const Tensor& coeffs = tape.value(out);
        for (const int s : sel) {
          double q = 0.0;
          for (int j = 0; j < width; ++j)
            q += coeffs.at(nb.samples[s].row, j) * all_basis[idx].at(s, j);
          hits += (q > 0.0) == (nb.samples[s].label > 0.5) ? 1 : 0;
          ++total;
        }
      }
      if (total > 0) val_acc = static_cast<double>(hits) / total;
    }

    EpochLog el;
    el.epoch = epoch;
    el.lr = epoch_lr;
    el.train_loss = loss_cnt ? loss_sum / loss_cnt : 0.0;
    el.train_accuracy = train_total ? static_cast<double>(train_hits) / train_total : 0.0;
    el.val_accuracy = val_acc;
    result.log.push_back(el);
    if (on_epoch) on_epoch(el, net);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace equigrasp
