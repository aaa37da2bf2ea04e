#include "equigrasp/cloud.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>

#include "equigrasp/error.hpp"

namespace equigrasp {

namespace {

int majority(const std::map<int, int>& votes) {
  int best = 0, best_count = -1;
  for (const auto& [id, c] : votes)
    if (c > best_count) {
      best = id;
      best_count = c;
    }
  return best;  // std::map iterates ascending, so ties land on the lowest id
}

PointCloud voxel_pass(const PointCloud& cloud, double voxel) {
  // 21 signed bits per axis packed into one sortable key.
  constexpr int64_t kOffset = int64_t(1) << 20;
  std::vector<std::pair<int64_t, int>> keyed(cloud.size());
  for (int i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.positions[i];
    const int64_t ix = static_cast<int64_t>(std::floor(p.x() / voxel)) + kOffset;
    const int64_t iy = static_cast<int64_t>(std::floor(p.y() / voxel)) + kOffset;
    const int64_t iz = static_cast<int64_t>(std::floor(p.z() / voxel)) + kOffset;
    keyed[i] = {(ix << 42) | (iy << 21) | iz, i};
  }
  std::sort(keyed.begin(), keyed.end());

  PointCloud out;
  for (size_t lo = 0; lo < keyed.size();) {
    size_t hi = lo;
    while (hi < keyed.size() && keyed[hi].first == keyed[lo].first) ++hi;

    Eigen::Vector3d pos_sum = Eigen::Vector3d::Zero(), normal_sum = Eigen::Vector3d::Zero();
    std::map<int, int> label_votes, view_votes;
    for (size_t j = lo; j < hi; ++j) {
      const int i = keyed[j].second;
      pos_sum += cloud.positions[i];
      if (cloud.has_normals()) normal_sum += cloud.normals[i];
      if (cloud.has_labels()) label_votes[cloud.labels[i]] += 1;
      if (cloud.has_views()) view_votes[cloud.views[i]] += 1;
    }
    const double count = static_cast<double>(hi - lo);
    out.positions.push_back(pos_sum / count);
    if (cloud.has_normals()) {
      const double len = normal_sum.norm();
      out.normals.push_back(len > 1e-12 ? Eigen::Vector3d(normal_sum / len)
                                        : Eigen::Vector3d(0, 0, 1));
    }
    if (cloud.has_labels()) out.labels.push_back(majority(label_votes));
    if (cloud.has_views()) out.views.push_back(majority(view_votes));
    lo = hi;
  }
  return out;
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel,
                            std::optional<std::pair<int, int>> target) {
  if (cloud.size() == 0) fail_numeric("voxel_downsample: empty cloud");
  if (!(voxel > 0.0)) fail_config("voxel_downsample: voxel size must be positive");
  if (!target) return voxel_pass(cloud, voxel);

  const auto [lo_count, hi_count] = *target;
  if (lo_count > hi_count || lo_count < 1)
    fail_config("voxel_downsample: invalid target count range");

  // Count is monotone non-increasing in voxel size; bracket then bisect.
  double v_small = voxel, v_big = voxel;
  PointCloud best = voxel_pass(cloud, voxel);
  auto in_range = [&](int n) { return n >= lo_count && n <= hi_count; };
  auto closer = [&](int n, int ref) {
    const int dn = n < lo_count ? lo_count - n : (n > hi_count ? n - hi_count : 0);
    const int dr = ref < lo_count ? lo_count - ref : (ref > hi_count ? ref - hi_count : 0);
    return dn < dr;
  };
  if (in_range(best.size())) return best;

  for (int i = 0; i < 8 && voxel_pass(cloud, v_small).size() < hi_count; ++i) v_small *= 0.5;
  for (int i = 0; i < 8 && voxel_pass(cloud, v_big).size() > lo_count; ++i) v_big *= 2.0;

  for (int it = 0; it < 20; ++it) {
    const double v = std::sqrt(v_small * v_big);
    PointCloud cand = voxel_pass(cloud, v);
    const int n = cand.size();
    if (in_range(n)) return cand;
    if (closer(n, best.size())) best = std::move(cand);
    if (n > hi_count)
      v_small = v;
    else
      v_big = v;
  }
  return best;
}

namespace {

std::vector<std::pair<double, int>> sorted_dist_index(const std::vector<Eigen::Vector3d>& pts,
                                                      const Eigen::Vector3d& query) {
  std::vector<std::pair<double, int>> d(pts.size());
  for (size_t i = 0; i < pts.size(); ++i)
    d[i] = {(pts[i] - query).squaredNorm(), static_cast<int>(i)};
  return d;
}

NormalsResult estimate_normals_impl(const PointCloud& cloud, int k,
                                    auto&& viewpoint_of) {
  if (k < 3) fail_config("estimate_normals: k must be >= 3");
  if (cloud.size() < k)
    fail_numeric(fmt::format("estimate_normals: cloud has {} points, k = {}", cloud.size(), k));

  NormalsResult res;
  res.cloud = cloud;
  res.cloud.normals.assign(cloud.size(), Eigen::Vector3d(0, 0, 1));

  std::vector<std::pair<double, int>> dist(cloud.size());
  for (int i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.positions[i];
    for (int j = 0; j < cloud.size(); ++j)
      dist[j] = {(cloud.positions[j] - p).squaredNorm(), j};
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + k);

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j = 0; j < k; ++j) mean += cloud.positions[dist[j].second];
    mean /= k;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j = 0; j < k; ++j) {
      const Eigen::Vector3d d = cloud.positions[dist[j].second] - mean;
      cov += d * d.transpose();
    }

    const Eigen::Vector3d to_view = viewpoint_of(i) - p;
    Eigen::Vector3d n;
    if (cov.cwiseAbs().maxCoeff() < 1e-18) {
      const double len = to_view.norm();
      n = len > 1e-12 ? Eigen::Vector3d(to_view / len) : Eigen::Vector3d(0, 0, 1);
      res.degenerate.push_back(i);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
      n = eig.eigenvectors().col(0);  // least eigenvector
      if (to_view.dot(n) < 0.0) n = -n;
    }
    res.cloud.normals[i] = n;
  }
  return res;
}

}  // namespace

NormalsResult estimate_normals(const PointCloud& cloud, int k, const Eigen::Vector3d& viewpoint) {
  return estimate_normals_impl(cloud, k, [&](int) { return viewpoint; });
}

NormalsResult estimate_normals(const PointCloud& cloud, int k,
                               const std::vector<Eigen::Vector3d>& viewpoints) {
  if (static_cast<int>(viewpoints.size()) != cloud.size())
    fail_config("estimate_normals: viewpoints not count-aligned with positions");
  return estimate_normals_impl(cloud, k, [&](int i) { return viewpoints[i]; });
}

std::vector<int> farthest_point_sampling(const std::vector<Eigen::Vector3d>& positions, int k) {
  const int n = static_cast<int>(positions.size());
  if (k < 1 || k > n)
    fail_config(fmt::format("farthest_point_sampling: k = {} outside [1, {}]", k, n));

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : positions) centroid += p;
  centroid /= n;

  int seed = 0;
  double best = (positions[0] - centroid).squaredNorm();
  for (int i = 1; i < n; ++i) {
    const double d = (positions[i] - centroid).squaredNorm();
    if (d < best) {
      best = d;
      seed = i;
    }
  }

  std::vector<int> picked{seed};
  std::vector<double> min_dist(n);
  for (int i = 0; i < n; ++i) min_dist[i] = (positions[i] - positions[seed]).squaredNorm();
  while (static_cast<int>(picked.size()) < k) {
    int next = 0;
    double far = -1.0;
    for (int i = 0; i < n; ++i)
      if (min_dist[i] > far) {
        far = min_dist[i];
        next = i;
      }
    picked.push_back(next);
    for (int i = 0; i < n; ++i)
      min_dist[i] = std::min(min_dist[i], (positions[i] - positions[next]).squaredNorm());
  }
  return picked;
}

std::vector<int> farthest_point_sampling(const PointCloud& cloud, int k) {
  return farthest_point_sampling(cloud.positions, k);
}

std::vector<int> knn(const std::vector<Eigen::Vector3d>& positions, const Eigen::Vector3d& query,
                     int k) {
  const int n = static_cast<int>(positions.size());
  if (k > n) fail_config(fmt::format("knn: k = {} exceeds cloud size {}", k, n));
  auto d = sorted_dist_index(positions, query);
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = d[i].second;
  return idx;
}

std::vector<int> knn(const PointCloud& cloud, const Eigen::Vector3d& query, int k) {
  return knn(cloud.positions, query, k);
}

std::vector<int> ball_query(const PointCloud& cloud, const Eigen::Vector3d& center, double r) {
  if (!(r > 0.0)) fail_config("ball_query: radius must be positive");
  std::vector<int> out;
  const double r2 = r * r;
  for (int i = 0; i < cloud.size(); ++i)
    if ((cloud.positions[i] - center).squaredNorm() <= r2) out.push_back(i);
  return out;
}

std::vector<Neighborhood> build_neighborhoods(const PointCloud& cloud,
                                              const std::vector<int>& centers, double r_l,
                                              int m) {
  if (centers.empty()) fail_config("build_neighborhoods: no centers given");
  if (!(r_l > 0.0) || m < 1) fail_config("build_neighborhoods: need r_l > 0 and m >= 1");

  std::vector<Neighborhood> out;
  out.reserve(centers.size());
  for (const int ci : centers) {
    if (ci < 0 || ci >= cloud.size()) fail_config("build_neighborhoods: center index out of range");
    const Eigen::Vector3d c = cloud.positions[ci];
    auto d = sorted_dist_index(cloud.positions, c);
    std::sort(d.begin(), d.end());

    const double r2 = r_l * r_l;
    int ball_rank = 0;  // how deep into the NN ordering the ball reaches
    for (int i = 0; i < cloud.size(); ++i)
      if (d[i].first <= r2) ball_rank = i + 1;

    int m_eff = std::min(std::max(m, ball_rank), cloud.size());
    if (ball_rank > m)
      fmt::print(stderr, "build_neighborhoods: context raised from {} to {} at center {}\n", m,
                 m_eff, ci);

    Neighborhood nb;
    nb.center = c;
    nb.center_index = ci;
    nb.r_l = r_l;
    nb.m = m_eff;
    nb.context_indices.reserve(m_eff);
    for (int i = 0; i < m_eff; ++i) nb.context_indices.push_back(d[i].second);
    for (int i = 0; i < m_eff; ++i)
      if (d[i].first <= r2) nb.query_indices.push_back(d[i].second);
    std::sort(nb.query_indices.begin(), nb.query_indices.end());
    out.push_back(std::move(nb));
  }
  return out;
}

}  // namespace equigrasp
