#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

namespace equigrasp {

struct PointCloud {
  std::vector<Eigen::Vector3d> positions;  // meters
  std::vector<Eigen::Vector3d> normals;    // empty, or unit and count-aligned
  std::vector<int> labels;                 // empty, or per-point object id
  std::vector<int> views;                  // empty, or capturing-camera index per point

  int size() const { return static_cast<int>(positions.size()); }
  bool has_normals() const { return !normals.empty(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_views() const { return !views.empty(); }
};

// Context set B_i (the m nearest neighbors of the center) with the inner
// query set within radius r_l; model outputs are trusted only on the query set.
struct Neighborhood {
  Eigen::Vector3d center;
  int center_index = -1;           // index into the parent cloud
  std::vector<int> context_indices;  // ascending (distance, index)
  std::vector<int> query_indices;    // ascending index; subset of context
  double r_l = 0.0;
  int m = 0;  // actual context size (raised above the requested m when needed)
};

// One centroid per occupied voxel; normals are averaged and renormalized,
// labels and view ids take the majority (ties to the lowest id). When a target
// count range is given the voxel size is bisected (at most 20 refinements)
// until the output count lands in range; closest effort wins otherwise.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel,
                            std::optional<std::pair<int, int>> target = std::nullopt);

struct NormalsResult {
  PointCloud cloud;                // input with normals replaced
  std::vector<int> degenerate;     // indices whose k-NN patch had zero covariance
};
// PCA normal over the k-NN patch, sign-flipped so (viewpoint - p) . n >= 0.
NormalsResult estimate_normals(const PointCloud& cloud, int k, const Eigen::Vector3d& viewpoint);
// Same, with a per-point viewpoint (fused multi-camera clouds).
NormalsResult estimate_normals(const PointCloud& cloud, int k,
                               const std::vector<Eigen::Vector3d>& viewpoints);

// Greedy max-min selection. Seed = the point nearest the centroid; all ties
// break to the lowest index; returns indices in selection order.
std::vector<int> farthest_point_sampling(const std::vector<Eigen::Vector3d>& positions, int k);
std::vector<int> farthest_point_sampling(const PointCloud& cloud, int k);

// k nearest indices by Euclidean distance, ascending; ties to the lowest index.
std::vector<int> knn(const std::vector<Eigen::Vector3d>& positions, const Eigen::Vector3d& query,
                     int k);
std::vector<int> knn(const PointCloud& cloud, const Eigen::Vector3d& query, int k);

// All indices within distance r of center, ascending index order.
std::vector<int> ball_query(const PointCloud& cloud, const Eigen::Vector3d& center, double r);

// One Neighborhood per center index; context = m nearest neighbors of the
// center, query = ball members. If the ball is not covered by the m nearest,
// m is raised for that neighborhood and the event is logged to stderr.
std::vector<Neighborhood> build_neighborhoods(const PointCloud& cloud,
                                              const std::vector<int>& centers, double r_l, int m);

}  // namespace equigrasp
