#include "equigrasp/orbit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "equigrasp/error.hpp"

namespace equigrasp {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void GripperSpec::validate() const {
  if (!(max_opening > 0.0) || !(finger_depth > 0.0) || !(finger_thickness > 0.0) ||
      !(palm_clearance > 0.0))
    fail_config("gripper dimensions must all be positive");
}

std::vector<Rotation> orbit_frames(const Eigen::Vector3d& p, const Direction& n_p, int K) {
  (void)p;
  if (K < 1) fail_config(fmt::format("orbit needs at least one orientation, got {}", K));
  const Eigen::Vector3d n = n_p.u;

  Eigen::Vector3d anchor = Eigen::Vector3d::UnitX();
  if (std::abs(anchor.dot(n)) > 0.99) anchor = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = (anchor - anchor.dot(n) * n).normalized();
  const Eigen::Vector3d e2 = n.cross(e1);

  std::vector<Rotation> frames;
  frames.reserve(K);
  for (int j = 0; j < K; ++j) {
    const double a = 2.0 * M_PI * j / K;
    const Eigen::Vector3d r3 = std::cos(a) * e1 + std::sin(a) * e2;
    frames.push_back(Rotation::from_columns(n.cross(r3), n, r3));
  }
  return frames;
}

std::vector<OrbitEval> evaluate_orbit(const FourierField& field, int point_index,
                                      const Direction& n_p, int K) {
  if (point_index < 0 || point_index >= static_cast<int>(field.coeffs.size()))
    fail_config(fmt::format("orbit point {} outside the field of {}", point_index,
                            field.coeffs.size()));
  const FourierCoeffs& c = field.coeffs[point_index];
  std::vector<OrbitEval> out;
  for (const Rotation& r : orbit_frames(Eigen::Vector3d::Zero(), n_p, K))
    out.push_back({r, sigmoid(eval_signal(c, r.mat.col(2)))});
  return out;
}

GraspPose finger_offset(const GraspPose& pose, const PointCloud& cloud,
                        const GripperSpec& gripper) {
  gripper.validate();
  if (!cloud.has_normals()) fail_config("finger offset needs surface normals");
  const Eigen::Vector3d n = pose.closing_dir();
  const Eigen::Vector3d r3 = pose.approach_dir();
  const Eigen::Vector3d r1 = pose.rotation.mat.col(0);
  const Eigen::Vector3d& contact = pose.translation;

  // farthest point whose surface faces the contact, inside the corridor the
  // pads sweep while closing
  double width = -1.0;
  for (int i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d d = cloud.positions[i] - contact;
    const double depth = -d.dot(n);  // the object interior lies along -n
    if (depth <= 0.0 || depth > gripper.max_opening) continue;
    if (std::abs(d.dot(r3)) > gripper.finger_depth / 2) continue;
    if (std::abs(d.dot(r1)) > gripper.finger_thickness / 2) continue;
    if (cloud.normals[i].dot(n) > -0.2) continue;
    width = std::max(width, depth);
  }

  GraspPose out = pose;
  if (width < 0.0) {
    out.executable = false;
    return out;
  }
  out.translation = contact - (width / 2) * n;
  out.executable = true;
  return out;
}

std::optional<GraspPose> select_grasp(const std::vector<GraspPose>& candidates, double threshold,
                                      double band) {
  double z_top = 0.0;
  bool any = false;
  for (const GraspPose& g : candidates) {
    if (!g.executable || g.quality < threshold) continue;
    z_top = any ? std::max(z_top, g.translation.z()) : g.translation.z();
    any = true;
  }
  if (!any) return std::nullopt;

  const GraspPose* best = nullptr;
  for (const GraspPose& g : candidates) {
    if (!g.executable || g.quality < threshold) continue;
    if (g.translation.z() < z_top - band) continue;
    if (!best || g.quality > best->quality ||
        (g.quality == best->quality && (g.translation.z() > best->translation.z() ||
                                        (g.translation.z() == best->translation.z() &&
                                         g.point_index < best->point_index))))
      best = &g;
  }
  return *best;
}

void write_grasps(const std::string& path, const std::vector<GraspPose>& grasps) {
  std::ofstream f(path);
  if (!f.good()) fail_io(fmt::format("cannot open '{}' for writing", path));
  for (const GraspPose& g : grasps) {
    f << fmt::format("{} {}", g.point_index, g.quality);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f << fmt::format(" {}", g.rotation.mat(r, c));
    for (int c = 0; c < 3; ++c) f << fmt::format(" {}", g.translation(c));
    f << '\n';
  }
  if (!f.good()) fail_io(fmt::format("short write to '{}'", path));
}

std::vector<GraspPose> read_grasps(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) fail_io(fmt::format("cannot open '{}'", path));
  std::vector<GraspPose> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    GraspPose g;
    Eigen::Matrix3d m;
    ss >> g.point_index >> g.quality;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) ss >> m(r, c);
    for (int c = 0; c < 3; ++c) ss >> g.translation(c);
    if (!ss) fail_io(fmt::format("malformed grasp record at {}:{}", path, lineno));
    std::string extra;
    if (ss >> extra) fail_io(fmt::format("trailing fields at {}:{}", path, lineno));
    g.rotation = Rotation::from_matrix(m);
    out.push_back(g);
  }
  return out;
}

}  // namespace equigrasp
