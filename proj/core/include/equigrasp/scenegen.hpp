#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "equigrasp/cloud.hpp"
#include "equigrasp/orbit.hpp"
#include "equigrasp/shapes.hpp"
#include "equigrasp/so3.hpp"

namespace equigrasp {

// Everything the renderer will show of the table: a disk of this radius at
// z = 0 around the workspace center.
inline constexpr double kTableRadius = 0.45;

// Recipe for one random scene. Dimensions are drawn uniformly from the
// given ranges; the workspace is a cube of edge `workspace` resting on the
// table plane z = 0.
struct SceneSpec {
  enum class Mode { pile, packed };
  Mode mode = Mode::pile;
  int object_count = 5;
  double box_half_lo = 0.015, box_half_hi = 0.035;        // per-axis half extents
  double cyl_radius_lo = 0.015, cyl_radius_hi = 0.03;
  double cyl_half_lo = 0.02, cyl_half_hi = 0.045;         // half height
  double sphere_radius_lo = 0.02, sphere_radius_hi = 0.035;
  double workspace = 0.30;
  uint64_t seed = 1;
  void validate() const;
};

// Placed solids above the table plane z = 0. Object ids run 1..n in
// placement order; id 0 names the table and is never in the list.
struct Scene {
  std::vector<Primitive> objects;
  double workspace = 0.30;
};

// Pinhole depth camera. rotation and translation map camera coordinates to
// world; the optical axis is +z, +x right, +y down. Rays pass through
// integer pixel coordinates, so cx = width / 2 puts pixel (width / 2, cy)
// exactly on the axis.
struct CameraSpec {
  double fx = 320.0, fy = 320.0, cx = 160.0, cy = 120.0;
  int width = 320, height = 240;
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double noise_sigma = 0.001;  // meters, along the ray
  void validate() const;
};

// Camera at eye aimed at target with world down projected onto image +y.
CameraSpec look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

// n cameras evenly spaced in azimuth on a circle, all aimed at the target.
std::vector<CameraSpec> camera_ring(int n, double radius = 0.42, double height = 0.42,
                                    const Eigen::Vector3d& target = {0.0, 0.0, 0.05});

// One labeled grasp candidate: bit j of labels holds the oracle verdict for
// orbit frame j at this point.
struct GraspRecord {
  uint32_t scene_id = 0;
  uint16_t object_id = 0;
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  Eigen::Vector3f normal = Eigen::Vector3f::Zero();
  uint64_t labels = 0;
};

struct LabeledGraspSet {
  int orbit_size = 36;  // K; labels use exactly the K low bits
  std::vector<GraspRecord> records;
};

// Draws primitives and places them deterministically in spec.seed. packed
// keeps objects upright at random yaw; pile drops fully random orientations
// with a quasi-static settle (lowest non-penetrating height, then one greedy
// rotation onto a stable face for boxes and cylinders, then a re-drop).
Scene spawn_scene(const SceneSpec& spec);

// Per-pixel analytic raycast. The nearest hit becomes one point labeled with
// the owning object id (table hits get id 0) and Gaussian noise is added
// along the ray; noise_seed fixes the stream. Rows scan top to bottom.
PointCloud render_depth(const Scene& scene, const CameraSpec& camera, uint64_t noise_seed = 0);

// Index of the point nearest each object's label centroid, ascending by id.
// The table (id 0) gets no center.
std::vector<int> mask_centers(const PointCloud& cloud);

// Renders every camera with per-view noise streams, fuses by concatenation,
// downsamples into the target point band, and estimates camera-oriented
// normals. views keeps the raw renders for archiving.
struct FusedScene {
  PointCloud cloud;
  std::vector<PointCloud> views;
};
FusedScene fuse_views(const Scene& scene, const std::vector<CameraSpec>& cameras, uint64_t seed);

struct OracleVerdict {
  bool success = false;
  enum class Reason {
    success,
    no_contact,        // the closing line crosses no object
    exceeds_opening,   // surfaces wider apart than the jaws allow
    too_thin,          // under 5 mm between the contact faces
    friction,          // a contact normal falls outside the friction cone
    collision          // a finger sweep or the palm hits a non-target or the table
  } reason = Reason::no_contact;
  double width = 0.0;  // surface separation along the closing line
  int target_id = 0;   // object the fingers close on; 0 when none
};
const char* to_string(OracleVerdict::Reason reason);

// Analytic antipodal grasp trial: the fingers close along the pose's closing
// direction onto whichever object the closing line crosses nearest the
// gripper center, and the swept finger volumes plus the palm slab must stay
// clear of everything else and the table.
OracleVerdict grasp_oracle(const Scene& scene, const GraspPose& pose, const GripperSpec& gripper,
                           double mu = 0.6);

// For each scene: render and fuse all cameras, estimate normals, pick up to
// points_per_object candidates uniformly from each object's labeled points,
// and label all orbit_size closing frames per candidate with grasp_oracle.
// Scene ids are positions in specs. When ply_dir is non-empty each raw view
// is archived as ASCII PLY scene####_view#.ply under it.
LabeledGraspSet generate_dataset(const std::vector<SceneSpec>& specs,
                                 const std::vector<CameraSpec>& cameras,
                                 const GripperSpec& gripper, int points_per_object = 64,
                                 int orbit_size = 36, const std::string& ply_dir = "");

// (positive, negative) label counts over all records.
std::pair<long, long> label_counts(const LabeledGraspSet& set);

// Binary dataset file: magic "OGDS", then version, orbit size, and record
// count, then fixed-width little-endian records.
void save_grasp_set(const std::string& path, const LabeledGraspSet& set);
LabeledGraspSet load_grasp_set(const std::string& path);

}  // namespace equigrasp
