#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "equigrasp/cloud.hpp"
#include "equigrasp/so3.hpp"

namespace equigrasp {

// Two-finger grasp at a contact point. The rotation columns are
// [r1, n, r3]: n the contact normal (closing direction), r3 the approach,
// r1 = n x r3 completing a right-handed frame (det +1, n perpendicular
// to r3).
struct GraspPose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // gripper center
  double quality = 0.0;                                   // in [0, 1]
  int point_index = -1;
  bool executable = true;

  Eigen::Vector3d closing_dir() const { return rotation.mat.col(1); }
  Eigen::Vector3d approach_dir() const { return rotation.mat.col(2); }
};

// Parallel-jaw geometry. Lengths in meters, all positive.
struct GripperSpec {
  double max_opening = 0.08;
  double finger_depth = 0.04;      // pad extent along the approach axis
  double finger_thickness = 0.01;  // pad extent along r1
  double palm_clearance = 0.02;    // palm standoff behind the fingers
  void validate() const;
};

// K orientations whose approach directions r3 sweep the tangent circle of
// n_p at exactly 2*pi/K spacing. Deterministic phase: r3[0] is the unit
// projection of x-hat onto the tangent plane, or of y-hat when n_p is
// within ~8 degrees of x-hat. The frames depend only on the normal; p is
// carried alongside the contact it belongs to.
std::vector<Rotation> orbit_frames(const Eigen::Vector3d& p, const Direction& n_p, int K);

struct OrbitEval {
  Rotation rotation;
  double quality = 0.0;
};

// Quality of each orbit orientation: sigmoid of the field coefficients at
// point_index evaluated along the approach direction. The field is a logit
// field; the sigmoid maps it onto [0, 1].
std::vector<OrbitEval> evaluate_orbit(const FourierField& field, int point_index,
                                      const Direction& n_p, int K);

// Re-centers the grasp along the closing direction: finds the farthest
// opposing-surface point inside the closing corridor (normals facing the
// contact, lateral offset within the pad footprint, depth at most the
// opening) and places the gripper center midway across that width. With no
// opposing surface in reach the pose comes back flagged un-executable.
// pose.translation must be the contact point.
GraspPose finger_offset(const GraspPose& pose, const PointCloud& cloud,
                        const GripperSpec& gripper);

// Executable candidates at or above the quality threshold, restricted to
// those within `band` meters below the highest gripper-center z; of those
// the highest quality wins, ties by higher z then lower point index. Empty
// survivor set yields nothing.
std::optional<GraspPose> select_grasp(const std::vector<GraspPose>& candidates,
                                      double threshold = 0.95, double band = 0.03);

// ASCII records, one grasp per line: point index, quality, rotation
// row-major, translation. Numbers formatted for exact round-trip.
void write_grasps(const std::string& path, const std::vector<GraspPose>& grasps);
std::vector<GraspPose> read_grasps(const std::string& path);

}  // namespace equigrasp
