#pragma once

#include <Eigen/Dense>
#include <optional>

#include "equigrasp/so3.hpp"

namespace equigrasp {

// Convex solid in a rigid pose. Body frames: the box is centered at the
// origin with per-axis half extents in dims; the cylinder axis runs along
// body z with dims = (radius, half_height, 0); the sphere has dims =
// (radius, 0, 0).
struct Primitive {
  enum class Kind { box, cylinder, sphere };
  Kind kind = Kind::box;
  Eigen::Vector3d dims = Eigen::Vector3d::Zero();
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int id = 0;  // object id; 0 names the table
};

// Constructors reject non-positive dimensions.
Primitive make_box(const Eigen::Vector3d& half_extents, const Rotation& rot,
                   const Eigen::Vector3d& pos, int id);
Primitive make_cylinder(double radius, double half_height, const Rotation& rot,
                        const Eigen::Vector3d& pos, int id);
Primitive make_sphere(double radius, const Eigen::Vector3d& pos, int id);

// Farthest point of the solid along dir (world frame; dir need not be unit).
Eigen::Vector3d support_point(const Primitive& prim, const Eigen::Vector3d& dir);

// Exact signed distance, negative inside.
double signed_distance(const Primitive& prim, const Eigen::Vector3d& p);

// Entry and exit of the infinite line origin + t * dir through the solid,
// with outward unit normals at both crossings; nullopt on a miss. dir must
// be unit so t is metric.
struct LineCrossing {
  double t0 = 0.0, t1 = 0.0;  // t0 <= t1
  Eigen::Vector3d n0 = Eigen::Vector3d::Zero(), n1 = Eigen::Vector3d::Zero();
};
std::optional<LineCrossing> line_crossing(const Primitive& prim, const Eigen::Vector3d& origin,
                                          const Eigen::Vector3d& dir);

// Nearest surface point along the ray with t > 1e-9: the entry when the
// origin is outside, the exit when it is inside; nullopt on a miss.
struct RayHit {
  double t = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
};
std::optional<RayHit> ray_hit(const Primitive& prim, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& dir);

// True when the solids share at least one point (boolean GJK over the
// support functions; touching counts as intersecting).
bool intersects(const Primitive& a, const Primitive& b);

// Same solid with every cross-section dimension changed by delta: grown for
// delta > 0, shrunk for delta < 0. Dimensions clamp at 1e-6, so a shrunk
// solid never inverts. Shrinking both operands by m/2 before intersects()
// tests for interpenetration deeper than m.
Primitive inflate(const Primitive& prim, double delta);

// Radius of the circumscribed sphere about the body origin; bounds the solid
// under any rotation.
double bounding_radius(const Primitive& prim);

}  // namespace equigrasp
