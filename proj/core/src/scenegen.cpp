#include "equigrasp/scenegen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "equigrasp/error.hpp"
#include "equigrasp/ply.hpp"
#include "equigrasp/rng.hpp"

namespace equigrasp {

static_assert(std::endian::native == std::endian::little,
              "dataset files are written in host order and specified little-endian");

namespace {

constexpr double kPlacementGap = 5e-4;   // clearance enforced between placed solids
constexpr double kSettleStep = 0.005;    // coarse descent step of the quasi-static drop
constexpr double kFuseVoxel = 0.004;     // starting voxel for multi-view fusion
constexpr int kFusedLo = 4000, kFusedHi = 6000;
constexpr int kNormalsK = 16;

// Height of the body origin when the solid rests on the table in its
// current orientation.
double rest_height(const Primitive& prim) {
  Primitive p = prim;
  p.translation.setZero();
  return -support_point(p, {0.0, 0.0, -1.0}).z();
}

double top_height(const Primitive& prim) { return support_point(prim, {0.0, 0.0, 1.0}).z(); }

// Smallest-angle rotation taking unit vector `from` to unit vector `to`.
Rotation align_to(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  const Eigen::Vector3d axis = from.cross(to);
  const double s = axis.norm(), c = from.dot(to);
  if (s < 1e-12) {
    if (c > 0.0) return Rotation::identity();
    return Rotation::from_axis_angle(from.unitOrthogonal(), M_PI);
  }
  return Rotation::from_axis_angle(axis / s, std::atan2(s, c));
}

// One greedy rotation onto the nearest stable contact: boxes align their
// most downward face normal to -z, cylinders either stand up or lie flat,
// spheres are left alone.
void snap_to_stable(Primitive& prim) {
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  if (prim.kind == Primitive::Kind::box) {
    Eigen::Vector3d best = -prim.rotation.mat.col(0);
    for (int i = 0; i < 3; ++i)
      for (double s : {-1.0, 1.0}) {
        const Eigen::Vector3d n = s * prim.rotation.mat.col(i);
        if (n.dot(down) > best.dot(down)) best = n;
      }
    prim.rotation = align_to(best, down) * prim.rotation;
  } else if (prim.kind == Primitive::Kind::cylinder) {
    const Eigen::Vector3d axis = prim.rotation.mat.col(2);
    const double c = axis.z();
    Eigen::Vector3d target;
    if (std::abs(c) >= std::cos(M_PI / 4.0)) {
      target = {0.0, 0.0, c >= 0.0 ? 1.0 : -1.0};
    } else {
      target = Eigen::Vector3d(axis.x(), axis.y(), 0.0).normalized();
    }
    prim.rotation = align_to(axis, target) * prim.rotation;
  }
}

// Lowest non-penetrating height of the body origin when the solid descends
// vertically at fixed (x, y, rotation). For convex solids the penetrating
// heights against each obstacle form an interval, so a coarse descent
// followed by bisection finds its top.
double settle_z(Primitive prim, const std::vector<Primitive>& placed, double workspace) {
  const double z_rest = rest_height(prim);
  const double z_hi = z_rest + workspace + 0.01;  // lowest point starts above every obstacle
  double z = z_rest;
  for (const Primitive& obs : placed) {
    double z_clear = z_hi;
    double z_pen = std::numeric_limits<double>::quiet_NaN();
    bool found = false;
    for (double s = z_hi - kSettleStep;; s -= kSettleStep) {
      const double zz = std::max(s, z_rest);
      prim.translation.z() = zz;
      if (intersects(prim, obs)) {
        z_pen = zz;
        found = true;
        break;
      }
      z_clear = zz;
      if (zz <= z_rest) break;
    }
    if (!found) continue;
    for (int it = 0; it < 60 && z_clear - z_pen > 1e-7; ++it) {
      const double mid = 0.5 * (z_clear + z_pen);
      prim.translation.z() = mid;
      (intersects(prim, obs) ? z_pen : z_clear) = mid;
    }
    z = std::max(z, z_clear);
  }
  return z;
}

Primitive sample_primitive(const SceneSpec& spec, Rng& rng, int id) {
  switch (rng.uniform_int(3)) {
    case 0:
      return make_box({rng.uniform(spec.box_half_lo, spec.box_half_hi),
                       rng.uniform(spec.box_half_lo, spec.box_half_hi),
                       rng.uniform(spec.box_half_lo, spec.box_half_hi)},
                      Rotation::identity(), Eigen::Vector3d::Zero(), id);
    case 1:
      return make_cylinder(rng.uniform(spec.cyl_radius_lo, spec.cyl_radius_hi),
                           rng.uniform(spec.cyl_half_lo, spec.cyl_half_hi), Rotation::identity(),
                           Eigen::Vector3d::Zero(), id);
    default:
      return make_sphere(rng.uniform(spec.sphere_radius_lo, spec.sphere_radius_hi),
                         Eigen::Vector3d::Zero(), id);
  }
}

}  // namespace

void SceneSpec::validate() const {
  const auto range = [](const char* name, double lo, double hi) {
    if (!(lo > 0.0) || hi < lo)
      fail_config(fmt::format("{} range must satisfy 0 < lo <= hi, got [{}, {}]", name, lo, hi));
  };
  range("box half extent", box_half_lo, box_half_hi);
  range("cylinder radius", cyl_radius_lo, cyl_radius_hi);
  range("cylinder half height", cyl_half_lo, cyl_half_hi);
  range("sphere radius", sphere_radius_lo, sphere_radius_hi);
  if (object_count < 1) fail_config(fmt::format("object count must be positive, got {}", object_count));
  if (!(workspace > 0.0)) fail_config(fmt::format("workspace edge must be positive, got {}", workspace));
  const double rho = std::max({std::sqrt(3.0) * box_half_hi,
                               std::hypot(cyl_radius_hi, cyl_half_hi), sphere_radius_hi});
  if (rho >= 0.5 * workspace)
    fail_config(fmt::format(
        "largest primitive (circumscribed radius {}) cannot fit a workspace of edge {}", rho,
        workspace));
}

void CameraSpec::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !(cx > 0.0) || !(cy > 0.0))
    fail_config("camera intrinsics must be positive");
  if (width < 1 || height < 1)
    fail_config(fmt::format("camera needs a positive pixel grid, got {}x{}", width, height));
  if (noise_sigma < 0.0)
    fail_config(fmt::format("noise sigma must be non-negative, got {}", noise_sigma));
}

CameraSpec look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  Eigen::Vector3d f = target - eye;
  if (f.norm() < 1e-9) fail_config("camera eye and target coincide");
  f.normalize();
  // world down projected onto the image plane becomes image +y
  Eigen::Vector3d down = Eigen::Vector3d(0.0, 0.0, -1.0) + f.z() * f;
  if (down.norm() < 1e-9) down = Eigen::Vector3d::UnitY();  // straight up or down
  down.normalize();
  CameraSpec cam;
  cam.rotation = Rotation::from_columns(down.cross(f), down, f);
  cam.translation = eye;
  return cam;
}

std::vector<CameraSpec> camera_ring(int n, double radius, double height,
                                    const Eigen::Vector3d& target) {
  if (n < 1) fail_config(fmt::format("camera ring needs at least one camera, got {}", n));
  if (!(radius > 0.0)) fail_config(fmt::format("camera ring radius must be positive, got {}", radius));
  std::vector<CameraSpec> cams;
  cams.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double az = 2.0 * M_PI * k / n;
    cams.push_back(look_at({radius * std::cos(az), radius * std::sin(az), height}, target));
  }
  return cams;
}

Scene spawn_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;
  scene.workspace = spec.workspace;
  const double half_ws = 0.5 * spec.workspace;

  for (int id = 1; id <= spec.object_count; ++id) {
    int rejections = 0;
    for (;;) {
      if (rejections >= 1000)
        fail_numeric(fmt::format(
            "object {} could not be placed after 1000 rejections (seed {})", id, spec.seed));
      Primitive prim = sample_primitive(spec, rng, id);

      if (spec.mode == SceneSpec::Mode::packed) {
        prim.rotation = Rotation::about_z(rng.uniform(0.0, 2.0 * M_PI));
        // exact lateral half extents of the yawed solid
        const double ex = support_point(prim, Eigen::Vector3d::UnitX()).x();
        const double ey = support_point(prim, Eigen::Vector3d::UnitY()).y();
        if (ex >= half_ws || ey >= half_ws) {
          ++rejections;
          continue;
        }
        prim.translation.x() = rng.uniform(-(half_ws - ex), half_ws - ex);
        prim.translation.y() = rng.uniform(-(half_ws - ey), half_ws - ey);
        prim.translation.z() = rest_height(prim);
      } else {
        prim.rotation = sample_uniform_rotation(rng);
        const double rho = bounding_radius(prim);
        if (rho >= half_ws) {
          ++rejections;
          continue;
        }
        prim.translation.x() = rng.uniform(-(half_ws - rho), half_ws - rho);
        prim.translation.y() = rng.uniform(-(half_ws - rho), half_ws - rho);
        prim.translation.z() = settle_z(prim, scene.objects, spec.workspace);
        snap_to_stable(prim);
        prim.translation.z() = settle_z(prim, scene.objects, spec.workspace);
      }

      bool ok = top_height(prim) <= spec.workspace;
      for (size_t i = 0; ok && i < scene.objects.size(); ++i)
        if (intersects(inflate(prim, kPlacementGap), scene.objects[i])) ok = false;
      if (!ok) {
        ++rejections;
        continue;
      }
      scene.objects.push_back(prim);
      break;
    }
  }
  return scene;
}

PointCloud render_depth(const Scene& scene, const CameraSpec& camera, uint64_t noise_seed) {
  camera.validate();
  Rng rng(noise_seed);
  PointCloud out;
  const Eigen::Matrix3d& R = camera.rotation.mat;
  const Eigen::Vector3d& o = camera.translation;
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Eigen::Vector3d dir =
          (R * Eigen::Vector3d((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0))
              .normalized();
      double t = std::numeric_limits<double>::infinity();
      int id = -1;
      for (const Primitive& prim : scene.objects) {
        const auto hit = ray_hit(prim, o, dir);
        if (hit && hit->t < t) {
          t = hit->t;
          id = prim.id;
        }
      }
      if (dir.z() < -1e-12) {  // table disk at z = 0
        const double tt = -o.z() / dir.z();
        if (tt > 1e-9 && tt < t && (o + tt * dir).head<2>().norm() <= kTableRadius) {
          t = tt;
          id = 0;
        }
      }
      if (id < 0) continue;
      const double noise = camera.noise_sigma > 0.0 ? rng.normal(0.0, camera.noise_sigma) : 0.0;
      out.positions.push_back(o + (t + noise) * dir);
      out.labels.push_back(id);
    }
  }
  if (out.positions.empty())
    fmt::print(stderr, "warning: depth render saw neither objects nor table\n");
  return out;
}

std::vector<int> mask_centers(const PointCloud& cloud) {
  if (!cloud.has_labels()) fail_config("mask centers need per-point labels");
  std::vector<int> ids;
  for (int l : cloud.labels)
    if (l > 0 && std::find(ids.begin(), ids.end(), l) == ids.end()) ids.push_back(l);
  std::sort(ids.begin(), ids.end());
  std::vector<int> centers;
  centers.reserve(ids.size());
  for (int id : ids) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    int count = 0;
    for (int i = 0; i < cloud.size(); ++i)
      if (cloud.labels[i] == id) {
        centroid += cloud.positions[i];
        ++count;
      }
    centroid /= count;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cloud.size(); ++i) {
      if (cloud.labels[i] != id) continue;
      const double d = (cloud.positions[i] - centroid).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    centers.push_back(best);
  }
  return centers;
}

FusedScene fuse_views(const Scene& scene, const std::vector<CameraSpec>& cameras, uint64_t seed) {
  if (cameras.empty()) fail_config("fusion needs at least one camera");
  FusedScene out;
  PointCloud merged;
  for (size_t k = 0; k < cameras.size(); ++k) {
    PointCloud view = render_depth(scene, cameras[k], mix_seed(seed, 0xd09e0000ull + k));
    for (int i = 0; i < view.size(); ++i) {
      merged.positions.push_back(view.positions[i]);
      merged.labels.push_back(view.labels[i]);
      merged.views.push_back(static_cast<int>(k));
    }
    out.views.push_back(std::move(view));
  }
  if (merged.size() == 0) {
    out.cloud = merged;
    return out;
  }
  PointCloud down = voxel_downsample(merged, kFuseVoxel, std::pair{kFusedLo, kFusedHi});
  std::vector<Eigen::Vector3d> viewpoints;
  viewpoints.reserve(down.size());
  for (int i = 0; i < down.size(); ++i)
    viewpoints.push_back(cameras[static_cast<size_t>(down.views[i])].translation);
  out.cloud = estimate_normals(down, kNormalsK, viewpoints).cloud;
  return out;
}

const char* to_string(OracleVerdict::Reason reason) {
  switch (reason) {
    case OracleVerdict::Reason::success: return "success";
    case OracleVerdict::Reason::no_contact: return "no_contact";
    case OracleVerdict::Reason::exceeds_opening: return "exceeds_opening";
    case OracleVerdict::Reason::too_thin: return "too_thin";
    case OracleVerdict::Reason::friction: return "friction";
    case OracleVerdict::Reason::collision: return "collision";
  }
  return "unknown";
}

OracleVerdict grasp_oracle(const Scene& scene, const GraspPose& pose, const GripperSpec& gripper,
                           double mu) {
  gripper.validate();
  if (!(mu > 0.0)) fail_config(fmt::format("friction coefficient must be positive, got {}", mu));

  const Eigen::Vector3d c = pose.translation;
  const Eigen::Vector3d n = pose.closing_dir();
  OracleVerdict v;

  // The fingers close on whichever solid the closing line crosses nearest
  // the gripper center.
  const Primitive* target = nullptr;
  LineCrossing cross;
  double best_mid = std::numeric_limits<double>::infinity();
  for (const Primitive& prim : scene.objects) {
    const auto lc = line_crossing(prim, c, n);
    if (!lc) continue;
    const double mid = std::abs(0.5 * (lc->t0 + lc->t1));
    if (mid < best_mid) {
      best_mid = mid;
      cross = *lc;
      target = &prim;
    }
  }
  if (!target) {
    v.reason = OracleVerdict::Reason::no_contact;
    return v;
  }
  v.target_id = target->id;
  v.width = cross.t1 - cross.t0;

  const double half_open = 0.5 * gripper.max_opening;
  if (v.width < 0.005) {
    v.reason = OracleVerdict::Reason::too_thin;
    return v;
  }
  if (cross.t1 > half_open || cross.t0 < -half_open) {
    v.reason = OracleVerdict::Reason::exceeds_opening;
    return v;
  }
  // both contact normals must lie within the friction cone about the
  // closing line: angle(normal, line) <= atan(mu)
  const double cone = std::cos(std::atan(mu));
  if (-cross.n0.dot(n) < cone || cross.n1.dot(n) < cone) {
    v.reason = OracleVerdict::Reason::friction;
    return v;
  }

  // Sweep volumes in the gripper frame (x along the finger width, y along
  // the closing line, z along the approach): each finger from its open
  // position down to its contact, plus the palm slab behind the pads.
  const double fd = gripper.finger_depth, ft = gripper.finger_thickness;
  const double pc = gripper.palm_clearance;
  const auto frame_box = [&](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    Primitive b;
    b.kind = Primitive::Kind::box;
    b.dims = 0.5 * (hi - lo);
    b.rotation = pose.rotation;
    b.translation = c + pose.rotation.mat * (0.5 * (lo + hi));
    b.id = -1;
    return b;
  };
  const Primitive sweeps[3] = {
      frame_box({-0.5 * ft, cross.t1, -0.5 * fd}, {0.5 * ft, half_open + ft, 0.5 * fd}),
      frame_box({-0.5 * ft, -half_open - ft, -0.5 * fd}, {0.5 * ft, cross.t0, 0.5 * fd}),
      frame_box({-0.5 * ft, -half_open - ft, -0.5 * fd - pc},
                {0.5 * ft, half_open + ft, -0.5 * fd}),
  };
  for (const Primitive& sweep : sweeps) {
    if (support_point(sweep, {0.0, 0.0, -1.0}).z() < -1e-9) {
      v.reason = OracleVerdict::Reason::collision;  // dips under the table
      return v;
    }
    for (const Primitive& prim : scene.objects) {
      if (prim.id == target->id) continue;
      if (intersects(sweep, prim)) {
        v.reason = OracleVerdict::Reason::collision;
        return v;
      }
    }
  }

  v.success = true;
  v.reason = OracleVerdict::Reason::success;
  return v;
}

LabeledGraspSet generate_dataset(const std::vector<SceneSpec>& specs,
                                 const std::vector<CameraSpec>& cameras,
                                 const GripperSpec& gripper, int points_per_object,
                                 int orbit_size, const std::string& ply_dir) {
  gripper.validate();
  if (cameras.empty()) fail_config("dataset generation needs at least one camera");
  if (points_per_object < 1)
    fail_config(fmt::format("points per object must be positive, got {}", points_per_object));
  if (orbit_size < 1 || orbit_size > 64)
    fail_config(fmt::format("orbit size must lie in [1, 64], got {}", orbit_size));

  LabeledGraspSet set;
  set.orbit_size = orbit_size;
  for (size_t si = 0; si < specs.size(); ++si) {
    const Scene scene = spawn_scene(specs[si]);
    const FusedScene fused = fuse_views(scene, cameras, specs[si].seed);
    if (!ply_dir.empty())
      for (size_t k = 0; k < fused.views.size(); ++k)
        write_ply(fmt::format("{}/scene{:04}_view{}.ply", ply_dir, si, k), fused.views[k]);

    const PointCloud& cloud = fused.cloud;
    for (const Primitive& obj : scene.objects) {
      std::vector<int> pool;
      for (int i = 0; i < cloud.size(); ++i)
        if (cloud.labels[i] == obj.id) pool.push_back(i);
      if (pool.empty()) continue;

      // uniform sample without replacement from this object's points
      Rng rng(mix_seed(mix_seed(specs[si].seed, 0xca4d1da7eull), static_cast<uint64_t>(obj.id)));
      const size_t take = std::min<size_t>(static_cast<size_t>(points_per_object), pool.size());
      for (size_t i = 0; i < take; ++i)
        std::swap(pool[i], pool[i + rng.uniform_int(pool.size() - i)]);
      pool.resize(take);
      std::sort(pool.begin(), pool.end());

      for (int idx : pool) {
        const Eigen::Vector3d p = cloud.positions[idx];
        const Eigen::Vector3d nvec = cloud.normals[idx];
        if (nvec.norm() < 0.5) continue;  // degenerate patch, no usable normal
        const Direction n_p = Direction::from_vector(nvec);

        // center the jaws on the crossing through this object when the
        // closing line meets it, as the executor would after its own offset
        Eigen::Vector3d center = p;
        if (const auto lc = line_crossing(obj, p, n_p.u))
          center = p + 0.5 * (lc->t0 + lc->t1) * n_p.u;

        uint64_t bits = 0;
        const auto frames = orbit_frames(p, n_p, orbit_size);
        for (int j = 0; j < orbit_size; ++j) {
          const GraspPose pose{frames[static_cast<size_t>(j)], center, 1.0, idx, true};
          if (grasp_oracle(scene, pose, gripper).success) bits |= uint64_t{1} << j;
        }
        GraspRecord rec;
        rec.scene_id = static_cast<uint32_t>(si);
        rec.object_id = static_cast<uint16_t>(obj.id);
        rec.position = p.cast<float>();
        rec.normal = nvec.cast<float>();
        rec.labels = bits;
        set.records.push_back(rec);
      }
    }
  }
  return set;
}

std::pair<long, long> label_counts(const LabeledGraspSet& set) {
  long pos = 0;
  for (const GraspRecord& r : set.records) pos += std::popcount(r.labels);
  return {pos, static_cast<long>(set.records.size()) * set.orbit_size - pos};
}

namespace {

template <typename T>
void put_pod(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct Reader {
  const std::string& buf;
  size_t at = 0;
  const std::string& path;
  template <typename T>
  T take() {
    if (at + sizeof(T) > buf.size()) fail_io(fmt::format("{}: truncated dataset file", path));
    T v;
    std::memcpy(&v, buf.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
  }
};

}  // namespace

void save_grasp_set(const std::string& path, const LabeledGraspSet& set) {
  if (set.orbit_size < 1 || set.orbit_size > 64)
    fail_config(fmt::format("orbit size must lie in [1, 64], got {}", set.orbit_size));
  const uint64_t mask =
      set.orbit_size == 64 ? ~uint64_t{0} : (uint64_t{1} << set.orbit_size) - 1;
  for (const GraspRecord& r : set.records)
    if (r.labels & ~mask)
      fail_config(fmt::format("record labels use bits above the declared orbit size {}",
                              set.orbit_size));

  std::string buf;
  buf.append("OGDS", 4);
  put_pod(buf, uint32_t{1});
  put_pod(buf, static_cast<uint32_t>(set.orbit_size));
  put_pod(buf, static_cast<uint64_t>(set.records.size()));
  for (const GraspRecord& r : set.records) {
    put_pod(buf, r.scene_id);
    put_pod(buf, r.object_id);
    for (int i = 0; i < 3; ++i) put_pod(buf, r.position[i]);
    for (int i = 0; i < 3; ++i) put_pod(buf, r.normal[i]);
    put_pod(buf, r.labels);
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail_io(fmt::format("{}: cannot open for writing", path));
  const size_t wrote = std::fwrite(buf.data(), 1, buf.size(), f);
  const bool closed = std::fclose(f) == 0;
  if (wrote != buf.size() || !closed) fail_io(fmt::format("{}: short write", path));
}

LabeledGraspSet load_grasp_set(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail_io(fmt::format("{}: cannot open", path));
  std::string buf;
  char chunk[65536];
  size_t got;
  while ((got = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, got);
  std::fclose(f);

  Reader rd{buf, 0, path};
  char magic[4];
  for (char& ch : magic) ch = rd.take<char>();
  if (std::memcmp(magic, "OGDS", 4) != 0) fail_io(fmt::format("{}: bad magic", path));
  const uint32_t version = rd.take<uint32_t>();
  if (version != 1) fail_io(fmt::format("{}: unsupported version {}", path, version));
  const uint32_t k = rd.take<uint32_t>();
  if (k < 1 || k > 64) fail_io(fmt::format("{}: orbit size {} out of [1, 64]", path, k));
  const uint64_t count = rd.take<uint64_t>();

  LabeledGraspSet set;
  set.orbit_size = static_cast<int>(k);
  set.records.reserve(count);
  const uint64_t mask = k == 64 ? ~uint64_t{0} : (uint64_t{1} << k) - 1;
  for (uint64_t i = 0; i < count; ++i) {
    GraspRecord r;
    r.scene_id = rd.take<uint32_t>();
    r.object_id = rd.take<uint16_t>();
    for (int j = 0; j < 3; ++j) r.position[j] = rd.take<float>();
    for (int j = 0; j < 3; ++j) r.normal[j] = rd.take<float>();
    r.labels = rd.take<uint64_t>();
    if (r.labels & ~mask)
      fail_io(fmt::format("{}: record {} uses label bits above orbit size {}", path, i, k));
    set.records.push_back(r);
  }
  if (rd.at != buf.size())
    fail_io(fmt::format("{}: {} trailing bytes after the last record", path, buf.size() - rd.at));
  return set;
}

}  // namespace equigrasp
