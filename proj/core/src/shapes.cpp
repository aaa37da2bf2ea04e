#include "equigrasp/shapes.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "equigrasp/error.hpp"

namespace equigrasp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double v) { return v >= 0.0 ? 1.0 : -1.0; }

Eigen::Vector3d to_body(const Primitive& prim, const Eigen::Vector3d& p) {
  return prim.rotation.mat.transpose() * (p - prim.translation);
}

Eigen::Vector3d body_support(const Primitive& prim, const Eigen::Vector3d& d) {
  switch (prim.kind) {
    case Primitive::Kind::box:
      return {sgn(d.x()) * prim.dims.x(), sgn(d.y()) * prim.dims.y(), sgn(d.z()) * prim.dims.z()};
    case Primitive::Kind::cylinder: {
      const double r = prim.dims.x(), hh = prim.dims.y();
      const double nxy = std::hypot(d.x(), d.y());
      Eigen::Vector3d s(0.0, 0.0, sgn(d.z()) * hh);
      if (nxy > 1e-12) {
        s.x() = r * d.x() / nxy;
        s.y() = r * d.y() / nxy;
      }
      return s;
    }
    case Primitive::Kind::sphere: {
      const double r = prim.dims.x();
      const double n = d.norm();
      if (n < 1e-12) return {r, 0.0, 0.0};
      return (r / n) * d;
    }
  }
  fail_numeric("unreachable primitive kind");
}

}  // namespace

Primitive make_box(const Eigen::Vector3d& half_extents, const Rotation& rot,
                   const Eigen::Vector3d& pos, int id) {
  if (!(half_extents.minCoeff() > 0.0))
    fail_config(fmt::format("box half extents must be positive, got ({}, {}, {})",
                            half_extents.x(), half_extents.y(), half_extents.z()));
  return {Primitive::Kind::box, half_extents, rot, pos, id};
}

Primitive make_cylinder(double radius, double half_height, const Rotation& rot,
                        const Eigen::Vector3d& pos, int id) {
  if (!(radius > 0.0) || !(half_height > 0.0))
    fail_config(fmt::format("cylinder needs positive radius and half height, got {} and {}",
                            radius, half_height));
  return {Primitive::Kind::cylinder, {radius, half_height, 0.0}, rot, pos, id};
}

Primitive make_sphere(double radius, const Eigen::Vector3d& pos, int id) {
  if (!(radius > 0.0)) fail_config(fmt::format("sphere needs a positive radius, got {}", radius));
  return {Primitive::Kind::sphere, {radius, 0.0, 0.0}, Rotation::identity(), pos, id};
}

Eigen::Vector3d support_point(const Primitive& prim, const Eigen::Vector3d& dir) {
  const Eigen::Vector3d d = prim.rotation.mat.transpose() * dir;
  return prim.rotation.mat * body_support(prim, d) + prim.translation;
}

double signed_distance(const Primitive& prim, const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = to_body(prim, p);
  switch (prim.kind) {
    case Primitive::Kind::box: {
      const Eigen::Vector3d a = q.cwiseAbs() - prim.dims;
      const double outside = a.cwiseMax(0.0).norm();
      const double inside = std::min(a.maxCoeff(), 0.0);
      return outside + inside;
    }
    case Primitive::Kind::cylinder: {
      const double dr = std::hypot(q.x(), q.y()) - prim.dims.x();
      const double dz = std::abs(q.z()) - prim.dims.y();
      const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
      const double inside = std::min(std::max(dr, dz), 0.0);
      return outside + inside;
    }
    case Primitive::Kind::sphere:
      return q.norm() - prim.dims.x();
  }
  fail_numeric("unreachable primitive kind");
}

std::optional<LineCrossing> line_crossing(const Primitive& prim, const Eigen::Vector3d& origin,
                                          const Eigen::Vector3d& dir) {
  const Eigen::Vector3d o = to_body(prim, origin);
  const Eigen::Vector3d d = prim.rotation.mat.transpose() * dir;
  LineCrossing out;
  Eigen::Vector3d bn0 = Eigen::Vector3d::Zero(), bn1 = Eigen::Vector3d::Zero();

  switch (prim.kind) {
    case Primitive::Kind::sphere: {
      const double r = prim.dims.x();
      const double b = o.dot(d);
      const double disc = b * b - (o.squaredNorm() - r * r);
      if (disc < 0.0) return std::nullopt;
      const double s = std::sqrt(disc);
      out.t0 = -b - s;
      out.t1 = -b + s;
      bn0 = (o + out.t0 * d) / r;
      bn1 = (o + out.t1 * d) / r;
      break;
    }
    case Primitive::Kind::box: {
      double t0 = -kInf, t1 = kInf;
      for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-12) {
          if (std::abs(o[i]) > prim.dims[i]) return std::nullopt;
          continue;
        }
        const double ta = (-prim.dims[i] - o[i]) / d[i];
        const double tb = (prim.dims[i] - o[i]) / d[i];
        const double lo = std::min(ta, tb), hi = std::max(ta, tb);
        if (lo > t0) {
          t0 = lo;
          bn0 = Eigen::Vector3d::Zero();
          bn0[i] = -sgn(d[i]);
        }
        if (hi < t1) {
          t1 = hi;
          bn1 = Eigen::Vector3d::Zero();
          bn1[i] = sgn(d[i]);
        }
      }
      if (t0 > t1 || t0 == -kInf) return std::nullopt;
      out.t0 = t0;
      out.t1 = t1;
      break;
    }
    case Primitive::Kind::cylinder: {
      const double r = prim.dims.x(), hh = prim.dims.y();
      double ts0 = -kInf, ts1 = kInf;  // side constraint
      const double a = d.x() * d.x() + d.y() * d.y();
      if (a < 1e-18) {
        if (std::hypot(o.x(), o.y()) > r) return std::nullopt;
      } else {
        const double b = o.x() * d.x() + o.y() * d.y();
        const double c = o.x() * o.x() + o.y() * o.y() - r * r;
        const double disc = b * b - a * c;
        if (disc < 0.0) return std::nullopt;
        const double s = std::sqrt(disc);
        ts0 = (-b - s) / a;
        ts1 = (-b + s) / a;
      }
      double tc0 = -kInf, tc1 = kInf;  // cap constraint
      if (std::abs(d.z()) < 1e-12) {
        if (std::abs(o.z()) > hh) return std::nullopt;
      } else {
        tc0 = (-hh - o.z()) / d.z();
        tc1 = (hh - o.z()) / d.z();
        if (tc0 > tc1) std::swap(tc0, tc1);
      }
      const double t0 = std::max(ts0, tc0), t1 = std::min(ts1, tc1);
      if (t0 > t1 || t0 == -kInf) return std::nullopt;
      auto side_normal = [&](double t) {
        const Eigen::Vector3d p = o + t * d;
        return Eigen::Vector3d(p.x() / r, p.y() / r, 0.0).normalized();
      };
      bn0 = (ts0 >= tc0) ? side_normal(t0) : Eigen::Vector3d(0.0, 0.0, -sgn(d.z()));
      bn1 = (ts1 <= tc1) ? side_normal(t1) : Eigen::Vector3d(0.0, 0.0, sgn(d.z()));
      out.t0 = t0;
      out.t1 = t1;
      break;
    }
  }
  out.n0 = prim.rotation.mat * bn0;
  out.n1 = prim.rotation.mat * bn1;
  return out;
}

std::optional<RayHit> ray_hit(const Primitive& prim, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& dir) {
  const auto lc = line_crossing(prim, origin, dir);
  if (!lc) return std::nullopt;
  constexpr double kEps = 1e-9;
  if (lc->t0 > kEps) return RayHit{lc->t0, lc->n0};
  if (lc->t1 > kEps) return RayHit{lc->t1, lc->n1};
  return std::nullopt;
}

namespace {

Eigen::Vector3d minkowski_support(const Primitive& a, const Primitive& b,
                                  const Eigen::Vector3d& dir) {
  return support_point(a, dir) - support_point(b, -dir);
}

// Nearest-feature update in GJK: keeps the simplex vertices that can still
// contain the origin and points d toward it. Returns true when the simplex
// encloses the origin. s.back() is always the newest vertex.
bool do_simplex(std::vector<Eigen::Vector3d>& s, Eigen::Vector3d& d) {
  const auto triple = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v,
                         const Eigen::Vector3d& w) { return u.cross(v).cross(w); };
  if (s.size() == 2) {
    const Eigen::Vector3d a = s[1], b = s[0];
    const Eigen::Vector3d ab = b - a, ao = -a;
    if (ab.dot(ao) > 0.0) {
      d = triple(ab, ao, ab);
    } else {
      s = {a};
      d = ao;
    }
    return false;
  }
  if (s.size() == 3) {
    const Eigen::Vector3d a = s[2], b = s[1], c = s[0];
    const Eigen::Vector3d ab = b - a, ac = c - a, ao = -a;
    const Eigen::Vector3d abc = ab.cross(ac);
    if (abc.cross(ac).dot(ao) > 0.0) {
      if (ac.dot(ao) > 0.0) {
        s = {c, a};
        d = triple(ac, ao, ac);
      } else if (ab.dot(ao) > 0.0) {
        s = {b, a};
        d = triple(ab, ao, ab);
      } else {
        s = {a};
        d = ao;
      }
    } else if (ab.cross(abc).dot(ao) > 0.0) {
      if (ab.dot(ao) > 0.0) {
        s = {b, a};
        d = triple(ab, ao, ab);
      } else {
        s = {a};
        d = ao;
      }
    } else if (abc.dot(ao) > 0.0) {
      d = abc;
    } else {
      s = {b, c, a};
      d = -abc;
    }
    return false;
  }
  // tetrahedron
  const Eigen::Vector3d a = s[3], b = s[2], c = s[1], e = s[0];
  const Eigen::Vector3d ab = b - a, ac = c - a, ae = e - a, ao = -a;
  const Eigen::Vector3d abc = ab.cross(ac);
  const Eigen::Vector3d ace = ac.cross(ae);
  const Eigen::Vector3d aeb = ae.cross(ab);
  if (abc.dot(ao) > 0.0) {
    s = {c, b, a};
    return do_simplex(s, d);
  }
  if (ace.dot(ao) > 0.0) {
    s = {e, c, a};
    return do_simplex(s, d);
  }
  if (aeb.dot(ao) > 0.0) {
    s = {b, e, a};
    return do_simplex(s, d);
  }
  return true;
}

}  // namespace

bool intersects(const Primitive& a, const Primitive& b) {
  Eigen::Vector3d d = b.translation - a.translation;
  if (d.squaredNorm() < 1e-18) return true;  // coincident centers always share a point
  std::vector<Eigen::Vector3d> simplex{minkowski_support(a, b, d)};
  d = -simplex[0];
  for (int iter = 0; iter < 128; ++iter) {
    if (d.squaredNorm() < 1e-24) return true;  // origin sits on the current feature
    const Eigen::Vector3d p = minkowski_support(a, b, d);
    if (p.dot(d) < 0.0) return false;  // a separating plane exists
    simplex.push_back(p);
    if (do_simplex(simplex, d)) return true;
  }
  return true;  // only reachable for grazing contact; count it as touching
}

Primitive inflate(const Primitive& prim, double delta) {
  Primitive out = prim;
  const auto grow = [&](double v) { return std::max(v + delta, 1e-6); };
  switch (prim.kind) {
    case Primitive::Kind::box:
      out.dims = {grow(prim.dims.x()), grow(prim.dims.y()), grow(prim.dims.z())};
      break;
    case Primitive::Kind::cylinder:
      out.dims = {grow(prim.dims.x()), grow(prim.dims.y()), 0.0};
      break;
    case Primitive::Kind::sphere:
      out.dims = {grow(prim.dims.x()), 0.0, 0.0};
      break;
  }
  return out;
}

double bounding_radius(const Primitive& prim) {
  switch (prim.kind) {
    case Primitive::Kind::box:
      return prim.dims.norm();
    case Primitive::Kind::cylinder:
      return std::hypot(prim.dims.x(), prim.dims.y());
    case Primitive::Kind::sphere:
      return prim.dims.x();
  }
  fail_numeric("unreachable primitive kind");
}

}  // namespace equigrasp
