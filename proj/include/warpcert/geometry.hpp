#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "warpcert/common.hpp"
#include "warpcert/rng.hpp"

namespace warpcert {

// ----------------------------------------------------------------------------
// Round sphere S^n in R^{n+1}.

struct SphereGeom {
  int n = 4;

  int ambient() const { return n + 1; }

  double distance(const Vec& p, const Vec& q) const {
    // chord form, stable at both ends of [0, pi]
    const double c = 0.5 * (p - q).norm();
    return 2.0 * std::asin(clamp_unit(c));
  }

  Vec sample(Rng& rng) const { return rng.unit_vector(n + 1); }

  Vec tangent(const Vec& p, Rng& rng) const {
    Vec t;
    double norm;
    do {
      t = rng.unit_vector(n + 1);
      t -= t.dot(p) * p;
      norm = t.norm();
    } while (norm < 1e-8);
    return t / norm;
  }

  Vec move(const Vec& p, double dist, Rng& rng) const {
    return std::cos(dist) * p + std::sin(dist) * tangent(p, rng);
  }

  // point at parameter t in [0,1] along the minimizing arc from p to q
  Vec slerp(const Vec& p, const Vec& q, double t) const {
    const double theta = distance(p, q);
    if (theta < 1e-14) return p;
    if (theta > pi - 1e-9)
      throw parameter_error("slerp: endpoints are antipodal");
    const double s = std::sin(theta);
    Vec out = (std::sin((1.0 - t) * theta) * p + std::sin(t * theta) * q) / s;
    return out / out.norm();
  }
};

// Unit circle in the plane spanned by the orthonormal pair (u, v).
struct GreatCircle {
  Vec u, v;

  Vec point(double s) const { return std::cos(s) * u + std::sin(s) * v; }

  double circumference() const { return 2.0 * pi; }

  // distance from p to the nearest circle point; cos of it is the norm of
  // the projection of p onto the spanning plane
  double distance_to(const Vec& p) const {
    const double a = p.dot(u), b = p.dot(v);
    return std::acos(clamp_unit(std::hypot(a, b)));
  }

  double nearest_angle(const Vec& p) const {
    return std::atan2(p.dot(v), p.dot(u));
  }
};

// Smallest principal angle between the spanning planes, which equals the
// minimum round distance between the two circles.
inline double circle_distance(const GreatCircle& a, const GreatCircle& b) {
  Eigen::Matrix2d m;
  m(0, 0) = a.u.dot(b.u);
  m(0, 1) = a.u.dot(b.v);
  m(1, 0) = a.v.dot(b.u);
  m(1, 1) = a.v.dot(b.v);
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(m);
  return std::acos(clamp_unit(svd.singularValues()(0)));
}

// Grid scan plus golden-section refinement; used to cross-check the closed
// form above, never in the construction itself.
inline double circle_distance_scan(const GreatCircle& a, const GreatCircle& b,
                                   int grid = 720) {
  double best = pi, best_s = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double s = 2.0 * pi * i / grid;
    const double d = b.distance_to(a.point(s));
    if (d < best) {
      best = d;
      best_s = s;
    }
  }
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = best_s - 2.0 * pi / grid, hi = best_s + 2.0 * pi / grid;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = b.distance_to(a.point(x1)), f2 = b.distance_to(a.point(x2));
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = b.distance_to(a.point(x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = b.distance_to(a.point(x2));
    }
  }
  return std::min(best, std::min(f1, f2));
}

struct TubeCoords {
  double r = 0.0;
  double s = 0.0;
  Vec x;  // unit normal direction, empty when undefined
  bool s_defined = true;
  bool x_defined = true;
};

// Tube chart around a great circle: p = sin(r) x + cos(r) (u cos s + v sin s)
// with x a unit vector orthogonal to the spanning plane.
struct SphereTube {
  GreatCircle circle;

  TubeCoords coords(const Vec& p) const {
    const double a = p.dot(circle.u), b = p.dot(circle.v);
    const double c = std::hypot(a, b);
    TubeCoords out;
    out.r = std::acos(clamp_unit(c));
    if (c < 1e-14) {
      out.s_defined = false;  // r = pi/2: every circle point is equidistant
    } else {
      out.s = std::atan2(b, a);
    }
    Vec perp = p - a * circle.u - b * circle.v;
    const double pn = perp.norm();
    if (pn < 1e-14) {
      out.x_defined = false;  // on the core circle
    } else {
      out.x = perp / pn;
    }
    return out;
  }

  Vec from_coords(double r, const Vec& x, double s) const {
    return std::sin(r) * x + std::cos(r) * circle.point(s);
  }

  // Unit radial and core-angular directions of the chart at (r, x, s); both
  // are unit in the round metric.
  Vec radial_direction(double r, const Vec& x, double s) const {
    return std::cos(r) * x - std::sin(r) * circle.point(s);
  }

  Vec angular_direction(double s) const {
    return -std::sin(s) * circle.u + std::cos(s) * circle.v;
  }
};

// Great circle through two points (or near them after perturbation).
// Returns nothing when the points are too close to (anti)parallel to span a
// well-conditioned plane.
inline std::optional<GreatCircle> circle_through(const Vec& w1, const Vec& w2) {
  const double d = w1.dot(w2);
  if (std::abs(d) > 1.0 - 1e-10) return std::nullopt;
  Vec v = w2 - d * w1;
  return GreatCircle{w1, v / v.norm()};
}

// Rotates the spanning plane by at most budget (two elementary rotations
// toward random directions orthogonal to the plane), so every circle point
// moves by at most budget.
inline GreatCircle perturb_circle(const GreatCircle& c, double budget,
                                  Rng& rng) {
  const int dim = static_cast<int>(c.u.size());
  auto complement_unit = [&](const Vec& a, const Vec& b) {
    Vec t;
    double norm;
    do {
      t = rng.unit_vector(dim);
      t -= t.dot(a) * a;
      t -= t.dot(b) * b;
      norm = t.norm();
    } while (norm < 1e-8);
    return Vec(t / norm);
  };
  const double a1 = rng.uniform(0.25 * budget, 0.5 * budget);
  const double a2 = rng.uniform(0.25 * budget, 0.5 * budget);
  GreatCircle out = c;
  Vec w1 = complement_unit(out.u, out.v);
  out.u = std::cos(a1) * out.u + std::sin(a1) * w1;
  Vec w2 = complement_unit(out.u, out.v);
  out.v = std::cos(a2) * out.v + std::sin(a2) * w2;
  // re-orthonormalize against roundoff drift
  out.v -= out.v.dot(out.u) * out.u;
  out.v /= out.v.norm();
  return out;
}

// ----------------------------------------------------------------------------
// Flat torus R^n / (L_1 Z x ... x L_n Z).

struct TorusGeom {
  Vec periods;

  int n() const { return static_cast<int>(periods.size()); }

  Vec wrap(Vec x) const {
    for (int i = 0; i < n(); ++i) {
      x[i] = std::fmod(x[i], periods[i]);
      if (x[i] < 0.0) x[i] += periods[i];
    }
    return x;
  }

  // signed wrapped difference, each component in (-L_i/2, L_i/2]
  Vec diff(const Vec& p, const Vec& q) const {
    Vec d = p - q;
    for (int i = 0; i < n(); ++i) {
      d[i] = std::remainder(d[i], periods[i]);
    }
    return d;
  }

  double distance(const Vec& p, const Vec& q) const { return diff(p, q).norm(); }

  Vec sample(Rng& rng) const {
    Vec p(n());
    for (int i = 0; i < n(); ++i) p[i] = rng.uniform(0.0, periods[i]);
    return p;
  }

  Vec move(const Vec& p, double dist, Rng& rng) const {
    return wrap(p + dist * rng.unit_vector(n()));
  }

  Vec lerp(const Vec& p, const Vec& q, double t) const {
    return wrap(p + t * diff(q, p));
  }
};

// Axis-parallel closed geodesic through a base point.
struct TorusLine {
  int axis = 0;
  Vec base;

  double circumference(const TorusGeom& g) const { return g.periods[axis]; }

  Vec point(const TorusGeom& g, double s) const {
    Vec p = base;
    p[axis] += s;
    return g.wrap(p);
  }

  double distance_to(const TorusGeom& g, const Vec& p) const {
    const Vec d = g.diff(p, base);
    double sum = 0.0;
    for (int i = 0; i < g.n(); ++i)
      if (i != axis) sum += d[i] * d[i];
    return std::sqrt(sum);
  }

  double nearest_angle(const TorusGeom& g, const Vec& p) const {
    double s = std::fmod(p[axis] - base[axis], g.periods[axis]);
    if (s < 0.0) s += g.periods[axis];
    return s;
  }

  TubeCoords coords(const TorusGeom& g, const Vec& p) const {
    TubeCoords out;
    out.s = nearest_angle(g, p);
    Vec d = g.diff(p, base);
    d[axis] = 0.0;
    out.r = d.norm();
    if (out.r < 1e-14) {
      out.x_defined = false;
    } else {
      out.x = d / out.r;
    }
    return out;
  }

  // x must be a unit vector with x[axis] = 0
  Vec from_coords(const TorusGeom& g, double r, const Vec& x, double s) const {
    Vec p = base + r * x;
    p[axis] = base[axis] + s;
    return g.wrap(p);
  }

  // Radius at which the normal disk bundle stops being embedded.
  double tube_injectivity(const TorusGeom& g) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.n(); ++i)
      if (i != axis) m = std::min(m, 0.5 * g.periods[i]);
    return m;
  }
};

// Minimum distance between two axis-parallel closed geodesics: wrapped
// distance in the coordinates neither line can sweep.
inline double line_distance(const TorusGeom& g, const TorusLine& a,
                            const TorusLine& b) {
  const Vec d = g.diff(a.base, b.base);
  double sum = 0.0;
  for (int i = 0; i < g.n(); ++i) {
    if (i == a.axis || i == b.axis) continue;
    sum += d[i] * d[i];
  }
  return std::sqrt(sum);
}

}  // namespace warpcert
