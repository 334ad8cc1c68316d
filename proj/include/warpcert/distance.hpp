#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "warpcert/common.hpp"
#include "warpcert/conformal.hpp"
#include "warpcert/geometry.hpp"
#include "warpcert/mesh.hpp"
#include "warpcert/packing.hpp"
#include "warpcert/quadrature.hpp"
#include "warpcert/rng.hpp"

namespace warpcert {

// One leg of a constructive path: either a hop between nearby points, bounded
// through the bi-Lipschitz upper comparison, or a ride along a pair circle,
// bounded by the conformal arc length the core circles carry exactly.
struct PathLeg {
  enum class Kind { hop, arc };
  Kind kind = Kind::hop;
  Vec from;
  Vec to;
  int circle = -1;
  double s_from = 0.0;
  double s_to = 0.0;  // signed sweep from s_from; negative runs backwards
  double background_length = 0.0;
  double bound = 0.0;
};

struct PathSpec {
  std::vector<PathLeg> legs;

  double total() const {
    double t = 0.0;
    for (const PathLeg& leg : legs) t += leg.bound;
    return t;
  }
};

inline int nearest_center(const SphereGeom& geom, const PackedAtlas& atlas,
                          const Vec& p, double* dist_out = nullptr) {
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (int i = 0; i < atlas.center_count(); ++i) {
    const double d =
        geom.distance(p, atlas.centers[static_cast<std::size_t>(i)]);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  if (dist_out) *dist_out = bd;
  return best;
}

// Points along a polyline at fixed background spacing, endpoints included.
template <class Geom>
std::vector<Vec> chunk_polyline(const Geom& geom, const std::vector<Vec>& pts,
                                double spacing) {
  if (pts.empty()) throw parameter_error("chunk_polyline: empty polyline");
  if (!(spacing > 0.0))
    throw parameter_error("chunk_polyline: spacing must be positive");
  std::vector<Vec> out = {pts.front()};
  double since_last = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Vec& a = pts[k];
    const Vec& b = pts[k + 1];
    const double len = geom.distance(a, b);
    double used = 0.0;
    while (since_last + (len - used) >= spacing) {
      used += spacing - since_last;
      out.push_back(geo_interpolate(geom, a, b, used / len));
      since_last = 0.0;
    }
    since_last += len - used;
  }
  out.push_back(pts.back());
  return out;
}

// Two-sided bracket for the distance in the assembled metric between two
// mesh anchors:
//   lower = d_h / sqrt(1+eps)              (lower comparison certificate)
//   upper = certified length of an explicit hop-and-arc path, or the direct
//           sqrt(1+eps) * d_background hop when the path degenerates.
struct DistanceCertificate {
  int pair_a = -1;
  int pair_b = -1;
  double epsilon = 0.0;
  double d_h = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double direct_bound = 0.0;
  bool used_direct = false;
  double max_hop = 0.0;  // background length of the longest hop taken
  double hop_budget = 0.0;
  int arcs = 0;
  PathSpec path;

  double gap() const { return upper - lower; }
  bool bracket_ok() const { return lower <= upper * (1.0 + 1e-12); }
  bool hops_ok() const { return used_direct || max_hop <= hop_budget; }
};

inline DistanceCertificate bracket_distance(
    const SphereGeom& geom, const PackedAtlas& atlas, const ConformalFactor& f,
    double epsilon, double f_bar, double modulus,
    const ConformalMesh<SphereGeom>& mesh, int a, int b,
    double quad_rel = 1e-9) {
  if (!(modulus > 0.0))
    throw parameter_error("bracket_distance: modulus must be positive");
  DistanceCertificate cert;
  cert.pair_a = a;
  cert.pair_b = b;
  cert.epsilon = epsilon;
  const double root = std::sqrt(1.0 + epsilon);
  const Vec& pa = mesh.vertex(a);
  const Vec& pb = mesh.vertex(b);
  cert.direct_bound = root * geom.distance(pa, pb);
  cert.hop_budget = 3.0 * atlas.eta + 1e-9;
  if (a == b) {
    cert.used_direct = true;
    return cert;
  }
  const OraclePath& oracle = mesh.path(a, b);
  cert.d_h = oracle.length;
  cert.lower = cert.d_h / root;

  // Chunk spacing in background length: each chunk then has h-length at most
  // e * modulus * e^{sup f} <= e^0 * modulus, so a chunk plus its hop detours
  // stays inside the audited continuity reach of f for every f_bar >= 1.
  const double spacing = std::exp(1.0) * modulus;
  if (!(f_bar >= 1.0))
    throw parameter_error("bracket_distance: factor must be normalized");
  const std::vector<Vec> chunks =
      chunk_polyline(geom, oracle.points, spacing);
  std::vector<int> centers;
  for (const Vec& y : chunks) {
    double d = 0.0;
    const int c = nearest_center(geom, atlas, y, &d);
    if (c < 0 || d > 2.0 * atlas.eta)
      throw packing_error("bracket_distance: chunk point is not covered");
    if (centers.empty() || centers.back() != c) centers.push_back(c);
  }

  if (centers.size() < 2) {
    // both endpoints sit by one center; a single certified hop is tight
    // enough at that scale
    cert.used_direct = true;
    cert.upper = cert.direct_bound;
    PathLeg leg;
    leg.from = pa;
    leg.to = pb;
    leg.background_length = geom.distance(pa, pb);
    leg.bound = cert.direct_bound;
    cert.max_hop = leg.background_length;
    cert.path.legs.push_back(std::move(leg));
    return cert;
  }

  PathSpec spec;
  Vec current = pa;
  auto add_hop = [&](const Vec& to) {
    PathLeg leg;
    leg.from = current;
    leg.to = to;
    leg.background_length = geom.distance(current, to);
    leg.bound = root * leg.background_length;
    cert.max_hop = std::max(cert.max_hop, leg.background_length);
    spec.legs.push_back(leg);
    current = to;
  };
  auto arc_weight = [&](const GreatCircle& c, double lo, double hi) {
    return integrate_relative(
        [&](double s) { return std::exp(f(c.point(s))); }, lo, hi, quad_rel);
  };
  for (std::size_t k = 0; k + 1 < centers.size(); ++k) {
    const int i = centers[k];
    const int j = centers[k + 1];
    const int cid = atlas.circle_for(i, j);
    const GreatCircle& circ = atlas.circles[static_cast<std::size_t>(cid)];
    const double entry = circ.nearest_angle(current);
    add_hop(circ.point(entry));
    const double exit =
        circ.nearest_angle(atlas.centers[static_cast<std::size_t>(j)]);
    double forward = std::fmod(exit - entry, 2.0 * pi);
    if (forward < 0.0) forward += 2.0 * pi;
    const double fwd = arc_weight(circ, entry, entry + forward);
    const double bwd = arc_weight(circ, entry - (2.0 * pi - forward), entry);
    PathLeg leg;
    leg.kind = PathLeg::Kind::arc;
    leg.circle = cid;
    leg.from = current;
    leg.to = circ.point(exit);
    leg.s_from = entry;
    if (fwd <= bwd) {
      leg.s_to = entry + forward;
      leg.bound = fwd;
    } else {
      leg.s_to = entry - (2.0 * pi - forward);
      leg.bound = bwd;
    }
    leg.background_length = std::abs(leg.s_to - leg.s_from);
    spec.legs.push_back(std::move(leg));
    ++cert.arcs;
    current = circ.point(exit);
  }
  add_hop(pb);

  const double constructed = spec.total();
  if (constructed <= cert.direct_bound) {
    cert.upper = constructed;
    cert.path = std::move(spec);
  } else {
    cert.used_direct = true;
    cert.upper = cert.direct_bound;
    PathLeg leg;
    leg.from = pa;
    leg.to = pb;
    leg.background_length = geom.distance(pa, pb);
    leg.bound = cert.direct_bound;
    cert.max_hop = leg.background_length;
    cert.path.legs = {std::move(leg)};
  }
  return cert;
}

// Short circle arcs are epsilon-quasi-geodesics.  The conformal distance
// between arc endpoints is bounded below through the audited continuity
// modulus (any competing path stays inside the certified reach), so the
// ratio bound here is sound without an oracle call.
struct ArcAudit {
  int samples = 0;
  double worst_ratio = 0.0;
  double limit = 0.0;
  bool pass = false;
};

inline ArcAudit audit_circle_arcs(const SphereGeom& geom,
                                  const PackedAtlas& atlas,
                                  const ConformalFactor& f, double epsilon,
                                  double modulus, std::uint64_t seed,
                                  int samples = 200) {
  if (atlas.circles.empty())
    throw parameter_error("audit_circle_arcs: atlas has no circles");
  (void)geom;
  ArcAudit out;
  out.samples = samples;
  out.limit = 1.0 + epsilon;
  Rng rng = Rng::stage(seed, "arc-audit");
  const double root = std::sqrt(1.0 + epsilon);
  const double span_max = std::min(2.0 * modulus, 0.5 * pi);
  for (int t = 0; t < samples; ++t) {
    const GreatCircle& c = atlas.circles[static_cast<std::size_t>(
        rng.integer(static_cast<std::uint64_t>(atlas.circles.size())))];
    const double s0 = rng.uniform(0.0, 2.0 * pi);
    const double span = span_max * rng.uniform(0.05, 1.0);
    const double arc = integrate_relative(
        [&](double s) { return std::exp(f(c.point(s))); }, s0, s0 + span,
        1e-9);
    // endpoints sit span apart on a great circle, so their background
    // distance is exactly the span
    const double floor = std::exp(f(c.point(s0))) * span / root;
    const double ratio = arc / floor;
    out.worst_ratio = std::max(out.worst_ratio, ratio);
  }
  out.pass = out.worst_ratio <= out.limit + 1e-12;
  return out;
}

struct ConvergencePoint {
  double epsilon = 0.0;
  int pairs = 0;
  double sup_upper_gap = -std::numeric_limits<double>::infinity();
  double sup_lower_gap = -std::numeric_limits<double>::infinity();
  double sup_total_gap = -std::numeric_limits<double>::infinity();
  double fitted_C = 0.0;  // sup_total_gap / epsilon
  bool brackets_ok = true;
};

inline ConvergencePoint summarize_brackets(
    const std::vector<DistanceCertificate>& certs) {
  if (certs.empty())
    throw parameter_error("summarize_brackets: no certificates");
  ConvergencePoint point;
  point.epsilon = certs.front().epsilon;
  point.pairs = static_cast<int>(certs.size());
  for (const DistanceCertificate& c : certs) {
    if (c.epsilon != point.epsilon)
      throw parameter_error("summarize_brackets: mixed epsilon values");
    point.sup_upper_gap = std::max(point.sup_upper_gap, std::abs(c.upper - c.d_h));
    point.sup_lower_gap = std::max(point.sup_lower_gap, c.d_h - c.lower);
    point.sup_total_gap =
        std::max(point.sup_total_gap,
                 std::max(std::abs(c.upper - c.d_h), c.d_h - c.lower));
    point.brackets_ok = point.brackets_ok && c.bracket_ok() && c.hops_ok();
  }
  point.fitted_C = point.sup_total_gap / point.epsilon;
  return point;
}

// Distance control across an epsilon sweep: both one-sided gaps shrink as
// epsilon does, and the linear-in-epsilon gap coefficient stays within a
// factor of two.
struct ConvergenceReport {
  std::vector<ConvergencePoint> points;  // sorted, epsilon decreasing
  bool gaps_decreasing = false;
  bool fitted_stable = false;
  // Largest deviation of consecutive fitted constants from equality, as a
  // ratio >= 1; stability demands it stay at or below two.
  double stability_ratio = 0.0;
  bool brackets_ok = true;

  bool pass() const { return gaps_decreasing && fitted_stable && brackets_ok; }
};

inline ConvergenceReport convergence_report(std::vector<ConvergencePoint> pts) {
  if (pts.size() < 2)
    throw parameter_error("convergence_report: need at least two epsilons");
  ConvergenceReport rep;
  std::sort(pts.begin(), pts.end(),
            [](const ConvergencePoint& x, const ConvergencePoint& y) {
              return x.epsilon > y.epsilon;
            });
  rep.gaps_decreasing = true;
  rep.stability_ratio = 1.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    rep.gaps_decreasing = rep.gaps_decreasing &&
                          pts[k + 1].sup_upper_gap < pts[k].sup_upper_gap &&
                          pts[k + 1].sup_lower_gap < pts[k].sup_lower_gap;
    const double r = pts[k + 1].fitted_C / pts[k].fitted_C;
    rep.stability_ratio = std::max(rep.stability_ratio, std::max(r, 1.0 / r));
  }
  for (const ConvergencePoint& p : pts)
    rep.brackets_ok = rep.brackets_ok && p.brackets_ok;
  rep.fitted_stable = rep.stability_ratio <= 2.0 * (1.0 + 1e-9);
  rep.points = std::move(pts);
  return rep;
}

}  // namespace warpcert
