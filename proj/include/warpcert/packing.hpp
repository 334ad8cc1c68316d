#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "warpcert/common.hpp"
#include "warpcert/geometry.hpp"
#include "warpcert/rng.hpp"

namespace warpcert {

// Circles selected for every unordered center pair, plus the tube radius
// that keeps all their tubular neighbourhoods disjoint.
struct PackedAtlas {
  int n = 4;
  double eta = 0.0;
  std::vector<Vec> centers;
  std::vector<GreatCircle> circles;
  std::vector<int> pair_circle;  // ranked by (i, j), i < j
  double R = 0.0;
  double min_circle_distance = 0.0;

  int center_count() const { return static_cast<int>(centers.size()); }
  int pair_count() const { return center_count() * (center_count() - 1) / 2; }

  int pair_rank(int i, int j) const {
    const int p = center_count();
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= p || i == j)
      throw parameter_error("PackedAtlas: bad center pair");
    return i * p - i * (i + 1) / 2 + (j - i - 1);
  }

  int circle_for(int i, int j) const { return pair_circle[pair_rank(i, j)]; }
};

struct PackingOptions {
  int audit_samples = 20000;  // per saturation round
  int max_rounds = 50;
};

// Greedy saturated ball packing: pairwise separation > 2*eta, and a full
// Monte-Carlo round without holes certifies the 2*eta coverage proxy.
// Holes found while auditing are themselves admissible centers, so each
// round both tests and repairs.
inline std::vector<Vec> pack_balls(const SphereGeom& geom, double eta,
                                   std::uint64_t seed,
                                   PackingOptions opt = {}) {
  if (!(eta > 0.0) || !(eta < 0.5 * pi))
    throw parameter_error("pack_balls: eta must lie in (0, pi/2)");
  std::vector<Vec> centers;
  for (int round = 0; round < opt.max_rounds; ++round) {
    Rng rng = Rng::stage(seed, "pack-round-" + std::to_string(round));
    int holes = 0;
    for (int i = 0; i < opt.audit_samples; ++i) {
      const Vec p = geom.sample(rng);
      double nearest = std::numeric_limits<double>::infinity();
      for (const Vec& c : centers)
        nearest = std::min(nearest, geom.distance(p, c));
      if (nearest > 2.0 * eta) {
        centers.push_back(p);
        ++holes;
      }
    }
    if (holes == 0 && round > 0) return centers;
  }
  throw packing_error("pack_balls: saturation did not converge");
}

inline double min_center_separation(const SphereGeom& geom,
                                    const std::vector<Vec>& centers) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centers.size(); ++i)
    for (std::size_t j = i + 1; j < centers.size(); ++j)
      best = std::min(best, geom.distance(centers[i], centers[j]));
  return best;
}

struct CircleOptions {
  int max_retries = 1000;
  // minimum accepted distance to previously selected circles; keeps the
  // derived tube radius bounded away from zero
  double min_separation = 1e-4;
};

// One great circle per center pair, each within eta of both its centers and
// pairwise disjoint.  First try the circle straight through the pair; on
// conflicts, perturb it by at most eta/2.
inline PackedAtlas select_circles(const SphereGeom& geom,
                                  const std::vector<Vec>& centers, double eta,
                                  std::uint64_t seed, CircleOptions opt = {}) {
  if (geom.n < 4)
    throw dimension_error("select_circles: disjoint circles need n >= 4");
  if (centers.size() < 2)
    throw parameter_error("select_circles: need at least two centers");
  PackedAtlas atlas;
  atlas.n = geom.n;
  atlas.eta = eta;
  atlas.centers = centers;
  const int p = atlas.center_count();
  atlas.pair_circle.assign(static_cast<std::size_t>(atlas.pair_count()), -1);
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      Rng rng = Rng::stage(
          seed, "circle-" + std::to_string(i) + "-" + std::to_string(j));
      // through the centers when the plane is well conditioned; otherwise
      // through slightly moved copies (budget eta/4 each)
      std::optional<GreatCircle> base = circle_through(centers[i], centers[j]);
      while (!base) {
        const Vec a = geom.move(centers[i], rng.uniform(0.0, 0.25 * eta), rng);
        const Vec b = geom.move(centers[j], rng.uniform(0.0, 0.25 * eta), rng);
        base = circle_through(a, b);
      }
      bool placed = false;
      for (int attempt = 0; attempt <= opt.max_retries && !placed; ++attempt) {
        const GreatCircle cand =
            attempt == 0 ? *base : perturb_circle(*base, 0.5 * eta, rng);
        if (cand.distance_to(centers[i]) > eta ||
            cand.distance_to(centers[j]) > eta)
          continue;
        bool disjoint = true;
        for (const GreatCircle& prev : atlas.circles) {
          if (circle_distance(cand, prev) <= opt.min_separation) {
            disjoint = false;
            break;
          }
        }
        if (disjoint) {
          atlas.pair_circle[atlas.pair_rank(i, j)] =
              static_cast<int>(atlas.circles.size());
          atlas.circles.push_back(cand);
          placed = true;
        }
      }
      if (!placed)
        throw packing_error("select_circles: retry budget exhausted for pair " +
                            std::to_string(i) + "," + std::to_string(j));
    }
  }
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < atlas.circles.size(); ++a)
    for (std::size_t b = a + 1; b < atlas.circles.size(); ++b)
      dmin = std::min(dmin, circle_distance(atlas.circles[a], atlas.circles[b]));
  atlas.min_circle_distance = dmin;
  atlas.R = std::min(0.01, dmin / 3.0);
  return atlas;
}

struct AtlasAudit {
  double min_center_separation = 0.0;  // must exceed 2*eta
  double min_circle_distance = 0.0;    // must exceed 2*R
  double max_center_to_circle = 0.0;   // over pairs, must stay <= eta
  double coverage_worst = 0.0;         // sampled point to nearest center
  double pair_cover_worst = 0.0;       // sampled pair to best common circle
  bool pass(const PackedAtlas& atlas) const {
    return min_center_separation > 2.0 * atlas.eta &&
           min_circle_distance > 2.0 * atlas.R &&
           max_center_to_circle <= atlas.eta &&
           coverage_worst <= 2.0 * atlas.eta &&
           pair_cover_worst <= 3.0 * atlas.eta;
  }
};

// Independent measurement of every atlas invariant: separations, the
// per-pair center-to-circle promises, 2*eta point coverage, and the 3*eta
// common-circle property for random point pairs.
inline AtlasAudit audit_atlas(const SphereGeom& geom, const PackedAtlas& atlas,
                              std::uint64_t seed, int point_samples = 10000,
                              int pair_samples = 1000) {
  AtlasAudit audit;
  audit.min_center_separation = min_center_separation(geom, atlas.centers);
  audit.min_circle_distance = atlas.min_circle_distance;
  for (int i = 0; i < atlas.center_count(); ++i)
    for (int j = i + 1; j < atlas.center_count(); ++j) {
      const GreatCircle& c = atlas.circles[atlas.circle_for(i, j)];
      audit.max_center_to_circle =
          std::max(audit.max_center_to_circle,
                   std::max(c.distance_to(atlas.centers[i]),
                            c.distance_to(atlas.centers[j])));
    }
  Rng cover = Rng::stage(seed, "atlas-cover");
  for (int i = 0; i < point_samples; ++i) {
    const Vec x = geom.sample(cover);
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec& c : atlas.centers)
      nearest = std::min(nearest, geom.distance(x, c));
    audit.coverage_worst = std::max(audit.coverage_worst, nearest);
  }
  Rng pairs = Rng::stage(seed, "atlas-pairs");
  for (int i = 0; i < pair_samples; ++i) {
    const Vec x = geom.sample(pairs);
    const Vec y = geom.sample(pairs);
    double best = std::numeric_limits<double>::infinity();
    for (const GreatCircle& c : atlas.circles)
      best = std::min(best, std::max(c.distance_to(x), c.distance_to(y)));
    audit.pair_cover_worst = std::max(audit.pair_cover_worst, best);
  }
  return audit;
}

// ----------------------------------------------------------------------------
// Torus: axis-parallel closed geodesics on shifted perpendicular grids.

struct TorusAtlas {
  TorusGeom geom;
  std::vector<TorusLine> lines;
  double R = 0.0;
  double min_line_distance = 0.0;
};

// One family of parallel lines per axis.  Per-axis fractional shifts keep
// lines from different families disjoint; within a family the grid spacing
// separates them.
inline TorusAtlas build_torus_atlas(const TorusGeom& geom,
                                    double spacing_target) {
  const int n = geom.n();
  if (n < 4) throw dimension_error("build_torus_atlas: n must be at least 4");
  if (!(spacing_target > 0.0))
    throw parameter_error("build_torus_atlas: spacing must be positive");
  TorusAtlas atlas;
  atlas.geom = geom;
  for (int axis = 0; axis < n; ++axis) {
    std::vector<int> counts(n, 1);
    for (int i = 0; i < n; ++i)
      if (i != axis)
        counts[i] = std::max(
            1, static_cast<int>(std::floor(geom.periods[i] / spacing_target)));
    const double shift = static_cast<double>(axis + 1) / (n + 1);
    std::vector<int> idx(n, 0);
    for (;;) {
      Vec base = Vec::Zero(n);
      for (int i = 0; i < n; ++i)
        if (i != axis)
          base[i] = (idx[i] + shift) * geom.periods[i] / counts[i];
      atlas.lines.push_back(TorusLine{axis, geom.wrap(base)});
      int carry = 0;
      while (carry < n) {
        if (carry == axis) {
          ++carry;
          continue;
        }
        if (++idx[carry] < counts[carry]) break;
        idx[carry] = 0;
        ++carry;
      }
      if (carry >= n) break;
    }
  }
  double dmin = std::numeric_limits<double>::infinity();
  double inj = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < atlas.lines.size(); ++a) {
    inj = std::min(inj, atlas.lines[a].tube_injectivity(geom));
    for (std::size_t b = a + 1; b < atlas.lines.size(); ++b)
      dmin = std::min(dmin,
                      line_distance(geom, atlas.lines[a], atlas.lines[b]));
  }
  if (!(dmin > 0.0))
    throw packing_error("build_torus_atlas: intersecting lines");
  atlas.min_line_distance = dmin;
  atlas.R = std::min(1.0, std::min(0.9 * inj, dmin / 3.0));
  return atlas;
}

}  // namespace warpcert
