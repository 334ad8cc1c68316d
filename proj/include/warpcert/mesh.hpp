#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <utility>
#include <vector>

#include "warpcert/common.hpp"
#include "warpcert/conformal.hpp"
#include "warpcert/geometry.hpp"
#include "warpcert/quadrature.hpp"
#include "warpcert/rng.hpp"

namespace warpcert {

inline Vec geo_interpolate(const SphereGeom& g, const Vec& a, const Vec& b,
                           double t) {
  return g.slerp(a, b, t);
}

inline Vec geo_interpolate(const TorusGeom& g, const Vec& a, const Vec& b,
                           double t) {
  return g.lerp(a, b, t);
}

// Orthonormal tangent basis from the QR complement of the position vector;
// no randomness, so relaxation sweeps are reproducible by construction.
inline Mat relaxation_basis(const SphereGeom&, const Vec& p) {
  const int ambient = static_cast<int>(p.size());
  Mat a(ambient, 1);
  a.col(0) = p;
  const Eigen::HouseholderQR<Mat> qr(a);
  const Mat q = qr.householderQ() * Mat::Identity(ambient, ambient);
  return q.rightCols(ambient - 1);
}

inline Mat relaxation_basis(const TorusGeom& g, const Vec&) {
  return Mat::Identity(g.n(), g.n());
}

inline Vec geo_shift(const SphereGeom&, const Vec& p, const Vec& dir,
                     double t) {
  Vec q = std::cos(t) * p + std::sin(t) * dir;
  return q / q.norm();
}

inline Vec geo_shift(const TorusGeom& g, const Vec& p, const Vec& dir,
                     double t) {
  return g.wrap(p + t * dir);
}

struct MeshOptions {
  int base_points = 3000;
  int neighbors = 24;
  double quad_rel = 1e-9;    // reported lengths
  int refine_subdivide = 2;  // midpoint splits after the graph stage
  int relax_sweeps = 8;      // shortening sweeps per refinement level
  int golden_iters = 12;
  double relax_tol = 1e-10;  // stop a level when a sweep gains less than this
};

struct OraclePath {
  std::vector<Vec> points;
  double length = 0.0;
  double graph_length = 0.0;  // Dijkstra value before shortening
};

// Conformal-distance oracle for the metric e^{2f} g0: shortest paths on a
// k-nearest-neighbor graph whose edge weights are conformal lengths of
// background geodesic segments, then polyline shortening in the conformal
// metric.  Query endpoints must be registered as anchors up front; anchor k
// is vertex k.
template <class Geom>
class ConformalMesh {
 public:
  ConformalMesh(Geom geom, ConformalFactor f, std::vector<Vec> anchors,
                std::uint64_t seed, MeshOptions opt = {})
      : geom_(std::move(geom)),
        f_(std::move(f)),
        opt_(opt),
        anchor_count_(static_cast<int>(anchors.size())) {
    if (opt_.base_points < 2)
      throw parameter_error("ConformalMesh: base_points must be at least 2");
    if (opt_.neighbors < 2)
      throw parameter_error("ConformalMesh: neighbors must be at least 2");
    vertices_ = std::move(anchors);
    vertices_.reserve(vertices_.size() + opt_.base_points);
    Rng rng = Rng::stage(seed, "mesh-points");
    for (int i = 0; i < opt_.base_points; ++i)
      vertices_.push_back(geom_.sample(rng));
    build_edges();
    check_connected();
  }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int anchor_count() const { return anchor_count_; }
  const Vec& vertex(int i) const {
    return vertices_[static_cast<std::size_t>(i)];
  }
  const Geom& geom() const { return geom_; }
  const ConformalFactor& factor() const { return f_; }

  // Conformal length of one background geodesic segment, to the reporting
  // tolerance.
  double segment_length(const Vec& a, const Vec& b) const {
    const double d0 = geom_.distance(a, b);
    if (d0 == 0.0) return 0.0;
    return d0 * integrate_relative(
                    [&](double t) {
                      return std::exp(f_(geo_interpolate(geom_, a, b, t)));
                    },
                    0.0, 1.0, opt_.quad_rel);
  }

  double polyline_length(const std::vector<Vec>& pts) const {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k)
      total += segment_length(pts[k], pts[k + 1]);
    return total;
  }

  double graph_distance(int a, int b) const {
    return dijkstra(a).first[static_cast<std::size_t>(b)];
  }

  const OraclePath& path(int a, int b) const {
    validate_vertex(a);
    validate_vertex(b);
    const auto key = std::minmax(a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    OraclePath out = shorten(a, b);
    return cache_.emplace(key, std::move(out)).first->second;
  }

  double distance(int a, int b) const {
    if (a == b) return 0.0;
    return path(a, b).length;
  }

 private:
  void validate_vertex(int i) const {
    if (i < 0 || i >= vertex_count())
      throw mesh_error("ConformalMesh: vertex id out of range");
  }

  void build_edges() {
    const int v = vertex_count();
    const int k = std::min(opt_.neighbors, v - 1);
    std::vector<std::pair<int, int>> undirected;
    undirected.reserve(static_cast<std::size_t>(v) * k);
    std::vector<std::pair<double, int>> order(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) {
      for (int j = 0; j < v; ++j)
        order[static_cast<std::size_t>(j)] = {
            j == i ? std::numeric_limits<double>::infinity()
                   : geom_.distance(vertices_[static_cast<std::size_t>(i)],
                                    vertices_[static_cast<std::size_t>(j)]),
            j};
      std::partial_sort(order.begin(), order.begin() + k, order.end());
      for (int t = 0; t < k; ++t) {
        const int j = order[static_cast<std::size_t>(t)].second;
        undirected.emplace_back(std::min(i, j), std::max(i, j));
      }
    }
    std::sort(undirected.begin(), undirected.end());
    undirected.erase(std::unique(undirected.begin(), undirected.end()),
                     undirected.end());
    adjacency_.assign(static_cast<std::size_t>(v), {});
    for (const auto& [i, j] : undirected) {
      const double w = segment_length(vertices_[static_cast<std::size_t>(i)],
                                      vertices_[static_cast<std::size_t>(j)]);
      adjacency_[static_cast<std::size_t>(i)].emplace_back(j, w);
      adjacency_[static_cast<std::size_t>(j)].emplace_back(i, w);
    }
  }

  void check_connected() const {
    const int v = vertex_count();
    std::vector<char> seen(static_cast<std::size_t>(v), 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (const auto& [j, w] : adjacency_[static_cast<std::size_t>(i)]) {
        (void)w;
        if (!seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          ++reached;
          stack.push_back(j);
        }
      }
    }
    if (reached != v)
      throw mesh_error(
          "ConformalMesh: graph is disconnected; raise base_points or "
          "neighbors");
  }

  std::pair<std::vector<double>, std::vector<int>> dijkstra(int source) const {
    const int v = vertex_count();
    std::vector<double> dist(static_cast<std::size_t>(v),
                             std::numeric_limits<double>::infinity());
    std::vector<int> parent(static_cast<std::size_t>(v), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
    dist[static_cast<std::size_t>(source)] = 0.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      const auto [d, i] = queue.top();
      queue.pop();
      if (d > dist[static_cast<std::size_t>(i)]) continue;
      for (const auto& [j, w] : adjacency_[static_cast<std::size_t>(i)]) {
        const double nd = d + w;
        if (nd < dist[static_cast<std::size_t>(j)]) {
          dist[static_cast<std::size_t>(j)] = nd;
          parent[static_cast<std::size_t>(j)] = i;
          queue.emplace(nd, j);
        }
      }
    }
    return {std::move(dist), std::move(parent)};
  }

  double fast_segment(const Vec& a, const Vec& b) const {
    const double d0 = geom_.distance(a, b);
    if (d0 == 0.0) return 0.0;
    return d0 * integrate_gauss_fast(
                    [&](double t) {
                      return std::exp(f_(geo_interpolate(geom_, a, b, t)));
                    },
                    0.0, 1.0);
  }

  OraclePath shorten(int a, int b) const {
    const auto [dist, parent] = dijkstra(a);
    if (!std::isfinite(dist[static_cast<std::size_t>(b)]))
      throw mesh_error("ConformalMesh: endpoints are disconnected");
    OraclePath out;
    out.graph_length = dist[static_cast<std::size_t>(b)];
    std::vector<Vec> pts;
    for (int i = b; i != -1; i = parent[static_cast<std::size_t>(i)])
      pts.push_back(vertices_[static_cast<std::size_t>(i)]);
    std::reverse(pts.begin(), pts.end());
    for (int level = 0; level <= opt_.refine_subdivide; ++level) {
      if (level > 0) pts = subdivide(pts);
      relax(pts);
    }
    out.length = polyline_length(pts);
    out.points = std::move(pts);
    return out;
  }

  std::vector<Vec> subdivide(const std::vector<Vec>& pts) const {
    std::vector<Vec> out;
    out.reserve(pts.size() * 2);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      out.push_back(pts[k]);
      out.push_back(geo_interpolate(geom_, pts[k], pts[k + 1], 0.5));
    }
    out.push_back(pts.back());
    return out;
  }

  // One coordinate-descent pass per interior point: golden-section along
  // each tangent direction of the local two-segment length.
  void relax(std::vector<Vec>& pts) const {
    if (pts.size() < 3) return;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double previous = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < opt_.relax_sweeps; ++sweep) {
      double total = 0.0;
      for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
        const Vec& prev = pts[k - 1];
        const Vec& next = pts[k + 1];
        const double scale =
            0.5 * std::min(geom_.distance(prev, pts[k]),
                           geom_.distance(pts[k], next)) +
            1e-12;
        const Mat basis = relaxation_basis(geom_, pts[k]);
        const int dirs = static_cast<int>(basis.cols());
        for (int dcol = 0; dcol < dirs; ++dcol) {
          const Vec dir = basis.col(dcol);
          const Vec here = pts[k];
          auto local = [&](double t) {
            const Vec q = geo_shift(geom_, here, dir, t);
            return fast_segment(prev, q) + fast_segment(q, next);
          };
          double lo = -scale, hi = scale;
          double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
          double f1 = local(x1), f2 = local(x2);
          for (int it = 0; it < opt_.golden_iters; ++it) {
            if (f1 < f2) {
              hi = x2;
              x2 = x1;
              f2 = f1;
              x1 = hi - gr * (hi - lo);
              f1 = local(x1);
            } else {
              lo = x1;
              x1 = x2;
              f1 = f2;
              x2 = lo + gr * (hi - lo);
              f2 = local(x2);
            }
          }
          const double best = f1 < f2 ? x1 : x2;
          pts[k] = geo_shift(geom_, here, dir, best);
        }
        total += fast_segment(prev, pts[k]);
      }
      total += fast_segment(pts[pts.size() - 2], pts.back());
      if (previous - total < opt_.relax_tol) break;
      previous = total;
    }
  }

  Geom geom_;
  ConformalFactor f_;
  MeshOptions opt_;
  int anchor_count_ = 0;
  std::vector<Vec> vertices_;
  std::vector<std::vector<std::pair<int, double>>> adjacency_;
  mutable std::map<std::pair<int, int>, OraclePath> cache_;
};

struct TriangleAudit {
  int triples = 0;
  double worst_violation = 0.0;  // d(a,c) - d(a,b) - d(b,c), positive is bad
  double tolerance = 0.0;
  bool pass = false;
};

// Graph shortest-path distances form a metric by construction, so the graph
// audit runs at roundoff tolerance; the shortened oracle is checked more
// loosely because each path is an independent upper approximation.
template <class Geom>
TriangleAudit audit_graph_triangles(const ConformalMesh<Geom>& mesh,
                                    std::uint64_t seed, int triples = 1000) {
  TriangleAudit out;
  out.triples = triples;
  out.tolerance = 1e-9;
  Rng rng = Rng::stage(seed, "mesh-triangles");
  const auto v = static_cast<std::uint64_t>(mesh.vertex_count());
  for (int t = 0; t < triples; ++t) {
    const int a = static_cast<int>(rng.integer(v));
    const int b = static_cast<int>(rng.integer(v));
    const int c = static_cast<int>(rng.integer(v));
    const double ab = mesh.graph_distance(a, b);
    const double bc = mesh.graph_distance(b, c);
    const double ac = mesh.graph_distance(a, c);
    out.worst_violation = std::max(out.worst_violation, ac - ab - bc);
  }
  out.pass = out.worst_violation <= out.tolerance;
  return out;
}

template <class Geom>
TriangleAudit audit_oracle_triangles(const ConformalMesh<Geom>& mesh,
                                     std::uint64_t seed, int triples = 64,
                                     double rel_tol = 1e-3) {
  TriangleAudit out;
  out.triples = triples;
  Rng rng = Rng::stage(seed, "oracle-triangles");
  const auto v = static_cast<std::uint64_t>(mesh.vertex_count());
  double scale = 0.0;
  for (int t = 0; t < triples; ++t) {
    const int a = static_cast<int>(rng.integer(v));
    const int b = static_cast<int>(rng.integer(v));
    const int c = static_cast<int>(rng.integer(v));
    const double ab = mesh.distance(a, b);
    const double bc = mesh.distance(b, c);
    const double ac = mesh.distance(a, c);
    out.worst_violation = std::max(out.worst_violation, ac - ab - bc);
    scale = std::max(scale, ac);
  }
  out.tolerance = rel_tol * std::max(scale, 1e-12);
  out.pass = out.worst_violation <= out.tolerance;
  return out;
}

}  // namespace warpcert
