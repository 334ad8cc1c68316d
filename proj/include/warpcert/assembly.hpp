#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "warpcert/common.hpp"
#include "warpcert/conformal.hpp"
#include "warpcert/curvature.hpp"
#include "warpcert/fd_oracle.hpp"
#include "warpcert/geometry.hpp"
#include "warpcert/packing.hpp"
#include "warpcert/profiles.hpp"
#include "warpcert/quadrature.hpp"
#include "warpcert/rng.hpp"

namespace warpcert {

inline std::uint64_t point_hash(const Vec& p) {
  const std::string bytes(reinterpret_cast<const char*>(p.data()),
                          static_cast<std::size_t>(p.size()) * sizeof(double));
  return fnv1a(bytes);
}

// Orthonormal basis of the tangent space at a unit-sphere point; the stream
// is keyed on (point, seed), so repeated calls agree bit for bit.
inline Mat sphere_tangent_frame(const Vec& p, std::uint64_t seed) {
  const int ambient = static_cast<int>(p.size());
  const int n = ambient - 1;
  Rng rng(seed ^ point_hash(p));
  Mat frame(ambient, n);
  int placed = 0;
  while (placed < n) {
    Vec w = rng.unit_vector(ambient);
    w -= p.dot(w) * p;
    for (int k = 0; k < placed; ++k) w -= frame.col(k).dot(w) * frame.col(k);
    const double norm = w.norm();
    if (norm < 1e-6) continue;
    frame.col(placed++) = w / norm;
  }
  return frame;
}

// Orthonormal basis of R^dim, keyed the same way; torus tangent spaces are
// all of R^dim, so no projection step is needed.
inline Mat euclidean_frame(int dim, const Vec& p, std::uint64_t seed) {
  Rng rng(seed ^ point_hash(p));
  Mat frame(dim, dim);
  int placed = 0;
  while (placed < dim) {
    Vec w = rng.unit_vector(dim);
    for (int k = 0; k < placed; ++k) w -= frame.col(k).dot(w) * frame.col(k);
    const double norm = w.norm();
    if (norm < 1e-6) continue;
    frame.col(placed++) = w / norm;
  }
  return frame;
}

// Metric tensor sampled at one point: components in a declared frame whose
// columns are orthonormal for the background metric.
struct BilinearForm {
  Vec point;
  Mat frame;       // ambient rows, one column per tangent direction
  Mat components;  // symmetric, frame^T G frame
};

inline BilinearForm form_in_frame(const Mat& ambient_form, const Vec& point,
                                  Mat frame) {
  BilinearForm out;
  out.point = point;
  Mat c = frame.transpose() * ambient_form * frame;
  out.components = 0.5 * (c + c.transpose());
  out.frame = std::move(frame);
  return out;
}

// One warped tube glued into the round sphere.  The ambient form acts on
// ambient vectors; tangency to the sphere is the caller's concern.  Off the
// tube the form is the exact identity, bit for bit.
class SphereBlock {
 public:
  SphereBlock(GreatCircle circle, WarpProfile warp, BetaProfile beta,
              DeltaCertificate cert)
      : tube_{std::move(circle)},
        engine_(std::move(warp), std::move(beta)),
        cert_(cert) {
    if (engine_.layout().variant != Variant::sphere)
      throw construction_error("SphereBlock: profiles must be sphere-variant");
  }

  const GreatCircle& circle() const { return tube_.circle; }
  const SphereTube& tube() const { return tube_; }
  const CurvatureEngine& engine() const { return engine_; }
  const ZoneLayout& layout() const { return engine_.layout(); }
  const DeltaCertificate& delta_certificate() const { return cert_; }

  // Same code path as ambient_form's inside test, so cover decisions and
  // metric values can never disagree at boundary roundoff.
  double radius_at(const Vec& p) const { return tube_.coords(p).r; }

  bool covers(const Vec& p) const { return radius_at(p) < layout().R; }

  Mat ambient_form(const Vec& p) const {
    const int ambient = static_cast<int>(p.size());
    Mat form = Mat::Identity(ambient, ambient);
    const TubeCoords tc = tube_.coords(p);
    const ZoneLayout& z = layout();
    if (!(tc.r < z.R)) return form;
    // s is always defined here: r < R < pi/2 keeps the circle projection
    // away from zero.
    const double beta = engine_.beta().jet(tc.s, tc.r).y;
    const double cr = std::cos(tc.r);
    const double lam_s = std::exp(2.0 * beta) / (cr * cr);
    const Vec es = tube_.angular_direction(tc.s);
    form.noalias() += (lam_s - 1.0) * (es * es.transpose());
    if (tc.x_defined) {
      const double alpha = engine_.warp().alpha(tc.r);
      const Vec er = tube_.radial_direction(tc.r, tc.x, tc.s);
      form.noalias() += (1.0 / alpha - 1.0) * (er * er.transpose());
    }
    // Radii below the chart resolution (x undefined) fall back to the core
    // extension, where the radial factor is one.
    return form;
  }

  BilinearForm metric_at(const Vec& p, std::uint64_t seed) const {
    return form_in_frame(ambient_form(p), p, sphere_tangent_frame(p, seed));
  }

  // Unit vector orthogonal to the spanning plane; deterministic pick for
  // witness points.
  Vec fiber_direction() const {
    const int ambient = static_cast<int>(tube_.circle.u.size());
    for (int j = 0; j < ambient; ++j) {
      Vec w = Vec::Zero(ambient);
      w[j] = 1.0;
      w -= w.dot(tube_.circle.u) * tube_.circle.u;
      w -= w.dot(tube_.circle.v) * tube_.circle.v;
      const double norm = w.norm();
      if (norm > 0.5) return w / norm;
    }
    throw construction_error("SphereBlock: no fiber direction found");
  }

  Vec fiber_sample(Rng& rng) const {
    const int ambient = static_cast<int>(tube_.circle.u.size());
    for (;;) {
      Vec w = rng.unit_vector(ambient);
      w -= w.dot(tube_.circle.u) * tube_.circle.u;
      w -= w.dot(tube_.circle.v) * tube_.circle.v;
      const double norm = w.norm();
      if (norm > 1e-8) return w / norm;
    }
  }

 private:
  SphereTube tube_;
  CurvatureEngine engine_;
  DeltaCertificate cert_;
};

// Torus analogue around an axis-parallel closed geodesic.
class TorusBlock {
 public:
  TorusBlock(TorusGeom geom, TorusLine line, WarpProfile warp, BetaProfile beta,
             DeltaCertificate cert)
      : geom_(std::move(geom)),
        line_(std::move(line)),
        engine_(std::move(warp), std::move(beta)),
        cert_(cert) {
    if (engine_.layout().variant != Variant::torus)
      throw construction_error("TorusBlock: profiles must be torus-variant");
    if (!(engine_.layout().R <= line_.tube_injectivity(geom_)))
      throw construction_error("TorusBlock: tube exceeds the embedded radius");
  }

  const TorusGeom& geom() const { return geom_; }
  const TorusLine& line() const { return line_; }
  const CurvatureEngine& engine() const { return engine_; }
  const ZoneLayout& layout() const { return engine_.layout(); }
  const DeltaCertificate& delta_certificate() const { return cert_; }

  double radius_at(const Vec& p) const { return line_.coords(geom_, p).r; }

  bool covers(const Vec& p) const { return radius_at(p) < layout().R; }

  Mat ambient_form(const Vec& p) const {
    const int n = geom_.n();
    Mat form = Mat::Identity(n, n);
    const TubeCoords tc = line_.coords(geom_, p);
    const ZoneLayout& z = layout();
    if (!(tc.r < z.R)) return form;
    const double beta = engine_.beta().jet(tc.s, tc.r).y;
    form(line_.axis, line_.axis) += std::exp(2.0 * beta) - 1.0;
    if (tc.x_defined) {
      const double alpha = engine_.warp().alpha(tc.r);
      form.noalias() += (1.0 / alpha - 1.0) * (tc.x * tc.x.transpose());
    }
    return form;
  }

  BilinearForm metric_at(const Vec& p, std::uint64_t seed) const {
    return form_in_frame(ambient_form(p), p,
                         euclidean_frame(geom_.n(), p, seed));
  }

  Vec fiber_direction() const {
    const int n = geom_.n();
    Vec w = Vec::Zero(n);
    w[(line_.axis + 1) % n] = 1.0;
    return w;
  }

  Vec fiber_sample(Rng& rng) const {
    const int n = geom_.n();
    for (;;) {
      Vec w(n);
      for (int i = 0; i < n; ++i) w[i] = rng.normal();
      w[line_.axis] = 0.0;
      const double norm = w.norm();
      if (norm > 1e-8) return w / norm;
    }
  }

 private:
  TorusGeom geom_;
  TorusLine line_;
  CurvatureEngine engine_;
  DeltaCertificate cert_;
};

// Fixed-radius constructor; the caller has already settled the tube radius.
// The conformal factor must be normalized (sup f = -1).
inline SphereBlock make_sphere_block(const GreatCircle& circle,
                                     const ConformalFactor& f, double f_bar,
                                     double epsilon, double R,
                                     DeltaGrid grid = {}) {
  if (!(f.sup <= -1.0 + 1e-12))
    throw parameter_error("make_sphere_block: factor must satisfy sup f = -1");
  if (!(f_bar >= 1.0))
    throw parameter_error("make_sphere_block: f_bar must be at least 1");
  const int n = static_cast<int>(circle.u.size()) - 1;
  auto core = [circle, value = f.value](double s) {
    return value(circle.point(s));
  };
  const double circ = circle.circumference();
  const DeltaCertificate cert =
      certify_delta(Variant::sphere, n, epsilon, R, core, circ, f_bar, grid);
  WarpProfile warp =
      build_warp_profile(Variant::sphere, epsilon, R, cert.delta, n);
  BetaProfile beta =
      build_beta(Variant::sphere, CutoffPhi(cert.delta, R), core, circ);
  return SphereBlock(circle, std::move(warp), std::move(beta), cert);
}

inline TorusBlock make_torus_block(const TorusGeom& geom, const TorusLine& line,
                                   const ConformalFactor& f, double f_bar,
                                   double epsilon, double R,
                                   DeltaGrid grid = {}) {
  if (!(f.sup <= -1.0 + 1e-12))
    throw parameter_error("make_torus_block: factor must satisfy sup f = -1");
  if (!(f_bar >= 1.0))
    throw parameter_error("make_torus_block: f_bar must be at least 1");
  auto core = [geom, line, value = f.value](double s) {
    return value(line.point(geom, s));
  };
  const double circ = line.circumference(geom);
  const DeltaCertificate cert = certify_delta(Variant::torus, geom.n(), epsilon,
                                              R, core, circ, f_bar, grid);
  WarpProfile warp =
      build_warp_profile(Variant::torus, epsilon, R, cert.delta, geom.n());
  BetaProfile beta =
      build_beta(Variant::torus, CutoffPhi(cert.delta, R), core, circ);
  return TorusBlock(geom, line, std::move(warp), std::move(beta), cert);
}

// Shrinks a candidate tube radius until pairs closer than the radius cannot
// move f across half log(1+epsilon); errors out below the floor instead of
// silently building a useless tube.
inline double admissible_tube_radius(double candidate, double floor,
                                     double measured, const char* who) {
  if (measured < floor)
    throw construction_error(std::string(who) +
                             ": tube radius fell below the floor; the "
                             "conformal factor varies too fast at this "
                             "epsilon");
  return std::min(candidate, measured);
}

inline SphereBlock build_sphere_block(const SphereGeom& geom,
                                      const GreatCircle& circle,
                                      const ConformalFactor& f, double f_bar,
                                      double epsilon, double R_cap,
                                      std::uint64_t seed,
                                      double R_floor = 1e-6,
                                      DeltaGrid grid = {}) {
  double R = std::min(R_cap, 0.0099);
  if (!(R > 0.0))
    throw parameter_error("build_sphere_block: radius cap must be positive");
  R = admissible_tube_radius(
      R, R_floor, uniform_continuity_radius(geom, f, epsilon, R, seed),
      "build_sphere_block");
  return make_sphere_block(circle, f, f_bar, epsilon, R, grid);
}

inline TorusBlock build_torus_block(const TorusGeom& geom,
                                    const TorusLine& line,
                                    const ConformalFactor& f, double f_bar,
                                    double epsilon, double R_cap,
                                    std::uint64_t seed, double R_floor = 1e-6,
                                    DeltaGrid grid = {}) {
  double R = std::min({R_cap, 1.0, line.tube_injectivity(geom)});
  if (!(R > 0.0))
    throw parameter_error("build_torus_block: radius cap must be positive");
  R = admissible_tube_radius(
      R, R_floor, uniform_continuity_radius(geom, f, epsilon, R, seed),
      "build_torus_block");
  return make_torus_block(geom, line, f, f_bar, epsilon, R, grid);
}

// Conformal approximant on the whole sphere: identity background plus one
// warped block per atlas circle, supports pairwise disjoint.
class AssembledSphere {
 public:
  AssembledSphere(SphereGeom geom, PackedAtlas atlas,
                  std::vector<SphereBlock> blocks, ConformalFactor f,
                  double f_bar, double epsilon)
      : geom_(geom),
        atlas_(std::move(atlas)),
        blocks_(std::move(blocks)),
        f_(std::move(f)),
        f_bar_(f_bar),
        epsilon_(epsilon) {
    if (blocks_.size() != atlas_.circles.size())
      throw construction_error("AssembledSphere: one block per circle");
    if (blocks_.empty())
      throw construction_error("AssembledSphere: needs at least one block");
    for (const SphereBlock& b : blocks_) {
      if (!(b.layout().R <= atlas_.R * (1.0 + 1e-12)))
        throw construction_error(
            "AssembledSphere: block radius exceeds the atlas separation");
      if (b.layout().epsilon != epsilon_)
        throw construction_error("AssembledSphere: epsilon mismatch");
    }
  }

  Variant variant() const { return Variant::sphere; }
  const SphereGeom& geom() const { return geom_; }
  const PackedAtlas& atlas() const { return atlas_; }
  const ConformalFactor& factor() const { return f_; }
  double f_bar() const { return f_bar_; }
  double epsilon() const { return epsilon_; }
  int ambient_dim() const { return geom_.ambient(); }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const SphereBlock& block(int i) const {
    return blocks_[static_cast<std::size_t>(i)];
  }

  int count_active(const Vec& p) const {
    int active = 0;
    for (const SphereBlock& b : blocks_)
      if (b.covers(p)) ++active;
    return active;
  }

  // First covering block; disjointness of the supports is certified
  // separately, not assumed here.
  int active_block(const Vec& p) const {
    for (int i = 0; i < block_count(); ++i)
      if (blocks_[static_cast<std::size_t>(i)].covers(p)) return i;
    return -1;
  }

  Mat ambient_form(const Vec& p) const {
    const int i = active_block(p);
    if (i < 0)
      return Mat::Identity(ambient_dim(), ambient_dim());
    return blocks_[static_cast<std::size_t>(i)].ambient_form(p);
  }

  BilinearForm metric_at(const Vec& p, std::uint64_t seed) const {
    return form_in_frame(ambient_form(p), p, sphere_tangent_frame(p, seed));
  }

  Vec sample_ambient(Rng& rng) const { return geom_.sample(rng); }

  Vec block_interior_sample(int i, Rng& rng) const {
    const SphereBlock& b = block(i);
    const double r = b.layout().R * rng.uniform();
    const double s = rng.uniform(0.0, b.circle().circumference());
    return b.tube().from_coords(r, b.fiber_sample(rng), s);
  }

  // Point just outside the tube; the margin clears the chart roundtrip error
  // so the cover test cannot flip back inside.
  Vec block_shell_sample(int i, Rng& rng) const {
    const SphereBlock& b = block(i);
    const double r = b.layout().R + 1e-12 + b.layout().R * rng.uniform();
    const double s = rng.uniform(0.0, b.circle().circumference());
    return b.tube().from_coords(r, b.fiber_sample(rng), s);
  }

  Vec block_point(int i, double r, double s) const {
    const SphereBlock& b = block(i);
    return b.tube().from_coords(r, b.fiber_direction(), s);
  }

  Vec core_point(int i, double s) const { return block(i).circle().point(s); }

  Vec core_velocity(int i, double s) const {
    return block(i).tube().angular_direction(s);
  }

 private:
  SphereGeom geom_;
  PackedAtlas atlas_;
  std::vector<SphereBlock> blocks_;
  ConformalFactor f_;
  double f_bar_;
  double epsilon_;
};

class AssembledTorus {
 public:
  AssembledTorus(TorusAtlas atlas, std::vector<TorusBlock> blocks,
                 ConformalFactor f, double f_bar, double epsilon)
      : atlas_(std::move(atlas)),
        blocks_(std::move(blocks)),
        f_(std::move(f)),
        f_bar_(f_bar),
        epsilon_(epsilon) {
    if (blocks_.size() != atlas_.lines.size())
      throw construction_error("AssembledTorus: one block per line");
    if (blocks_.empty())
      throw construction_error("AssembledTorus: needs at least one block");
    for (const TorusBlock& b : blocks_) {
      if (!(b.layout().R <= atlas_.R * (1.0 + 1e-12)))
        throw construction_error(
            "AssembledTorus: block radius exceeds the atlas separation");
      if (b.layout().epsilon != epsilon_)
        throw construction_error("AssembledTorus: epsilon mismatch");
    }
  }

  Variant variant() const { return Variant::torus; }
  const TorusGeom& geom() const { return atlas_.geom; }
  const TorusAtlas& atlas() const { return atlas_; }
  const ConformalFactor& factor() const { return f_; }
  double f_bar() const { return f_bar_; }
  double epsilon() const { return epsilon_; }
  int ambient_dim() const { return atlas_.geom.n(); }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const TorusBlock& block(int i) const {
    return blocks_[static_cast<std::size_t>(i)];
  }

  int count_active(const Vec& p) const {
    int active = 0;
    for (const TorusBlock& b : blocks_)
      if (b.covers(p)) ++active;
    return active;
  }

  int active_block(const Vec& p) const {
    for (int i = 0; i < block_count(); ++i)
      if (blocks_[static_cast<std::size_t>(i)].covers(p)) return i;
    return -1;
  }

  Mat ambient_form(const Vec& p) const {
    const int i = active_block(p);
    if (i < 0)
      return Mat::Identity(ambient_dim(), ambient_dim());
    return blocks_[static_cast<std::size_t>(i)].ambient_form(p);
  }

  BilinearForm metric_at(const Vec& p, std::uint64_t seed) const {
    return form_in_frame(ambient_form(p), p,
                         euclidean_frame(ambient_dim(), p, seed));
  }

  Vec sample_ambient(Rng& rng) const { return atlas_.geom.sample(rng); }

  Vec block_interior_sample(int i, Rng& rng) const {
    const TorusBlock& b = block(i);
    const double r = b.layout().R * rng.uniform();
    const double s = rng.uniform(0.0, b.line().circumference(atlas_.geom));
    return b.line().from_coords(atlas_.geom, r, b.fiber_sample(rng), s);
  }

  Vec block_shell_sample(int i, Rng& rng) const {
    const TorusBlock& b = block(i);
    const double R = b.layout().R;
    const double room = b.line().tube_injectivity(atlas_.geom) - R;
    const double width = std::max(0.0, std::min(R, 0.9 * room));
    const double r = R + 1e-12 + width * rng.uniform();
    const double s = rng.uniform(0.0, b.line().circumference(atlas_.geom));
    return b.line().from_coords(atlas_.geom, r, b.fiber_sample(rng), s);
  }

  Vec block_point(int i, double r, double s) const {
    const TorusBlock& b = block(i);
    return b.line().from_coords(atlas_.geom, r, b.fiber_direction(), s);
  }

  Vec core_point(int i, double s) const {
    return block(i).line().point(atlas_.geom, s);
  }

  Vec core_velocity(int i, double) const {
    Vec v = Vec::Zero(ambient_dim());
    v[block(i).line().axis] = 1.0;
    return v;
  }

 private:
  TorusAtlas atlas_;
  std::vector<TorusBlock> blocks_;
  ConformalFactor f_;
  double f_bar_;
  double epsilon_;
};

// All blocks share one tube radius, so the atlas separation guarantees
// disjoint supports; the radius is reduced once for the continuity modulus
// of f and reused by every block.
inline AssembledSphere assemble_sphere(const SphereGeom& geom,
                                       const PackedAtlas& atlas,
                                       const ConformalFactor& f, double f_bar,
                                       double epsilon, std::uint64_t seed,
                                       double R_floor = 1e-6,
                                       DeltaGrid grid = {}) {
  if (atlas.circles.empty())
    throw parameter_error("assemble_sphere: atlas has no circles");
  double R = std::min(atlas.R, 0.0099);
  if (!(R > 0.0))
    throw parameter_error("assemble_sphere: atlas radius must be positive");
  R = admissible_tube_radius(
      R, R_floor, uniform_continuity_radius(geom, f, epsilon, R, seed),
      "assemble_sphere");
  std::vector<SphereBlock> blocks;
  blocks.reserve(atlas.circles.size());
  for (const GreatCircle& c : atlas.circles)
    blocks.push_back(make_sphere_block(c, f, f_bar, epsilon, R, grid));
  return AssembledSphere(geom, atlas, std::move(blocks), f, f_bar, epsilon);
}

inline AssembledTorus assemble_torus(const TorusAtlas& atlas,
                                     const ConformalFactor& f, double f_bar,
                                     double epsilon, std::uint64_t seed,
                                     double R_floor = 1e-6,
                                     DeltaGrid grid = {}) {
  if (atlas.lines.empty())
    throw parameter_error("assemble_torus: atlas has no lines");
  double R = std::min(atlas.R, 1.0);
  if (!(R > 0.0))
    throw parameter_error("assemble_torus: atlas radius must be positive");
  R = admissible_tube_radius(
      R, R_floor,
      uniform_continuity_radius(atlas.geom, f, epsilon, R, seed),
      "assemble_torus");
  std::vector<TorusBlock> blocks;
  blocks.reserve(atlas.lines.size());
  for (const TorusLine& line : atlas.lines)
    blocks.push_back(make_torus_block(atlas.geom, line, f, f_bar, epsilon, R,
                                      grid));
  return AssembledTorus(atlas, std::move(blocks), f, f_bar, epsilon);
}

// Single-block views used by the block-level certificates.
inline AssembledSphere single_sphere_block(const SphereGeom& geom,
                                           SphereBlock block,
                                           const ConformalFactor& f,
                                           double f_bar, double epsilon) {
  PackedAtlas atlas;
  atlas.n = geom.n;
  atlas.eta = 0.0;
  atlas.circles = {block.circle()};
  atlas.R = block.layout().R;
  std::vector<SphereBlock> blocks;
  blocks.push_back(std::move(block));
  return AssembledSphere(geom, atlas, std::move(blocks), f, f_bar, epsilon);
}

inline AssembledTorus single_torus_block(TorusBlock block,
                                         const ConformalFactor& f,
                                         double f_bar, double epsilon) {
  TorusAtlas atlas;
  atlas.geom = block.geom();
  atlas.lines = {block.line()};
  atlas.R = block.layout().R;
  std::vector<TorusBlock> blocks;
  blocks.push_back(std::move(block));
  return AssembledTorus(atlas, std::move(blocks), f, f_bar, epsilon);
}

struct CertBudget {
  int scalar_radial = 400;
  int scalar_angular = 400;
  int eig_samples = 10000;
  int outside_samples = 1000;
  int shell_samples = 500;
  int support_samples = 2000;
  int core_samples = 512;
  double eig_tol = 1e-12;
  double core_tol = 1e-8;
  double sandwich_tol = 1e-9;
};

// Pointwise certificates for one assembled metric:
//   scalar:   curvature floor on per-block zone grids
//   outside:  exact background off the tubes, bitwise
//   upper:    (1+eps) g0 - g positive semidefinite
//   lower:    (1+eps) g - e^{2f} g0 positive semidefinite
//   core:     axis circles carry the conformal length element e^f; evaluated
//             through the chart limit r -> 0, since the cutoff scale of a
//             certified block sits below double resolution
//   sandwich: bi-Lipschitz bracket against the background
//   support:  at most one tube covers any sampled point
struct MetricCertificate {
  Variant variant = Variant::sphere;
  double epsilon = 0.0;
  double f_bar = 1.0;
  int blocks = 0;

  double scalar_floor = 0.0;
  double min_scalar = std::numeric_limits<double>::infinity();
  int scalar_block = -1;
  double scalar_r = 0.0;
  double scalar_s = 0.0;

  double max_outside_deviation = 0.0;
  int outside_samples = 0;

  double min_eig_upper = std::numeric_limits<double>::infinity();
  double min_eig_lower = std::numeric_limits<double>::infinity();
  int eig_samples = 0;

  double max_core_pointwise = 0.0;
  double max_core_length_gap = 0.0;

  double min_form_eigenvalue = std::numeric_limits<double>::infinity();
  double max_form_eigenvalue = 0.0;
  double bilipschitz_constant = 0.0;

  int max_active = 0;

  double eig_tol = 1e-12;
  double core_tol = 1e-8;
  double sandwich_tol = 1e-9;

  bool scalar_ok = false;
  bool outside_ok = false;
  bool upper_ok = false;
  bool lower_ok = false;
  bool core_ok = false;
  bool sandwich_ok = false;
  bool support_ok = false;

  bool pass() const {
    return scalar_ok && outside_ok && upper_ok && lower_ok && core_ok &&
           sandwich_ok && support_ok;
  }
};

template <class Metric>
MetricCertificate certify_metric_properties(const Metric& m,
                                            std::uint64_t seed,
                                            CertBudget budget = {}) {
  MetricCertificate cert;
  cert.variant = m.variant();
  cert.epsilon = m.epsilon();
  cert.f_bar = m.f_bar();
  cert.blocks = m.block_count();
  cert.eig_tol = budget.eig_tol;
  cert.core_tol = budget.core_tol;
  cert.sandwich_tol = budget.sandwich_tol;
  cert.scalar_floor = cert.variant == Variant::sphere ? 0.0 : -cert.epsilon;
  const double one_eps = 1.0 + cert.epsilon;
  cert.bilipschitz_constant =
      std::max(one_eps, one_eps * std::exp(2.0 * cert.f_bar));
  const ConformalFactor& f = m.factor();

  for (int i = 0; i < cert.blocks; ++i) {
    const ScalarScan scan = m.block(i).engine().scan_scalar(
        budget.scalar_radial, budget.scalar_angular);
    if (scan.min_scalar < cert.min_scalar) {
      cert.min_scalar = scan.min_scalar;
      cert.scalar_block = i;
      cert.scalar_r = scan.worst_r;
      cert.scalar_s = scan.worst_s;
    }
  }
  cert.scalar_ok = cert.variant == Variant::sphere
                       ? cert.min_scalar > cert.scalar_floor
                       : cert.min_scalar >= cert.scalar_floor;

  Rng eig_rng = Rng::stage(seed, "cert-eig");
  for (int j = 0; j < budget.eig_samples; ++j) {
    const int i = cert.blocks == 1
                      ? 0
                      : static_cast<int>(eig_rng.integer(
                            static_cast<std::uint64_t>(cert.blocks)));
    const Vec p = m.block_interior_sample(i, eig_rng);
    cert.max_active = std::max(cert.max_active, m.count_active(p));
    const BilinearForm bf = m.metric_at(p, seed);
    const int d = static_cast<int>(bf.components.cols());
    const Eigen::SelfAdjointEigenSolver<Mat> own(bf.components,
                                                 Eigen::EigenvaluesOnly);
    cert.min_form_eigenvalue =
        std::min(cert.min_form_eigenvalue, own.eigenvalues()(0));
    cert.max_form_eigenvalue =
        std::max(cert.max_form_eigenvalue, own.eigenvalues()(d - 1));
    const Mat upper = one_eps * Mat::Identity(d, d) - bf.components;
    const Eigen::SelfAdjointEigenSolver<Mat> eu(upper, Eigen::EigenvaluesOnly);
    cert.min_eig_upper = std::min(cert.min_eig_upper, eu.eigenvalues()(0));
    const double target = std::exp(2.0 * f(p));
    const Mat lower = one_eps * bf.components - target * Mat::Identity(d, d);
    const Eigen::SelfAdjointEigenSolver<Mat> el(lower, Eigen::EigenvaluesOnly);
    cert.min_eig_lower = std::min(cert.min_eig_lower, el.eigenvalues()(0));
  }
  cert.eig_samples = budget.eig_samples;
  cert.upper_ok = cert.min_eig_upper >= -budget.eig_tol;
  cert.lower_ok = cert.min_eig_lower >= -budget.eig_tol;

  Rng out_rng = Rng::stage(seed, "cert-outside");
  const Mat identity = Mat::Identity(m.ambient_dim(), m.ambient_dim());
  int outside_seen = 0;
  auto check_outside = [&](const Vec& p) {
    ++outside_seen;
    const double dev = (m.ambient_form(p) - identity).cwiseAbs().maxCoeff();
    cert.max_outside_deviation = std::max(cert.max_outside_deviation, dev);
  };
  for (int j = 0; j < budget.outside_samples; ++j) {
    Vec p;
    bool found = false;
    for (int t = 0; t < 64 && !found; ++t) {
      p = m.sample_ambient(out_rng);
      found = m.count_active(p) == 0;
    }
    if (found) check_outside(p);
  }
  for (int j = 0; j < budget.shell_samples; ++j) {
    const Vec p = m.block_shell_sample(j % cert.blocks, out_rng);
    // a shell point of one tube may legitimately sit inside a neighbor
    if (m.count_active(p) == 0) check_outside(p);
  }
  cert.outside_samples = outside_seen;
  cert.outside_ok = outside_seen > 0 && cert.max_outside_deviation == 0.0;

  Rng sup_rng = Rng::stage(seed, "cert-support");
  for (int j = 0; j < budget.support_samples; ++j) {
    const Vec p = j % 2 == 0
                      ? m.sample_ambient(sup_rng)
                      : m.block_interior_sample((j / 2) % cert.blocks, sup_rng);
    cert.max_active = std::max(cert.max_active, m.count_active(p));
  }
  cert.support_ok = cert.max_active <= 1;

  for (int i = 0; i < cert.blocks; ++i) {
    const double circ = m.block(i).engine().circumference();
    const BetaProfile& beta = m.block(i).engine().beta();
    for (int k = 0; k < budget.core_samples; ++k) {
      const double s = circ * k / budget.core_samples;
      const double got = std::exp(2.0 * beta.jet(s, 0.0).y);
      const double want = std::exp(2.0 * f(m.core_point(i, s)));
      cert.max_core_pointwise =
          std::max(cert.max_core_pointwise, std::abs(got - want));
    }
    const double lg = integrate_relative(
        [&](double s) { return std::exp(beta.jet(s, 0.0).y); }, 0.0, circ,
        1e-10);
    const double lh = integrate_relative(
        [&](double s) { return std::exp(f(m.core_point(i, s))); }, 0.0, circ,
        1e-10);
    cert.max_core_length_gap =
        std::max(cert.max_core_length_gap, std::abs(lg - lh));
  }
  cert.core_ok = cert.max_core_pointwise <= budget.core_tol &&
                 cert.max_core_length_gap <= budget.core_tol;

  // off-tube forms are exactly the identity, eigenvalue one
  cert.min_form_eigenvalue = std::min(cert.min_form_eigenvalue, 1.0);
  cert.max_form_eigenvalue = std::max(cert.max_form_eigenvalue, 1.0);
  const double C = cert.bilipschitz_constant;
  cert.sandwich_ok =
      cert.min_form_eigenvalue >= (1.0 - budget.sandwich_tol) / C &&
      cert.max_form_eigenvalue <= (1.0 + budget.sandwich_tol) * C;
  return cert;
}

// Coordinate presentation of one block for the finite-difference oracle:
// q = (r, t_1 .. t_{n-2}, s) with the fiber sphere in stereographic
// coordinates, metric diag(1/alpha, w(r)^2 * 4/(1+|t|^2)^2 I, e^{2 beta}).
inline ChartMetric block_chart_metric(const CurvatureEngine& engine) {
  const Variant variant = engine.layout().variant;
  const int n = engine.layout().n;
  return [engine, variant, n](const Vec& q) -> Mat {
    if (static_cast<int>(q.size()) != n)
      throw oracle_error("block chart: wrong coordinate count");
    const double r = q[0];
    const double s = q[n - 1];
    if (!(r > 0.0))
      throw oracle_error("block chart: radius must be positive");
    if (variant == Variant::sphere && !(r < 0.5 * pi))
      throw oracle_error("block chart: radius must stay below pi/2");
    const double alpha = engine.warp().alpha(r);
    const double beta = engine.beta().jet(s, r).y;
    const double warp = variant == Variant::sphere ? std::sin(r) : r;
    const double t2 = q.segment(1, n - 2).squaredNorm();
    const double c = 1.0 + t2;
    const double fiber = warp * warp * 4.0 / (c * c);
    Mat g = Mat::Zero(n, n);
    g(0, 0) = 1.0 / alpha;
    for (int i = 0; i < n - 2; ++i) g(1 + i, 1 + i) = fiber;
    g(n - 1, n - 1) = std::exp(2.0 * beta);
    return g;
  };
}

// Same chart shapes for the exact model spaces; closed-form curvature is
// n(n-1) everywhere on the round sphere and zero on the flat torus.
inline ChartMetric round_sphere_chart(int n) {
  if (n < 2) throw dimension_error("round_sphere_chart: n must be at least 2");
  return [n](const Vec& q) -> Mat {
    if (static_cast<int>(q.size()) != n)
      throw oracle_error("round chart: wrong coordinate count");
    const double r = q[0];
    if (!(r > 0.0) || !(r < 0.5 * pi))
      throw oracle_error("round chart: radius out of range");
    const double sr = std::sin(r);
    const double cr = std::cos(r);
    const double t2 = q.segment(1, n - 2).squaredNorm();
    const double c = 1.0 + t2;
    Mat g = Mat::Zero(n, n);
    g(0, 0) = 1.0;
    for (int i = 0; i < n - 2; ++i) g(1 + i, 1 + i) = sr * sr * 4.0 / (c * c);
    g(n - 1, n - 1) = cr * cr;
    return g;
  };
}

inline ChartMetric flat_torus_chart(int n) {
  if (n < 2) throw dimension_error("flat_torus_chart: n must be at least 2");
  return [n](const Vec& q) -> Mat {
    if (static_cast<int>(q.size()) != n)
      throw oracle_error("flat chart: wrong coordinate count");
    const double r = q[0];
    if (!(r > 0.0)) throw oracle_error("flat chart: radius must be positive");
    const double t2 = q.segment(1, n - 2).squaredNorm();
    const double c = 1.0 + t2;
    Mat g = Mat::Zero(n, n);
    g(0, 0) = 1.0;
    for (int i = 0; i < n - 2; ++i) g(1 + i, 1 + i) = r * r * 4.0 / (c * c);
    g(n - 1, n - 1) = 1.0;
    return g;
  };
}

// Random chart point for finite-difference probes; the radius stays clear of
// both the axis and the tube boundary so a stencil of width ~r/5 fits.
inline Vec chart_probe(const ZoneLayout& z, double circumference, Rng& rng) {
  Vec q(z.n);
  q[0] = z.R * rng.uniform(0.05, 0.95);
  const int m = z.n - 2;
  for (int i = 0; i < m; ++i)
    q[1 + i] = 0.3 * (2.0 * rng.uniform() - 1.0) / std::sqrt(double(m));
  q[z.n - 1] = rng.uniform(0.0, circumference);
  return q;
}

// Differencing step for the tube chart: a fraction of the local feature
// scale, which is r itself near the axis and the climb-ramp edge width in
// the outer zone.  The tube chart carries Christoffel symbols of size
// cot(r), so differenced curvature loses accuracy like h^4/r^6 above the
// sweet spot and ulp/(h^2 r^2) below it; with sphere tubes capped below
// r = 0.01 the reachable floor is a few parts in 10^4.  Comparisons that
// need more head through normal_chart_on_sphere, whose pulled-back metric
// is identity-conditioned at the center.
inline double chart_probe_step(const ZoneLayout& z, double r) {
  return std::min(r, 0.5 * SlopeLimitedRamp::edge * z.R) / 16.0;
}

// Normal-coordinate chart of the round sphere around a base point, pulled
// back through an arbitrary ambient form.  Lets the oracle difference the
// assembled metric across a tube axis, where the tube chart degenerates.
inline ChartMetric normal_chart_on_sphere(
    std::function<Mat(const Vec&)> ambient_form, const Vec& base,
    std::uint64_t seed) {
  const Mat E = sphere_tangent_frame(base, seed);
  const Vec b = base;
  return [ambient_form = std::move(ambient_form), E, b](const Vec& xi) -> Mat {
    const int n = static_cast<int>(xi.size());
    if (static_cast<int>(E.cols()) != n)
      throw oracle_error("normal chart: wrong coordinate count");
    const double rho = xi.norm();
    if (!(rho < pi))
      throw oracle_error("normal chart: left the injectivity ball");
    Vec p;
    Mat d(b.size(), n);
    if (rho < 1e-150) {
      p = b;
      d = E;
    } else {
      const double c = std::cos(rho);
      const double s = std::sin(rho);
      const Vec mdir = (E * xi) / rho;
      p = c * b + s * mdir;
      const double s_over = s / rho;
      for (int a = 0; a < n; ++a) {
        const double ra = xi[a] / rho;
        d.col(a) =
            (-s * ra) * b + ((c - s_over) * ra) * mdir + s_over * E.col(a);
      }
    }
    const Mat A = ambient_form(p);
    Mat g = d.transpose() * A * d;
    return 0.5 * (g + g.transpose());
  };
}

// Differencing step for the normal charts.  The pulled-back metric equals
// the ambient form conjugated by a well-conditioned differential, so the
// only constraint is that the stencil resolve the tube features of width
// min(r, ramp edge); no polar amplification enters.
inline double normal_probe_step(const ZoneLayout& z, double r) {
  return std::min(r, 0.5 * SlopeLimitedRamp::edge * z.R) / 12.0;
}

// Random tube radius for ambient differencing probes.  The climb ramp opens
// and closes with smoothstep pieces of width edge*R/2; at sphere tube scale
// those pieces squeeze order-one curvature swings into a band a few hundred
// ulp-resolvable steps wide, and differenced curvature there bottoms out
// near 1e-3 relative at every step size.  Probes keep one piece-width of
// clearance so the comparison measures formula agreement, not band-limited
// differencing.
inline double ambient_probe_radius(const ZoneLayout& z, Rng& rng) {
  const double w = 0.5 * SlopeLimitedRamp::edge * z.R;
  const double lo = 0.5 * z.R - w;
  const double hi = 0.5 * z.R + 2.0 * w;
  for (;;) {
    const double r = z.R * rng.uniform(0.05, 0.9);
    if (r < lo || r > hi) return r;
  }
}

// Flat analogue: translate from the base point, differential the identity.
inline ChartMetric normal_chart_on_torus(
    std::function<Mat(const Vec&)> ambient_form, const TorusGeom& geom,
    const Vec& base) {
  return [ambient_form = std::move(ambient_form), geom,
          base](const Vec& xi) -> Mat {
    return ambient_form(geom.wrap(base + xi));
  };
}

}  // namespace warpcert
