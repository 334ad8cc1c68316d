#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "warpcert/common.hpp"
#include "warpcert/rng.hpp"

namespace warpcert {

// Conformal exponent f with certified range bounds.  The builtin families
// carry exact bounds; anything user-supplied must come with sound ones,
// since the normalization below and every downstream certificate leans on
// them.
struct ConformalFactor {
  std::function<double(const Vec&)> value;
  double sup = 0.0;
  double inf = 0.0;
  std::string family;

  double operator()(const Vec& p) const { return value(p); }
};

inline ConformalFactor constant_factor(double c) {
  return {[c](const Vec&) { return c; }, c, c, "constant"};
}

// f(p) = -a - b * p0 on the unit sphere
inline ConformalFactor sphere_linear_factor(double a, double b) {
  return {[a, b](const Vec& p) { return -a - b * p[0]; },
          -a + std::abs(b), -a - std::abs(b), "sphere-linear"};
}

// f(x) = -a - b * cos(2 pi x0 / L0) on the torus
inline ConformalFactor torus_cosine_factor(double a, double b, double period0) {
  const double k = 2.0 * pi / period0;
  return {[a, b, k](const Vec& p) { return -a - b * std::cos(k * p[0]); },
          -a + std::abs(b), -a - std::abs(b), "torus-cosine"};
}

struct NormalizedConformal {
  ConformalFactor f;   // shifted so sup f = -1
  double shift = 0.0;  // original sup + 1
  double scale = 1.0;  // exp(2 * shift); distances in the original metric
                       // are exp(shift) times distances under the shifted f
  double f_bar = 1.0;  // sup |f| of the shifted factor, >= 1
};

inline NormalizedConformal normalize_conformal_factor(const ConformalFactor& f) {
  NormalizedConformal out;
  out.shift = f.sup + 1.0;
  const double shift = out.shift;
  auto base = f.value;
  out.f.value = [base, shift](const Vec& p) { return base(p) - shift; };
  out.f.sup = -1.0;
  out.f.inf = f.inf - shift;
  out.f.family = f.family;
  out.scale = std::exp(2.0 * shift);
  out.f_bar = shift - f.inf;
  return out;
}

// Checks one implication sample set: round distance <= reach forces the f
// oscillation below half log(1+epsilon).
template <class Geom>
bool modulus_audit(const Geom& geom, const ConformalFactor& f, double delta,
                   double epsilon, double f_bar, Rng& rng, int pairs) {
  const double threshold = 0.5 * std::log1p(epsilon);
  double reach = 2.0 * delta * std::exp(f_bar);
  for (int i = 0; i < pairs; ++i) {
    const Vec x = geom.sample(rng);
    // bias toward the critical scale; small separations pass trivially
    const double d = reach * (0.25 + 0.75 * rng.uniform());
    const Vec y = geom.move(x, d, rng);
    if (std::abs(f(x) - f(y)) >= threshold) return false;
  }
  return true;
}

// Continuity modulus used by both the tube-radius reduction and the
// distance bracket: the largest delta <= 1 (halving from 1) at which the
// audited implication holds, re-verified on a fresh stream.
template <class Geom>
double modulus_delta(const Geom& geom, const ConformalFactor& f, double epsilon,
                     double f_bar, std::uint64_t seed, int pairs = 100000) {
  double delta = 1.0;
  for (;;) {
    Rng probe = Rng::stage(seed, "modulus-probe");
    if (modulus_audit(geom, f, delta, epsilon, f_bar, probe, pairs)) {
      Rng fresh = Rng::stage(seed, "modulus-verify");
      if (modulus_audit(geom, f, delta, epsilon, f_bar, fresh, pairs)) break;
    }
    delta *= 0.5;
    if (delta < 1e-9)
      throw construction_error(
          "modulus_delta: no admissible modulus above the 1e-9 floor");
  }
  return delta;
}

// Largest tube radius (halving from r0) at which pairs within the radius
// keep the f oscillation below half log(1+epsilon).  Constant factors never
// reduce.
template <class Geom>
double uniform_continuity_radius(const Geom& geom, const ConformalFactor& f,
                                 double epsilon, double r0, std::uint64_t seed,
                                 int pairs = 20000) {
  if (f.sup - f.inf < 0.5 * std::log1p(epsilon)) return r0;
  const double threshold = 0.5 * std::log1p(epsilon);
  double radius = r0;
  for (;;) {
    Rng rng = Rng::stage(seed, "uc-radius");
    bool ok = true;
    for (int i = 0; i < pairs && ok; ++i) {
      const Vec x = geom.sample(rng);
      const Vec y = geom.move(x, radius * (0.25 + 0.75 * rng.uniform()), rng);
      ok = std::abs(f(x) - f(y)) < threshold;
    }
    if (ok) return radius;
    radius *= 0.5;
    if (radius < 1e-12)
      throw construction_error(
          "uniform_continuity_radius: no admissible radius above 1e-12");
  }
}

}  // namespace warpcert
