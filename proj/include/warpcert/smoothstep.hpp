#pragma once

#include <algorithm>
#include <cmath>

#include "warpcert/common.hpp"
#include "warpcert/quadrature.hpp"

namespace warpcert {

struct StepJet {
  double y;    // value
  double dy;   // first derivative
  double d2y;  // second derivative
};

namespace detail {

// Two-sided exponential blend s(t) = e(t)/(e(t)+e(1-t)) with e(t)=exp(-1/t).
// Writing w(t) = 1/t - 1/(1-t) gives s = 1/(1+exp(w)), which is the form
// evaluated here because it stays finite for t near 0 and 1.
inline StepJet blend(double t) {
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= 1.0) return {1.0, 0.0, 0.0};
  const double u = 1.0 - t;
  const double w = 1.0 / t - 1.0 / u;
  double s;
  if (w >= 0.0) {
    const double e = std::exp(-w);
    s = e / (1.0 + e);
  } else {
    s = 1.0 / (1.0 + std::exp(w));
  }
  // q = s(1-s), computed from exp(-|w|) so it underflows to 0 cleanly
  // instead of producing inf*0.
  const double e = std::exp(-std::abs(w));
  const double q = e / ((1.0 + e) * (1.0 + e));
  const double wp = -1.0 / (t * t) - 1.0 / (u * u);
  const double wpp = 2.0 / (t * t * t) - 2.0 / (u * u * u);
  const double dy = -wp * q;
  const double d2y = q * (-wpp + wp * wp * (1.0 - 2.0 * s));
  return {s, dy, d2y};
}

}  // namespace detail

// Smooth step: identically 0 for x <= 1/2, identically 1 for x >= 1,
// nondecreasing, C-infinity.  This single function generates every cutoff
// and warp transition in the construction.
inline StepJet eta_jet(double x) {
  const StepJet s = detail::blend(2.0 * x - 1.0);
  return {s.y, 2.0 * s.dy, 4.0 * s.d2y};
}

inline double eta(double x) { return eta_jet(x).y; }

struct EtaBounds {
  double sup_prime;   // measured sup of eta'
  double sup_second;  // measured sup of |eta''|
  double c;           // sup_prime + sup_second; the derivative constant
                      // threaded through every cutoff bound downstream
};

// Measured on a dense grid over the transition interval once per process.
// The 1.001 headroom covers the gap between grid maxima and the true
// suprema (the third derivative is bounded, so the gap is far smaller).
inline const EtaBounds& eta_bounds() {
  static const EtaBounds b = [] {
    const int samples = 400001;
    double sup1 = 0.0, sup2 = 0.0;
    for (int i = 0; i <= samples; ++i) {
      const double x = 0.5 + 0.5 * static_cast<double>(i) / samples;
      const StepJet j = eta_jet(x);
      sup1 = std::max(sup1, j.dy);
      sup2 = std::max(sup2, std::abs(j.d2y));
    }
    EtaBounds out;
    out.sup_prime = sup1 * 1.001;
    out.sup_second = sup2 * 1.001;
    out.c = out.sup_prime + out.sup_second;
    return out;
  }();
  return b;
}

// Near-linear C-infinity ramp on [0,1]: value 0 at 0, 1 at 1, flat to all
// orders at both ends, slope bounded by 1/(1 - 3a/2) with a = edge.  It is
// the normalized integral of the plateau bump
//     psi(t) = eta(t/a) * eta((1-t)/a),
// whose mass is exactly 1 - 3a/2 (the blend is odd-symmetric about its
// midpoint, so each ramp of psi integrates to a/4).  The warp profile climbs
// through this ramp where a plain smooth step would violate its slope cap.
class SlopeLimitedRamp {
 public:
  static constexpr double edge = 0.1;
  static constexpr double mass = 1.0 - 1.5 * edge;

  static double max_slope() { return 1.0 / mass; }

  static double value(double u) {
    constexpr double a = edge;
    if (u <= 0.5 * a) return 0.0;
    if (u >= 1.0 - 0.5 * a) return 1.0;
    if (u <= a) return ramp_integral(u / a) * a / mass;
    if (u < 1.0 - a) return (0.25 * a + (u - a)) / mass;
    return 1.0 - ramp_integral((1.0 - u) / a) * a / mass;
  }

  static double slope(double u) {
    constexpr double a = edge;
    if (u <= 0.5 * a || u >= 1.0 - 0.5 * a) return 0.0;
    return eta(u / a) * eta((1.0 - u) / a) / mass;
  }

 private:
  // int_0^x eta, nonzero only past 1/2; Gauss-Legendre keeps the error
  // smooth in x so later finite differencing of the profile stays clean.
  static double ramp_integral(double x) {
    if (x <= 0.5) return 0.0;
    if (x >= 1.0) return 0.25;
    return integrate_gauss([](double t) { return eta(t); }, 0.5, x);
  }
};

}  // namespace warpcert
