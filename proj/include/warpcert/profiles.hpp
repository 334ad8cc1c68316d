#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "warpcert/common.hpp"
#include "warpcert/smoothstep.hpp"

namespace warpcert {

// Inner transition radius: the cutoff built from eta(1 + delta*log(2r/R))
// leaves [0, eps0] untouched and is fully switched by R/2.  For certified
// (tiny) delta the closed form underflows to 0.0; the log form below stays
// finite and is what zone tests compare against.
inline double epsilon0(double delta, double R) {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw parameter_error("epsilon0: delta must lie in (0,1)");
  if (!(R > 0.0)) throw parameter_error("epsilon0: R must be positive");
  return 0.5 * R * std::exp(-0.5 / delta);
}

inline double log_epsilon0(double delta, double R) {
  return std::log(0.5 * R) - 0.5 / delta;
}

// Floor value of the warp in the middle zone.
inline double hat_alpha_sphere(double epsilon, double R) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw parameter_error("hat_alpha_sphere: epsilon must lie in (0,1)");
  if (!(R > 0.0) || !(R < 0.01))
    throw parameter_error("hat_alpha_sphere: R must lie in (0, 1/100)");
  return std::max(0.75, std::max(1.0 - 0.5 * epsilon, 1.0 - R * R / 5.0));
}

inline double hat_alpha_torus(double epsilon, double R, int n) {
  if (n < 4) throw dimension_error("hat_alpha_torus: n must be at least 4");
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw parameter_error("hat_alpha_torus: epsilon must lie in (0,1)");
  if (!(R > 0.0) || !(R <= 1.0))
    throw parameter_error("hat_alpha_torus: R must lie in (0, 1]");
  return 1.0 - epsilon * R * R / (5.0 * n);
}

// Radial zone boundaries and the parameters every profile shares.
// Zone 1 = [0, eps0], zone 2 = [eps0, R/2], zone 3 = [R/2, R].
struct ZoneLayout {
  Variant variant = Variant::sphere;
  int n = 4;
  double epsilon = 0.0;
  double R = 0.0;
  double delta = 0.0;
  double hat_alpha = 1.0;
  double eps0 = 0.0;      // may underflow to exactly 0 for certified delta
  double log_eps0 = 0.0;  // always finite

  static ZoneLayout make(Variant variant, int n, double epsilon, double R,
                         double delta) {
    if (n < 4) throw dimension_error("ZoneLayout: n must be at least 4");
    ZoneLayout z;
    z.variant = variant;
    z.n = n;
    z.epsilon = epsilon;
    z.R = R;
    z.delta = delta;
    z.hat_alpha = variant == Variant::sphere ? hat_alpha_sphere(epsilon, R)
                                             : hat_alpha_torus(epsilon, R, n);
    z.eps0 = epsilon0(delta, R);
    z.log_eps0 = log_epsilon0(delta, R);
    if (!(z.log_eps0 < std::log(0.5 * R)))
      throw construction_error("ZoneLayout: inner zone failed to fit");
    return z;
  }
};

struct ProfileJet {
  double y;
  double dy;
  double d2y;
};

// alpha(r): 1 on [0, eps0/2], descends to hat_alpha by eps0, flat through
// zone 2, climbs back to 1 across zone 3 under the slope cap, 1 outside.
// The climb uses the slope-limited ramp; the descent has no slope cap and
// uses the plain step.
class WarpProfile {
 public:
  explicit WarpProfile(const ZoneLayout& z) : z_(z) {
    // The climb slope is (1-hat_alpha) * ramp_slope * 2/R and the cap at
    // r = R(1+u)/2 is cap_factor * R(1+u)/2, so the binding case is u = 0:
    //   4 * (1-hat_alpha) * max_slope <= cap_factor * R^2.
    // The hat_alpha formulas keep (1-hat_alpha) <= cap_factor * R^2 / 5 and
    // max_slope < 5/4, so admissible layouts can never trip this.
    const double cap_factor =
        z.variant == Variant::sphere ? 1.0 : z.epsilon / z.n;
    const double need =
        4.0 * (1.0 - z.hat_alpha) * SlopeLimitedRamp::max_slope();
    if (need > cap_factor * z.R * z.R)
      throw construction_error("WarpProfile: zone 3 slope budget exceeded");
  }

  const ZoneLayout& layout() const { return z_; }

  double alpha(double r) const {
    if (r <= 0.0) return 1.0;
    if (z_.eps0 > 0.0 && r < z_.eps0)
      return 1.0 - (1.0 - z_.hat_alpha) * eta(r / z_.eps0);
    if (r < 0.5 * z_.R) return z_.hat_alpha;
    if (r < z_.R)
      return z_.hat_alpha + (1.0 - z_.hat_alpha) *
                                SlopeLimitedRamp::value((2.0 * r - z_.R) / z_.R);
    return 1.0;
  }

  double alpha_r(double r) const {
    if (r <= 0.0) return 0.0;
    if (z_.eps0 > 0.0 && r < z_.eps0)
      return -(1.0 - z_.hat_alpha) * eta_jet(r / z_.eps0).dy / z_.eps0;
    if (r < 0.5 * z_.R) return 0.0;
    if (r < z_.R)
      return (1.0 - z_.hat_alpha) *
             SlopeLimitedRamp::slope((2.0 * r - z_.R) / z_.R) * 2.0 / z_.R;
    return 0.0;
  }

  // Zone 3 cap on alpha_r: r on the sphere, epsilon*r/n on the torus.
  double slope_cap(double r) const {
    return z_.variant == Variant::sphere ? r : z_.epsilon * r / z_.n;
  }

 private:
  ZoneLayout z_;
};

inline WarpProfile build_warp_profile(Variant variant, double epsilon, double R,
                                      double delta, int n) {
  WarpProfile w(ZoneLayout::make(variant, n, epsilon, R, delta));
  // Pointwise slope audit across the climb; construction_error here means
  // the ramp margin analysis is wrong, so it is a hard failure, not a
  // recoverable condition.
  for (int i = 0; i <= 256; ++i) {
    const double r = 0.5 * R + 0.5 * R * i / 256.0;
    const double ar = w.alpha_r(r);
    if (ar < 0.0 || ar > w.slope_cap(r))
      throw construction_error("build_warp_profile: slope cap violated");
  }
  return w;
}

// phi(r) = eta(1 + delta*log(2r/R)); identically 0 up to eps0 and
// identically 1 from R/2 on.  Derivative jets carry the 1/r factors.
class CutoffPhi {
 public:
  CutoffPhi(double delta, double R) : delta_(delta), R_(R) {
    if (!(delta > 0.0) || !(delta < 1.0))
      throw parameter_error("CutoffPhi: delta must lie in (0,1)");
    if (!(R > 0.0)) throw parameter_error("CutoffPhi: R must be positive");
  }

  double delta() const { return delta_; }
  double R() const { return R_; }

  ProfileJet jet(double r) const {
    if (r <= 0.0) return {0.0, 0.0, 0.0};
    const StepJet j = eta_jet(transition(r));
    if (j.dy == 0.0 && j.d2y == 0.0) return {j.y, 0.0, 0.0};
    return {j.y, j.dy * delta_ / r,
            (j.d2y * delta_ * delta_ - j.dy * delta_) / (r * r)};
  }

  double operator()(double r) const { return jet(r).y; }

  // Transition variable x = 1 + delta*log(2r/R); x in [1/2, 1] spans zone 2
  // exactly.  Scans work in x because certified delta pushes most of the
  // transition below the smallest representable radius.
  double transition(double r) const {
    return 1.0 + delta_ * std::log(2.0 * r / R_);
  }

  double radius_of_transition(double x) const {
    return 0.5 * R_ * std::exp((x - 1.0) / delta_);
  }

  // (phi, r*phi', r^2*phi'') as functions of x alone.
  ProfileJet scaled_jet_at_transition(double x) const {
    const StepJet j = eta_jet(x);
    return {j.y, j.dy * delta_,
            j.d2y * delta_ * delta_ - j.dy * delta_};
  }

 private:
  double delta_;
  double R_;
};

// beta(s,r): on the sphere phi*log(cos r) + (1-phi)*F(s), on the torus
// (1-phi)*F(s), where F is the conformal exponent along the core circle by
// arc length.  F <= -1 is a build precondition.
class BetaProfile {
 public:
  BetaProfile(Variant variant, CutoffPhi phi, std::function<double(double)> core,
              double circumference)
      : variant_(variant),
        phi_(phi),
        core_(std::move(core)),
        circumference_(circumference) {}

  Variant variant() const { return variant_; }
  const CutoffPhi& cutoff() const { return phi_; }
  double circumference() const { return circumference_; }
  double core(double s) const { return core_(s); }

  ProfileJet jet(double s, double r) const {
    const double F = core_(s);
    const ProfileJet p = phi_.jet(r);
    if (variant_ == Variant::torus)
      return {(1.0 - p.y) * F, -p.dy * F, -p.d2y * F};
    if (!(r >= 0.0) || !(r < 0.5 * pi))
      throw parameter_error("BetaProfile: sphere radius outside [0, pi/2)");
    const double lam = std::log(std::cos(r));
    const double t = std::tan(r);
    const double d = lam - F;
    const double sec2 = 1.0 + t * t;
    return {p.y * lam + (1.0 - p.y) * F,
            p.dy * d - p.y * t,
            p.d2y * d - 2.0 * p.dy * t - p.y * sec2};
  }

  double operator()(double s, double r) const { return jet(s, r).y; }

 private:
  Variant variant_;
  CutoffPhi phi_;
  std::function<double(double)> core_;
  double circumference_;
};

inline BetaProfile build_beta(Variant variant, const CutoffPhi& phi,
                              std::function<double(double)> core,
                              double circumference) {
  if (!(circumference > 0.0))
    throw parameter_error("build_beta: circumference must be positive");
  for (int i = 0; i < 512; ++i) {
    const double s = circumference * i / 512.0;
    if (!(core(s) <= -1.0 + 1e-12))
      throw parameter_error(
          "build_beta: conformal exponent on the core must not exceed -1");
  }
  return BetaProfile(variant, phi, std::move(core), circumference);
}

}  // namespace warpcert
