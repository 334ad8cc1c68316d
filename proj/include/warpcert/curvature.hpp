#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "warpcert/common.hpp"
#include "warpcert/profiles.hpp"
#include "warpcert/smoothstep.hpp"

namespace warpcert {

// Sections through the adapted frame: radial against sphere-fiber (ri),
// radial against core direction (rs), fiber against core (is), fiber
// against fiber (ij).
enum class Section { ri, rs, is, ij };

inline const char* section_name(Section s) {
  switch (s) {
    case Section::ri: return "K_ri";
    case Section::rs: return "K_rs";
    case Section::is: return "K_is";
    case Section::ij: return "K_ij";
  }
  return "?";
}

struct CurvatureReport {
  double k_ri = 0.0;
  double k_rs = 0.0;
  double k_is = 0.0;
  double k_ij = 0.0;
  double scalar = 0.0;
  double r = 0.0;
  double s = 0.0;
};

inline double scalar_combination(int n, double k_ri, double k_rs, double k_is,
                                 double k_ij) {
  if (n < 4)
    throw dimension_error("scalar_combination: n must be at least 4");
  return 2.0 * k_rs + 2.0 * (n - 2) * k_ri + 2.0 * (n - 2) * k_is +
         static_cast<double>((n - 2) * (n - 3)) * k_ij;
}

// Raw closed forms from the warp jets.  The engine below routes through
// here; tests feed synthetic jets (round, flat) directly.
inline CurvatureReport sections_from_jets(Variant variant, int n, double r,
                                          double s, double alpha,
                                          double alpha_r, double beta_r,
                                          double beta_rr) {
  if (!(r > 0.0))
    throw parameter_error("sections_from_jets: radius must be positive");
  if (variant == Variant::sphere && !(r < 0.5 * pi))
    throw parameter_error("sections_from_jets: sphere radius must stay below pi/2");
  CurvatureReport out;
  out.r = r;
  out.s = s;
  if (variant == Variant::sphere) {
    const double sn = std::sin(r);
    const double cs = std::cos(r);
    const double ct = cs / sn;
    out.k_ri = alpha - 0.5 * alpha_r * ct;
    out.k_is = -alpha * beta_r * ct;
    // 1 - alpha cos^2 = sin^2 + (1-alpha) cos^2; the right side keeps k_ij
    // exact through alpha -> 1, where the naive numerator loses ulp/sin^2 r.
    out.k_ij = 1.0 + (1.0 - alpha) * ct * ct;
  } else {
    out.k_ri = -alpha_r / (2.0 * r);
    out.k_is = -alpha * beta_r / r;
    out.k_ij = (1.0 - alpha) / (r * r);
  }
  out.k_rs = -0.5 * alpha_r * beta_r - alpha * beta_rr - alpha * beta_r * beta_r;
  out.scalar = scalar_combination(n, out.k_ri, out.k_rs, out.k_is, out.k_ij);
  return out;
}

// Middle-zone sections premultiplied by r^2, evaluated in the transition
// variable x.  All r-dependent factors have exact finite limits as r -> 0,
// so the evaluation stays meaningful when r(x) underflows to 0.
struct ScaledSectionReport {
  double x = 0.0;
  double s = 0.0;
  double r = 0.0;  // radius at this x; 0.0 once the true radius underflows
  double alpha = 1.0;
  double r_cot = 1.0;  // r*cot(r) on the sphere, 1 on the torus
  double r_beta_r = 0.0;
  double r2_beta_rr = 0.0;
  double r2_k_ri = 0.0;
  double r2_k_rs = 0.0;
  double r2_k_is = 0.0;
  double r2_k_ij = 0.0;
  double r2_scalar = 0.0;
};

template <class Core>
ScaledSectionReport zone2_scaled_eval(Variant variant, int n, double hat_alpha,
                                      const CutoffPhi& phi, const Core& core,
                                      double x, double s) {
  if (!(x >= 0.5) || !(x <= 1.0))
    throw parameter_error("zone2_scaled_eval: transition variable outside [1/2, 1]");
  ScaledSectionReport out;
  out.x = x;
  out.s = s;
  out.r = phi.radius_of_transition(x);
  out.alpha = hat_alpha;
  const ProfileJet pj = phi.scaled_jet_at_transition(x);
  const double a = hat_alpha;
  const double F = core(s);
  if (variant == Variant::torus) {
    out.r_beta_r = -pj.dy * F;
    out.r2_beta_rr = -pj.d2y * F;
    out.r2_k_ri = 0.0;
    out.r2_k_rs = -a * (out.r2_beta_rr + out.r_beta_r * out.r_beta_r);
    out.r2_k_is = -a * out.r_beta_r;
    out.r2_k_ij = 1.0 - a;
  } else {
    const double r = out.r;
    const double sn = std::sin(r);
    const double t = std::tan(r);
    const double lam = std::log(std::cos(r));
    const double rtan = r * t;
    const double r2sec2 = r * r * (1.0 + t * t);
    out.r_cot = t == 0.0 ? 1.0 : r / t;
    const double q = sn == 0.0 ? 1.0 : r / sn;
    const double d = lam - F;
    out.r_beta_r = pj.dy * d - pj.y * rtan;
    out.r2_beta_rr = pj.d2y * d - 2.0 * pj.dy * rtan - pj.y * r2sec2;
    out.r2_k_ri = a * r * r;
    out.r2_k_rs = -a * (out.r2_beta_rr + out.r_beta_r * out.r_beta_r);
    out.r2_k_is = -a * out.r_beta_r * out.r_cot;
    out.r2_k_ij = (1.0 - a) * q * q + a * r * r;
  }
  out.r2_scalar = 2.0 * out.r2_k_rs +
                  2.0 * (n - 2) * (out.r2_k_ri + out.r2_k_is) +
                  static_cast<double>((n - 2) * (n - 3)) * out.r2_k_ij;
  return out;
}

struct ScalarScan {
  double min_scalar = std::numeric_limits<double>::infinity();
  double worst_r = 0.0;
  double worst_s = 0.0;
  int radial = 0;
  int angular = 0;
};

// Closed-form curvature of one constructed block.  Outside the tube the
// block equals the background metric, so reports there are the exact round
// or flat constants.
class CurvatureEngine {
 public:
  CurvatureEngine(WarpProfile warp, BetaProfile beta)
      : warp_(std::move(warp)), beta_(std::move(beta)) {
    const ZoneLayout& z = warp_.layout();
    if (beta_.variant() != z.variant)
      throw construction_error("CurvatureEngine: warp and beta variants differ");
    if (beta_.cutoff().delta() != z.delta || beta_.cutoff().R() != z.R)
      throw construction_error("CurvatureEngine: warp and beta cutoffs differ");
  }

  const ZoneLayout& layout() const { return warp_.layout(); }
  const WarpProfile& warp() const { return warp_; }
  const BetaProfile& beta() const { return beta_; }
  double circumference() const { return beta_.circumference(); }

  CurvatureReport at(double r, double s) const {
    const ZoneLayout& z = warp_.layout();
    if (!(r > 0.0))
      throw parameter_error("CurvatureEngine: radius must be positive");
    if (r >= z.R) {
      CurvatureReport out;
      out.r = r;
      out.s = s;
      const double k = z.variant == Variant::sphere ? 1.0 : 0.0;
      out.k_ri = out.k_rs = out.k_is = out.k_ij = k;
      out.scalar = scalar_combination(z.n, k, k, k, k);
      return out;
    }
    const ProfileJet b = beta_.jet(s, r);
    return sections_from_jets(z.variant, z.n, r, s, warp_.alpha(r),
                              warp_.alpha_r(r), b.dy, b.d2y);
  }

  ScaledSectionReport zone2_scaled(double x, double s) const {
    const ZoneLayout& z = warp_.layout();
    return zone2_scaled_eval(z.variant, z.n, z.hat_alpha, beta_.cutoff(),
                             [this](double u) { return beta_.core(u); }, x, s);
  }

  // Minimum scalar curvature over an (r, s) grid of the whole tube; grid
  // radii are R*k/radial, so the scan covers representable radii only.
  ScalarScan scan_scalar(int radial, int angular) const {
    if (radial < 1 || angular < 1)
      throw parameter_error("scan_scalar: grid must be positive");
    const ZoneLayout& z = warp_.layout();
    ScalarScan scan;
    scan.radial = radial;
    scan.angular = angular;
    const double circ = beta_.circumference();
    for (int i = 1; i <= radial; ++i) {
      const double r = z.R * i / radial;
      for (int j = 0; j < angular; ++j) {
        const double s = circ * j / angular;
        const double value = at(r, s).scalar;
        if (value < scan.min_scalar) {
          scan.min_scalar = value;
          scan.worst_r = r;
          scan.worst_s = s;
        }
      }
    }
    return scan;
  }

 private:
  WarpProfile warp_;
  BetaProfile beta_;
};

struct DeltaGrid {
  int transition = 512;
  int angular = 64;
};

struct DeltaCertificate {
  double delta = 0.0;
  double delta0 = 0.0;  // first candidate before any halving
  int halvings = 0;
  double min_r2_scalar = 0.0;
  double worst_x = 0.0;
  double worst_s = 0.0;
  int transition_samples = 0;
  int angular_samples = 0;
};

// Picks the cutoff sharpness: start from the bound-table heuristic and
// halve until the r^2-scaled scalar curvature is positive across the whole
// middle zone.  Positivity there is the only delta-sensitive requirement;
// the inner and outer zones are delta-free.
template <class Core>
DeltaCertificate certify_delta(Variant variant, int n, double epsilon, double R,
                               const Core& core, double circumference,
                               double f_bar, DeltaGrid grid = {}) {
  if (!(f_bar >= 1.0))
    throw parameter_error("certify_delta: f_bar must be at least 1");
  if (grid.transition < 2 || grid.angular < 1)
    throw parameter_error("certify_delta: grid must be positive");
  const double hat = variant == Variant::sphere
                         ? hat_alpha_sphere(epsilon, R)
                         : hat_alpha_torus(epsilon, R, n);
  const double c = eta_bounds().c;
  DeltaCertificate cert;
  cert.delta0 = static_cast<double>((n - 2) * (n - 3)) * (1.0 - hat) /
                (8.0 * c * (f_bar * f_bar + (n - 2) * f_bar));
  cert.transition_samples = grid.transition;
  cert.angular_samples = grid.angular;
  double delta = std::min(cert.delta0, 0.25);
  for (int halvings = 0; halvings <= 200; ++halvings) {
    const CutoffPhi phi(delta, R);
    double best = std::numeric_limits<double>::infinity();
    double wx = 0.0;
    double ws = 0.0;
    for (int i = 0; i <= grid.transition; ++i) {
      const double x = 0.5 + 0.5 * i / grid.transition;
      for (int j = 0; j < grid.angular; ++j) {
        const double s = circumference * j / grid.angular;
        const ScaledSectionReport rep =
            zone2_scaled_eval(variant, n, hat, phi, core, x, s);
        if (rep.r2_scalar < best) {
          best = rep.r2_scalar;
          wx = x;
          ws = s;
        }
      }
    }
    if (best > 0.0) {
      cert.delta = delta;
      cert.halvings = halvings;
      cert.min_r2_scalar = best;
      cert.worst_x = wx;
      cert.worst_s = ws;
      return cert;
    }
    delta *= 0.5;
  }
  throw construction_error(
      "certify_delta: no cutoff sharpness gives positive middle-zone scalar");
}

// Lower-bound rows come in three kinds.  strict: the bound must hold with
// room.  attained: the bound is exact somewhere on the zone (for instance
// at the zone boundary or in the r -> 0 limit), so zero slack is correct.
// identity: the bound IS the value by construction and any gap flags a
// wiring bug.
enum class BoundKind { strict, attained, identity };

struct BoundRow {
  int zone = 0;
  Section section = Section::ri;
  BoundKind kind = BoundKind::strict;
  bool scaled = false;  // middle-zone rows with 1/r^2 bounds carry r^2
  double min_slack = std::numeric_limits<double>::infinity();
  double max_abs_slack = 0.0;
  double witness_value = 0.0;
  double witness_bound = 0.0;
  double witness_r = 0.0;
  double witness_s = 0.0;
  double witness_x = 0.0;  // transition variable for scaled rows

  void feed(double value, double bound, double r, double s, double x = 0.0) {
    const double slack = value - bound;
    if (slack < min_slack) {
      min_slack = slack;
      witness_value = value;
      witness_bound = bound;
      witness_r = r;
      witness_s = s;
      witness_x = x;
    }
    max_abs_slack = std::max(max_abs_slack, std::abs(slack));
  }

  bool pass(double identity_tol) const {
    switch (kind) {
      case BoundKind::strict: return min_slack > 0.0;
      case BoundKind::attained: return min_slack >= -identity_tol;
      case BoundKind::identity: return max_abs_slack <= identity_tol;
    }
    return false;
  }
};

struct BoundGrid {
  int zone1_radial = 64;
  int zone1_angular = 8;
  int zone2_transition = 200;
  int zone2_angular = 200;
  int zone3_radial = 200;
  int zone3_angular = 16;
};

struct BoundTableReport {
  int table = 0;  // 1 sphere base, 2 sphere concrete-constant, 3 torus
  Variant variant = Variant::sphere;
  double delta = 0.0;
  double f_bar = 1.0;
  double c_rs = 0.0;
  double c_is = 0.0;
  double identity_tol = 1e-9;
  std::vector<BoundRow> rows;

  bool pass() const {
    for (const BoundRow& row : rows)
      if (!row.pass(identity_tol)) return false;
    return true;
  }

  const BoundRow* row(int zone, Section section) const {
    for (const BoundRow& r : rows)
      if (r.zone == zone && r.section == section) return &r;
    return nullptr;
  }
};

namespace detail {

inline BoundRow make_row(int zone, Section section, BoundKind kind,
                         bool scaled) {
  BoundRow row;
  row.zone = zone;
  row.section = section;
  row.kind = kind;
  row.scaled = scaled;
  return row;
}

}  // namespace detail

// Verifies every tabulated lower bound on a zone-stratified grid.  Tables 1
// and 2 are the sphere block (table 1 uses the defining middle-zone
// expressions as bounds, table 2 the concrete-constant bounds); table 3 is
// the torus block.  Middle-zone rows with 1/r^2 bounds are checked in
// r^2-scaled form so the certified (underflowing) regime stays meaningful.
inline BoundTableReport verify_bound_table(const CurvatureEngine& engine,
                                           int table, double f_bar,
                                           BoundGrid grid = {}) {
  const ZoneLayout& z = engine.layout();
  if (table < 1 || table > 3)
    throw parameter_error("verify_bound_table: table must be 1, 2, or 3");
  if (table != 3 && z.variant != Variant::sphere)
    throw parameter_error("verify_bound_table: tables 1 and 2 need the sphere block");
  if (table == 3 && z.variant != Variant::torus)
    throw parameter_error("verify_bound_table: table 3 needs the torus block");
  if (!(f_bar >= 1.0))
    throw parameter_error("verify_bound_table: f_bar must be at least 1");

  const bool sphere = z.variant == Variant::sphere;
  const double c = eta_bounds().c;
  BoundTableReport rep;
  rep.table = table;
  rep.variant = z.variant;
  rep.delta = z.delta;
  rep.f_bar = f_bar;
  rep.c_rs = c + c * c;
  rep.c_is = c;
  const double circ = engine.circumference();

  using detail::make_row;
  BoundRow z1_ri = make_row(1, Section::ri,
                            sphere ? BoundKind::strict : BoundKind::attained, false);
  BoundRow z1_rs = make_row(1, Section::rs, BoundKind::identity, false);
  BoundRow z1_is = make_row(1, Section::is, BoundKind::identity, false);
  BoundRow z1_ij = make_row(1, Section::ij,
                            sphere ? BoundKind::strict : BoundKind::attained, false);
  const double z1_ri_bound = sphere ? 0.25 : 0.0;
  if (z.eps0 > 0.0) {
    for (int i = 1; i <= grid.zone1_radial; ++i) {
      const double r = z.eps0 * i / grid.zone1_radial;
      for (int j = 0; j < grid.zone1_angular; ++j) {
        const double s = circ * j / grid.zone1_angular;
        const CurvatureReport k = engine.at(r, s);
        z1_ri.feed(k.k_ri, z1_ri_bound, r, s);
        z1_rs.feed(k.k_rs, 0.0, r, s);
        z1_is.feed(k.k_is, 0.0, r, s);
        z1_ij.feed(k.k_ij, 0.0, r, s);
      }
    }
  } else {
    // The inner zone has no representable interior radius; its true values
    // near the core are constant, so the check reduces to the r -> 0 limit.
    const double ri = sphere ? 1.0 : 0.0;
    const double ij = sphere ? 1.0 : 0.0;
    z1_ri.feed(ri, z1_ri_bound, 0.0, 0.0);
    z1_rs.feed(0.0, 0.0, 0.0, 0.0);
    z1_is.feed(0.0, 0.0, 0.0, 0.0);
    z1_ij.feed(ij, 0.0, 0.0, 0.0);
  }

  BoundRow z2_ri = make_row(2, Section::ri,
                            sphere ? BoundKind::strict : BoundKind::identity, false);
  BoundKind z2_kind = table == 1 ? BoundKind::identity : BoundKind::strict;
  BoundRow z2_rs = make_row(2, Section::rs, z2_kind, true);
  BoundRow z2_is = make_row(2, Section::is, z2_kind, true);
  BoundRow z2_ij = make_row(2, Section::ij,
                            table == 3 ? BoundKind::identity : BoundKind::attained,
                            true);
  for (int i = 0; i <= grid.zone2_transition; ++i) {
    const double x = 0.5 + 0.5 * i / grid.zone2_transition;
    for (int j = 0; j < grid.zone2_angular; ++j) {
      const double s = circ * j / grid.zone2_angular;
      const ScaledSectionReport k = engine.zone2_scaled(x, s);
      // alpha is flat across the middle zone, so the ri section needs no
      // r^2 scaling: it equals hat_alpha (sphere) or 0 (torus) exactly.
      z2_ri.feed(sphere ? z.hat_alpha : 0.0, sphere ? 0.25 : 0.0, k.r, s, x);
      double rs_bound;
      double is_bound;
      if (table == 1) {
        rs_bound = -k.alpha * (k.r2_beta_rr + k.r_beta_r * k.r_beta_r);
        is_bound = -k.alpha * k.r_beta_r * k.r_cot;
      } else if (table == 2) {
        rs_bound = -rep.c_rs * z.delta * f_bar * f_bar - k.r * k.r / 100.0;
        is_bound = -rep.c_is * z.delta * f_bar;
      } else {
        rs_bound = -rep.c_rs * z.delta * f_bar * f_bar;
        is_bound = -rep.c_is * z.delta * f_bar;
      }
      z2_rs.feed(k.r2_k_rs, rs_bound, k.r, s, x);
      z2_is.feed(k.r2_k_is, is_bound, k.r, s, x);
      z2_ij.feed(k.r2_k_ij, 1.0 - z.hat_alpha, k.r, s, x);
    }
  }

  BoundRow z3_ri = make_row(3, Section::ri, BoundKind::strict, false);
  BoundRow z3_rs = make_row(3, Section::rs,
                            sphere ? BoundKind::strict : BoundKind::identity, false);
  BoundRow z3_is = make_row(3, Section::is,
                            sphere ? BoundKind::strict : BoundKind::identity, false);
  BoundRow z3_ij = make_row(3, Section::ij,
                            sphere ? BoundKind::strict : BoundKind::attained, false);
  const double z3_ri_bound = sphere ? 0.25 : -z.epsilon / (2.0 * z.n);
  for (int i = 0; i <= grid.zone3_radial; ++i) {
    const double r = 0.5 * z.R + 0.5 * z.R * i / grid.zone3_radial;
    for (int j = 0; j < grid.zone3_angular; ++j) {
      const double s = circ * j / grid.zone3_angular;
      const CurvatureReport k = engine.at(r, s);
      z3_ri.feed(k.k_ri, z3_ri_bound, r, s);
      z3_rs.feed(k.k_rs, 0.0, r, s);
      z3_is.feed(k.k_is, 0.0, r, s);
      z3_ij.feed(k.k_ij, 0.0, r, s);
    }
  }

  rep.rows = {z1_ri, z1_rs, z1_is, z1_ij, z2_ri, z2_rs, z2_is, z2_ij,
              z3_ri, z3_rs, z3_is, z3_ij};
  return rep;
}

}  // namespace warpcert
