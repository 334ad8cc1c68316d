// Acceptance gate: one self-contained check per certified claim, one
// [PASS]/[FAIL] line each, exit status = number of failures.  Tolerances and
// budgets are pinned here on purpose; loosening them is a review event.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "warpcert/assembly.hpp"
#include "warpcert/common.hpp"
#include "warpcert/conformal.hpp"
#include "warpcert/curvature.hpp"
#include "warpcert/distance.hpp"
#include "warpcert/experiment.hpp"
#include "warpcert/fd_oracle.hpp"
#include "warpcert/geometry.hpp"
#include "warpcert/mesh.hpp"
#include "warpcert/packing.hpp"
#include "warpcert/rng.hpp"

using namespace warpcert;

namespace {

constexpr std::uint64_t kSeed = 421;

// identity samples per manifold and the section tolerance
constexpr int kIdentitySamples = 1000;
constexpr double kIdentityTol = 1e-12;
constexpr double kIdentityScalarTol = 2e-11;

// finite-difference probes per block and the agreement tolerance
constexpr int kOracleProbes = 1000;
constexpr double kOracleRelTol = 1e-4;

// packing scale: large enough to keep all pair circles under the count cap
// (0.5 saturates near 23 centers, 253 circles)
constexpr double kPackEta = 0.5;
constexpr int kPackCircleCap = 500;

// declared mesh band for constant-factor calibration, ratio d_h / (e^c d0),
// at the instrument budget of 3000 points and 24 neighbors; sparser graphs
// leave kinks the path relaxation cannot fully straighten
constexpr double kMeshBandLo = 1.0 - 1e-9;
constexpr double kMeshBandHi = 1.03;
constexpr int kMeshPairs = 1000;

const double kSweepEps[] = {0.5, 0.25, 0.125};

Vec axis(int dim, int i) {
  Vec e = Vec::Zero(dim);
  e[i] = 1.0;
  return e;
}

SphereBlock reference_block(double epsilon, const ConformalFactor& f) {
  const SphereGeom geom{4};
  const GreatCircle circle{axis(5, 0), axis(5, 1)};
  return build_sphere_block(geom, circle, f, 1.0, epsilon, 0.005, kSeed);
}

TorusBlock torus_block(double epsilon, const ConformalFactor& f) {
  TorusGeom geom;
  geom.periods = Vec::Constant(4, 2.0 * pi);
  const TorusLine line{0, Vec::Zero(4)};
  return build_torus_block(geom, line, f, 1.0, epsilon, 1.0, kSeed);
}

struct Line {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return std::string(buf);
}

// 1. Closed-form sections of the round S4/S5 ansatz equal 1 and of the flat
//    T4 ansatz equal 0, scalar n(n-1) and 0, at random radii.
Line criterion_identities() {
  Line line;
  Rng rng = Rng::stage(kSeed, "acc-identities");
  double worst_section = 0.0;
  double worst_scalar = 0.0;
  for (int n : {4, 5}) {
    for (int i = 0; i < kIdentitySamples; ++i) {
      // the k_rs identity cancels sec^2 against tan^2, so radii keep a
      // margin from the equator where ulp(sec^2) would pass 1e-12
      const double r = rng.uniform(0.03, 0.5 * pi - 0.03);
      const CurvatureReport rep = sections_from_jets(
          Variant::sphere, n, r, 0.0, 1.0, 0.0, -std::tan(r),
          -1.0 / (std::cos(r) * std::cos(r)));
      for (double k : {rep.k_ri, rep.k_rs, rep.k_is, rep.k_ij})
        worst_section = std::max(worst_section, std::abs(k - 1.0));
      worst_scalar =
          std::max(worst_scalar, std::abs(rep.scalar - n * (n - 1.0)));
    }
  }
  for (int i = 0; i < kIdentitySamples; ++i) {
    const double r = rng.uniform(0.01, 2.0);
    const CurvatureReport rep =
        sections_from_jets(Variant::torus, 4, r, 0.0, 1.0, 0.0, 0.0, 0.0);
    for (double k : {rep.k_ri, rep.k_rs, rep.k_is, rep.k_ij})
      worst_section = std::max(worst_section, std::abs(k));
    worst_scalar = std::max(worst_scalar, std::abs(rep.scalar));
  }
  if (worst_section > kIdentityTol)
    line.fail("section dev " + num(worst_section));
  if (worst_scalar > kIdentityScalarTol)
    line.fail("scalar dev " + num(worst_scalar));
  line.note("max section dev " + num(worst_section) + ", scalar dev " +
            num(worst_scalar));
  return line;
}

// 2. Finite differences of the assembled metric agree with the closed-form
//    scalar on a sphere block and a torus block.
Line criterion_oracle() {
  Line line;
  const ConformalFactor f = constant_factor(-1.0);

  // sphere: difference the ambient form in round-normal coordinates; the
  // tube chart's cot(r) conditioning caps its accuracy near the tolerance
  const SphereBlock sb = reference_block(0.5, f);
  const ZoneLayout& sz = sb.layout();
  Rng srng = Rng::stage(kSeed, "acc-oracle-sphere");
  double sphere_worst = 0.0;
  for (int i = 0; i < kOracleProbes; ++i) {
    const double r = ambient_probe_radius(sz, srng);
    const double s = srng.uniform(0.0, 2.0 * pi);
    const Vec p = sb.tube().from_coords(r, sb.fiber_sample(srng), s);
    const TubeCoords tc = sb.tube().coords(p);
    const ChartMetric chart = normal_chart_on_sphere(
        [&sb](const Vec& q) { return sb.ambient_form(q); }, p,
        kSeed + static_cast<std::uint64_t>(i));
    FdOptions opt;
    opt.step = normal_probe_step(sz, tc.r);
    const double fd = FdCurvature(chart, 4).scalar(Vec::Zero(4), opt);
    const double closed = sb.engine().at(tc.r, tc.s).scalar;
    sphere_worst = std::max(
        sphere_worst, std::abs(fd - closed) / std::max(1.0, std::abs(closed)));
  }

  // torus: the block chart is well conditioned at torus tube scale
  const TorusBlock tb = torus_block(0.1, f);
  const FdCurvature toracle(block_chart_metric(tb.engine()), 4);
  Rng trng = Rng::stage(kSeed, "acc-oracle-torus");
  double torus_worst = 0.0;
  for (int i = 0; i < kOracleProbes; ++i) {
    const Vec q = chart_probe(tb.layout(), 2.0 * pi, trng);
    FdOptions opt;
    opt.step = chart_probe_step(tb.layout(), q[0]);
    const double fd = toracle.scalar(q, opt);
    const double closed = tb.engine().at(q[0], q[3]).scalar;
    torus_worst = std::max(
        torus_worst, std::abs(fd - closed) / std::max(1.0, std::abs(closed)));
  }

  if (sphere_worst > kOracleRelTol) line.fail("sphere " + num(sphere_worst));
  if (torus_worst > kOracleRelTol) line.fail("torus " + num(torus_worst));
  line.note("worst rel dev sphere " + num(sphere_worst) + ", torus " +
            num(torus_worst) + " at " + std::to_string(kOracleProbes) +
            " probes each");
  return line;
}

// 3. Sphere certificate at the pinned scale: positive grid scalar, exact
//    background off the tube, nonnegative sandwich eigenvalues, core length.
Line criterion_sphere_certificate() {
  Line line;
  const ConformalFactor f = constant_factor(-1.0);
  SphereBlock block = reference_block(0.5, f);
  const AssembledSphere metric =
      single_sphere_block(SphereGeom{4}, std::move(block), f, 1.0, 0.5);
  const MetricCertificate cert = certify_metric_properties(metric, kSeed);
  if (!cert.scalar_ok) line.fail("grid scalar min " + num(cert.min_scalar));
  if (!cert.outside_ok)
    line.fail("outside dev " + num(cert.max_outside_deviation));
  if (!cert.upper_ok) line.fail("upper eig " + num(cert.min_eig_upper));
  if (!cert.lower_ok) line.fail("lower eig " + num(cert.min_eig_lower));
  if (!cert.core_ok)
    line.fail("core gap " + num(std::max(cert.max_core_pointwise,
                                         cert.max_core_length_gap)));
  if (!cert.support_ok || !cert.sandwich_ok) line.fail("support/sandwich");
  line.note("min scalar " + num(cert.min_scalar) + " on 400x400, outside dev " +
            num(cert.max_outside_deviation) + ", eig floors " +
            num(cert.min_eig_upper) + "/" + num(cert.min_eig_lower) +
            ", core gap " + num(cert.max_core_length_gap));
  return line;
}

// 4. Torus certificate: grid scalar >= -eps, and the outer-zone scalar never
//    drops below 2(n-2) times the per-section floor -eps/2n.
Line criterion_torus_certificate() {
  Line line;
  const double eps = 0.1;
  const ConformalFactor f = constant_factor(-1.0);
  TorusBlock block = torus_block(eps, f);
  const CurvatureEngine& engine = block.engine();
  const ZoneLayout& z = block.layout();

  const int n = 4;
  const double zone3_bound = 2.0 * (n - 2) * (-eps / (2.0 * n));
  double zone3_min = std::numeric_limits<double>::infinity();
  const double circ = engine.circumference();
  for (int i = 0; i < 400; ++i) {
    const double r = 0.5 * z.R + (i + 0.5) / 400.0 * 0.5 * z.R;
    for (int j = 0; j < 64; ++j)
      zone3_min = std::min(
          zone3_min, engine.at(r, (j + 0.5) / 64.0 * circ).scalar);
  }

  const AssembledTorus metric = single_torus_block(std::move(block), f, 1.0, eps);
  const MetricCertificate cert = certify_metric_properties(metric, kSeed);
  if (!(cert.min_scalar >= -eps))
    line.fail("grid scalar min " + num(cert.min_scalar));
  if (!cert.pass()) line.fail("certificate");
  if (!(zone3_min >= zone3_bound))
    line.fail("zone-3 min " + num(zone3_min) + " < " + num(zone3_bound));
  line.note("min scalar " + num(cert.min_scalar) + " >= " + num(-eps) +
            ", zone-3 min " + num(zone3_min) + " >= " + num(zone3_bound));
  return line;
}

// 5. Every tabulated curvature bound holds on zone-stratified grids, with
//    positive slack on the strict rows.
Line criterion_bound_tables() {
  Line line;
  const ConformalFactor f = constant_factor(-1.0);
  const SphereBlock sb = reference_block(0.5, f);
  const TorusBlock tb = torus_block(0.1, f);
  for (int table : {1, 2, 3}) {
    const BoundTableReport rep = verify_bound_table(
        table == 3 ? tb.engine() : sb.engine(), table, 1.0);
    double strict_min = std::numeric_limits<double>::infinity();
    for (const BoundRow& row : rep.rows)
      if (row.kind == BoundKind::strict)
        strict_min = std::min(strict_min, row.min_slack);
    if (!rep.pass()) line.fail("table " + std::to_string(table));
    if (!(strict_min > 0.0))
      line.fail("table " + std::to_string(table) + " strict slack " +
                num(strict_min));
    line.note("table " + std::to_string(table) + " slack " + num(strict_min));
  }
  return line;
}

// 6. Saturated circle packing: separated centers, per-pair circles within
//    eta, 3-eta pair coverage, deterministic, and under the circle cap.
Line criterion_packing() {
  Line line;
  const SphereGeom geom{4};
  const std::vector<Vec> centers = pack_balls(geom, kPackEta, kSeed);
  const PackedAtlas atlas = select_circles(geom, centers, kPackEta, kSeed);
  const AtlasAudit audit = audit_atlas(geom, atlas, kSeed, 10000, 1000);

  if (!(kPackEta >= 0.05)) line.fail("eta below 0.05");
  if (static_cast<int>(atlas.circles.size()) > kPackCircleCap)
    line.fail(std::to_string(atlas.circles.size()) + " circles");
  if (!audit.pass(atlas)) line.fail("atlas audit");
  if (!(audit.min_circle_distance > 2.0 * atlas.R))
    line.fail("circle separation " + num(audit.min_circle_distance));

  const std::vector<Vec> again = pack_balls(geom, kPackEta, kSeed);
  bool deterministic = again.size() == centers.size();
  for (std::size_t i = 0; deterministic && i < centers.size(); ++i)
    deterministic = again[i] == centers[i];
  if (!deterministic) line.fail("repack differs");

  line.note("eta " + num(kPackEta) + ", " +
            std::to_string(atlas.centers.size()) + " centers, " +
            std::to_string(atlas.circles.size()) +
            " circles, min circle gap " + num(audit.min_circle_distance) +
            " > 2R " + num(2.0 * atlas.R) + ", pair cover " +
            num(audit.pair_cover_worst) + " <= " + num(3.0 * atlas.eta));
  return line;
}

const char* kSweepConfig =
    "manifold = sphere\n"
    "n = 4\n"
    "f = constant\n"
    "a = -1\n"
    "epsilon = 0.5 0.25 0.125\n"
    "seed = 421\n"
    "pairs = 100\n"
    "mesh_points = 3000\n"
    "mesh_neighbors = 16\n"
    "eta_floor = 0.9\n"
    "scalar_radial = 64\n"
    "scalar_angular = 64\n"
    "eig_samples = 500\n";

// 7. Distance brackets tighten through the epsilon sweep: both sup gaps
//    decrease, the fitted gap constant stays within 2x, brackets stay ordered.
Line criterion_convergence() {
  Line line;
  const std::filesystem::path out = "acceptance-c7";
  std::filesystem::remove_all(out);
  const ExperimentConfig cfg = parse_config(kSweepConfig);
  const RunManifest m = run_experiment(cfg, out.string());
  if (!m.convergence) {
    line.fail("no convergence report");
    return line;
  }
  const ConvergenceReport& rep = *m.convergence;
  for (const EpsilonRow& row : m.rows)
    if (!row.brackets_pass) line.fail("brackets at eps " + num(row.epsilon));
  if (!rep.gaps_decreasing) line.fail("gaps not decreasing");
  if (!rep.fitted_stable || !(rep.stability_ratio <= 2.0 + 1e-9))
    line.fail("fit ratio " + num(rep.stability_ratio));
  if (!m.pass()) line.fail("run");
  std::string gaps;
  for (const ConvergencePoint& p : rep.points) {
    if (!gaps.empty()) gaps += " -> ";
    gaps += num(std::max(p.sup_upper_gap, p.sup_lower_gap));
  }
  line.note("sup gap " + gaps + ", fit ratio " + num(rep.stability_ratio) +
            ", 100 pairs x 3 eps");
  return line;
}

// 8. Constant-factor calibration: mesh distances reproduce e^c times the
//    background distance inside the declared band, antipodal pair included.
Line criterion_calibration() {
  Line line;
  const SphereGeom geom{4};
  const double c = -1.0;
  std::vector<Vec> anchors = {axis(5, 0), -axis(5, 0)};
  MeshOptions opt;
  opt.base_points = 3000;
  opt.neighbors = 24;
  const ConformalMesh<SphereGeom> mesh(geom, constant_factor(c), anchors,
                                       kSeed, opt);
  const double scale = std::exp(c);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  Rng rng = Rng::stage(kSeed, "acc-calibration");
  for (int i = 0; i < kMeshPairs; ++i) {
    const int a = static_cast<int>(rng.uniform() * mesh.vertex_count());
    int b = static_cast<int>(rng.uniform() * mesh.vertex_count());
    if (a == b) b = (b + 1) % mesh.vertex_count();
    const double d0 = geom.distance(mesh.vertex(a), mesh.vertex(b));
    const double ratio = mesh.distance(a, b) / (scale * d0);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  const double antipodal = mesh.distance(0, 1) / (scale * pi);
  lo = std::min(lo, antipodal);
  hi = std::max(hi, antipodal);
  if (!(lo >= kMeshBandLo && hi <= kMeshBandHi))
    line.fail("band [" + num(lo) + ", " + num(hi) + "]");
  line.note("ratio band [" + num(lo) + ", " + num(hi) + "] within [" +
            num(kMeshBandLo) + ", " + num(kMeshBandHi) + "], antipodal " +
            num(antipodal));
  return line;
}

// 9. Bi-Lipschitz sandwich: sampled form eigenvalues stay inside
//    [1/C, C] with C = max(1+eps, (1+eps) e^{2 f_bar}) for every sweep eps.
Line criterion_bilipschitz() {
  Line line;
  const ConformalFactor f = constant_factor(-1.0);
  for (double eps : kSweepEps) {
    SphereBlock block = reference_block(eps, f);
    const AssembledSphere metric =
        single_sphere_block(SphereGeom{4}, std::move(block), f, 1.0, eps);
    const MetricCertificate cert = certify_metric_properties(metric, kSeed);
    const double C = std::max(1.0 + eps, (1.0 + eps) * std::exp(2.0));
    if (std::abs(cert.bilipschitz_constant - C) > 1e-12 * C)
      line.fail("constant at eps " + num(eps));
    if (!cert.sandwich_ok)
      line.fail("eigs [" + num(cert.min_form_eigenvalue) + ", " +
                num(cert.max_form_eigenvalue) + "] vs C " + num(C) +
                " at eps " + num(eps));
  }
  line.note("eigenvalues within [1/C, C], C = (1+eps) e^2, eps 0.5/0.25/0.125");
  return line;
}

struct Criterion {
  const char* name;
  double time_limit_s;  // 0 when the claim has no pinned runtime
  std::function<Line()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> table = {
      {"round/flat identities", 1.0, criterion_identities},
      {"finite-difference oracle equivalence", 60.0, criterion_oracle},
      {"sphere block certificate", 300.0, criterion_sphere_certificate},
      {"torus block certificate", 300.0, criterion_torus_certificate},
      {"curvature bound tables", 0.0, criterion_bound_tables},
      {"circle packing certificate", 300.0, criterion_packing},
      {"convergence brackets", 1800.0, criterion_convergence},
      {"distance oracle calibration", 0.0, criterion_calibration},
      {"bi-Lipschitz sandwich", 0.0, criterion_bilipschitz},
  };

  int failures = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const Criterion& c = table[i];
    Line line;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      line = c.run();
    } catch (const std::exception& ex) {
      line.fail(std::string("exception: ") + ex.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (c.time_limit_s > 0.0 && secs > c.time_limit_s)
      line.fail("over time limit " + num(c.time_limit_s) + " s");
    if (!line.ok) ++failures;
    std::printf("[%s] %zu. %s: %s (%.2f s%s)\n", line.ok ? "PASS" : "FAIL",
                i + 1, c.name, line.detail.c_str(), secs,
                c.time_limit_s > 0.0
                    ? (", limit " + num(c.time_limit_s)).c_str()
                    : "");
    std::fflush(stdout);
  }
  std::printf("%d/9 criteria passed\n", 9 - failures);
  return failures;
}
