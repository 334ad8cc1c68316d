#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "warpcert/assembly.hpp"
#include "warpcert/common.hpp"
#include "warpcert/conformal.hpp"
#include "warpcert/fd_oracle.hpp"
#include "warpcert/geometry.hpp"
#include "warpcert/rng.hpp"

using namespace warpcert;

namespace {

Vec axis(int dim, int i) {
  Vec e = Vec::Zero(dim);
  e[i] = 1.0;
  return e;
}

Vec round_probe(Rng& rng) {
  Vec q(4);
  q[0] = rng.uniform(0.3, 1.2);
  q[1] = rng.uniform(-0.3, 0.3);
  q[2] = rng.uniform(-0.3, 0.3);
  q[3] = rng.uniform(0.0, 2.0 * pi);
  return q;
}

}  // namespace

TEST_CASE("differenced round metric recovers constant curvature") {
  const FdCurvature oracle(round_sphere_chart(4), 4);
  Rng rng(81);
  for (int i = 0; i < 6; ++i) {
    const Vec q = round_probe(rng);
    FdOptions opt;
    opt.step = 1e-3;
    REQUIRE(oracle.scalar(q, opt) == Catch::Approx(12.0).epsilon(1e-6));
    REQUIRE(oracle.sectional(q, axis(4, 0), axis(4, 3), opt) ==
            Catch::Approx(1.0).epsilon(1e-6));
    REQUIRE(oracle.sectional(q, axis(4, 1), axis(4, 2), opt) ==
            Catch::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("differenced flat metric recovers zero curvature") {
  const FdCurvature oracle(flat_torus_chart(4), 4);
  Rng rng(83);
  for (int i = 0; i < 6; ++i) {
    const Vec q = round_probe(rng);
    FdOptions opt;
    opt.step = 1e-3;
    REQUIRE(oracle.scalar(q, opt) == Catch::Approx(0.0).margin(1e-8));
    REQUIRE(oracle.sectional(q, axis(4, 0), axis(4, 2), opt) ==
            Catch::Approx(0.0).margin(1e-8));
  }
}

TEST_CASE("richardson extrapolation tightens the scalar estimate") {
  const FdCurvature oracle(round_sphere_chart(4), 4);
  Vec q(4);
  q << 0.8, 0.1, -0.05, 1.0;
  FdOptions coarse;
  coarse.step = 4e-3;
  coarse.richardson = false;
  FdOptions rich = coarse;
  rich.richardson = true;
  const double err_coarse = std::abs(oracle.scalar(q, coarse) - 12.0);
  const double err_rich = std::abs(oracle.scalar(q, rich) - 12.0);
  REQUIRE(err_rich < err_coarse);
  REQUIRE(err_rich < 1e-7);
}

TEST_CASE("metric derivatives match a hand derivative of the fiber factor") {
  const FdCurvature oracle(flat_torus_chart(4), 4);
  Vec q(4);
  q << 0.7, 0.1, -0.2, 2.0;
  const auto dg = oracle.metric_derivatives(q, 1e-4);
  const double c = 1.0 + q[1] * q[1] + q[2] * q[2];
  // d/dr of r^2 * 4 / c^2 keeps c fixed.
  REQUIRE(dg[0](1, 1) == Catch::Approx(2.0 * q[0] * 4.0 / (c * c)).epsilon(1e-9));
  REQUIRE(dg[0](3, 3) == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(dg[3](1, 1) == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("differenced ambient sphere form matches the closed-form scalar") {
  // The normal chart differences the assembled ambient form, never the
  // profile jets, so agreement pins the closed-form scalar assembly.  The
  // tube chart is unusable for this comparison: its cot(r) Christoffel
  // symbols cap finite-difference accuracy near 1e-4 at tube scale.
  const SphereGeom geom{4};
  const GreatCircle circle{axis(5, 0), axis(5, 1)};
  const ConformalFactor f = constant_factor(-1.0);
  const SphereBlock block =
      build_sphere_block(geom, circle, f, 1.0, 0.5, 0.005, 421);
  const ZoneLayout& z = block.layout();

  Rng rng(85);
  for (int i = 0; i < 8; ++i) {
    const double r = ambient_probe_radius(z, rng);
    const double s = rng.uniform(0.0, 2.0 * pi);
    const Vec p = block.tube().from_coords(r, block.fiber_sample(rng), s);
    const TubeCoords tc = block.tube().coords(p);
    const ChartMetric chart = normal_chart_on_sphere(
        [&block](const Vec& q) { return block.ambient_form(q); }, p, 991 + i);
    const FdCurvature oracle(chart, 4);
    FdOptions opt;
    opt.step = normal_probe_step(z, tc.r);
    const double fd = oracle.scalar(Vec::Zero(4), opt);
    const double closed = block.engine().at(tc.r, tc.s).scalar;
    REQUIRE(fd == Catch::Approx(closed).epsilon(1e-4));
  }
}

TEST_CASE("ambient differencing covers a factor that varies along the circle") {
  // The closed forms treat the circle angle as a parameter: s-derivatives of
  // the warp never enter the scalar because the transverse metric block is
  // s-independent.  The differenced ambient form sees those derivatives in
  // full, so agreement here checks that claim, not just the radial jets.
  const SphereGeom geom{4};
  const GreatCircle circle{axis(5, 0), axis(5, 1)};
  const ConformalFactor f = sphere_linear_factor(2.0, 0.5);
  const SphereBlock block =
      build_sphere_block(geom, circle, f, 1.0, 0.5, 0.005, 433);
  const ZoneLayout& z = block.layout();

  Rng rng(77);
  for (int i = 0; i < 6; ++i) {
    const double r = ambient_probe_radius(z, rng);
    const double s = rng.uniform(0.0, 2.0 * pi);
    const Vec p = block.tube().from_coords(r, block.fiber_sample(rng), s);
    const TubeCoords tc = block.tube().coords(p);
    const ChartMetric chart = normal_chart_on_sphere(
        [&block](const Vec& q) { return block.ambient_form(q); }, p, 337 + i);
    FdOptions opt;
    opt.step = normal_probe_step(z, tc.r);
    const double fd = FdCurvature(chart, 4).scalar(Vec::Zero(4), opt);
    const double closed = block.engine().at(tc.r, tc.s).scalar;
    REQUIRE(fd == Catch::Approx(closed).epsilon(1e-4));
  }
}

TEST_CASE("tube chart entries reproduce the profile values") {
  const SphereGeom geom{4};
  const GreatCircle circle{axis(5, 0), axis(5, 1)};
  const ConformalFactor f = constant_factor(-1.0);
  const SphereBlock block =
      build_sphere_block(geom, circle, f, 1.0, 0.5, 0.005, 421);
  const ChartMetric chart = block_chart_metric(block.engine());

  Vec q(4);
  q << 0.004, 0.15, -0.1, 1.0;
  const Mat g = chart(q);
  const double c = 1.0 + q[1] * q[1] + q[2] * q[2];
  const double sr = std::sin(q[0]);
  REQUIRE(g(0, 0) == 1.0 / block.engine().warp().alpha(q[0]));
  REQUIRE(g(1, 1) == sr * sr * 4.0 / (c * c));
  REQUIRE(g(2, 2) == g(1, 1));
  REQUIRE(g(3, 3) ==
          std::exp(2.0 * block.engine().beta().jet(q[3], q[0]).y));
  REQUIRE(g(0, 1) == 0.0);
  REQUIRE(g(1, 3) == 0.0);

  Vec bad(4);
  bad << -0.001, 0.0, 0.0, 1.0;
  REQUIRE_THROWS_AS(chart(bad), oracle_error);
  bad[0] = 1.6;
  REQUIRE_THROWS_AS(chart(bad), oracle_error);
  REQUIRE_THROWS_AS(chart(Vec::Zero(3)), oracle_error);
}

TEST_CASE("torus block chart agrees with the closed-form curvature") {
  TorusGeom geom;
  geom.periods = Vec::Constant(4, 2.0 * pi);
  TorusLine line{0, Vec::Zero(4)};
  const ConformalFactor f = constant_factor(-1.0);
  const TorusBlock block = build_torus_block(geom, line, f, 1.0, 0.1, 1.0, 421);
  const FdCurvature oracle(block_chart_metric(block.engine()), 4);

  Rng rng(87);
  for (int i = 0; i < 8; ++i) {
    const Vec q = chart_probe(block.layout(), 2.0 * pi, rng);
    FdOptions opt;
    opt.step = chart_probe_step(block.layout(), q[0]);
    const double fd = oracle.scalar(q, opt);
    const double closed = block.engine().at(q[0], q[3]).scalar;
    REQUIRE(fd == Catch::Approx(closed).margin(1e-4 * std::max(1.0, std::abs(closed))));
  }
}

TEST_CASE("differenced ambient torus form matches near the axis") {
  TorusGeom geom;
  geom.periods = Vec::Constant(4, 2.0 * pi);
  TorusLine line{0, Vec::Zero(4)};
  const ConformalFactor f = constant_factor(-1.0);
  const TorusBlock block = build_torus_block(geom, line, f, 1.0, 0.1, 1.0, 421);
  const ZoneLayout& z = block.layout();

  Rng rng(89);
  for (int i = 0; i < 4; ++i) {
    const double r = z.R * rng.uniform(0.01, 0.3);
    const double s = rng.uniform(0.0, geom.periods[0]);
    const Vec p = block.line().from_coords(geom, r, block.fiber_sample(rng), s);
    const TubeCoords tc = block.line().coords(geom, p);
    const ChartMetric chart = normal_chart_on_torus(
        [&block](const Vec& q) { return block.ambient_form(q); }, geom, p);
    FdOptions opt;
    opt.step = normal_probe_step(z, tc.r);
    const double fd = FdCurvature(chart, 4).scalar(Vec::Zero(4), opt);
    const double closed = block.engine().at(tc.r, tc.s).scalar;
    REQUIRE(fd ==
            Catch::Approx(closed).margin(1e-4 * std::max(1.0, std::abs(closed))));
  }
}

TEST_CASE("degenerate samples raise oracle errors") {
  auto singular = [](const Vec& q) {
    Mat g = Mat::Zero(q.size(), q.size());
    g(0, 0) = 1.0;  // rank one
    return g;
  };
  const FdCurvature oracle(singular, 4);
  Vec q(4);
  q << 0.5, 0.0, 0.0, 1.0;
  REQUIRE_THROWS_AS(oracle.scalar(q, FdOptions{}), oracle_error);
  REQUIRE_THROWS_AS(FdCurvature(round_sphere_chart(4), 1), dimension_error);
}
