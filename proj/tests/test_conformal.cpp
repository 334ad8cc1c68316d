#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "warpcert/common.hpp"
#include "warpcert/conformal.hpp"
#include "warpcert/geometry.hpp"
#include "warpcert/rng.hpp"

using namespace warpcert;

namespace {

Vec axis(int dim, int i) {
  Vec e = Vec::Zero(dim);
  e[i] = 1.0;
  return e;
}

}  // namespace

TEST_CASE("builtin factor families carry exact range bounds") {
  const ConformalFactor c = constant_factor(-1.7);
  REQUIRE(c(axis(5, 2)) == -1.7);
  REQUIRE(c.sup == -1.7);
  REQUIRE(c.inf == -1.7);
  REQUIRE(c.family == "constant");

  const ConformalFactor lin = sphere_linear_factor(1.0, 0.5);
  REQUIRE(lin(axis(5, 0)) == -1.5);
  REQUIRE(lin(Vec(-axis(5, 0))) == -0.5);
  REQUIRE(lin(axis(5, 3)) == -1.0);
  REQUIRE(lin.sup == -0.5);
  REQUIRE(lin.inf == -1.5);

  const ConformalFactor cosf = torus_cosine_factor(2.0, 0.3, 4.0);
  Vec p = Vec::Zero(4);
  REQUIRE(cosf(p) == Catch::Approx(-2.3).epsilon(1e-15));
  p[0] = 2.0;  // half period: cosine flips sign
  REQUIRE(cosf(p) == Catch::Approx(-1.7).epsilon(1e-12));
  REQUIRE(cosf.sup == -1.7);
  REQUIRE(cosf.inf == -2.3);

  // Sampled values stay inside the declared range.
  Rng rng(51);
  const SphereGeom sphere{4};
  for (int i = 0; i < 200; ++i) {
    const double v = lin(sphere.sample(rng));
    REQUIRE(v <= lin.sup + 1e-15);
    REQUIRE(v >= lin.inf - 1e-15);
  }
}

TEST_CASE("normalization shifts the supremum to minus one") {
  const NormalizedConformal flat = normalize_conformal_factor(constant_factor(0.0));
  REQUIRE(flat.shift == 1.0);
  REQUIRE(flat.scale == Catch::Approx(std::exp(2.0)).epsilon(1e-15));
  REQUIRE(flat.f_bar == 1.0);
  REQUIRE(flat.f.sup == -1.0);
  REQUIRE(flat.f.inf == -1.0);
  REQUIRE(flat.f(axis(5, 1)) == -1.0);

  const NormalizedConformal lin =
      normalize_conformal_factor(sphere_linear_factor(1.0, 0.5));
  REQUIRE(lin.shift == 0.5);
  REQUIRE(lin.scale == Catch::Approx(std::exp(1.0)).epsilon(1e-15));
  REQUIRE(lin.f_bar == 2.0);
  REQUIRE(lin.f.sup == -1.0);
  REQUIRE(lin.f.inf == -2.0);
  // Pointwise the shifted factor is the original minus the shift.
  const ConformalFactor raw = sphere_linear_factor(1.0, 0.5);
  Rng rng(53);
  const SphereGeom sphere{4};
  for (int i = 0; i < 100; ++i) {
    const Vec p = sphere.sample(rng);
    REQUIRE(lin.f(p) == Catch::Approx(raw(p) - 0.5).margin(1e-15));
  }

  // Already-normalized input is left where it is.
  const NormalizedConformal id =
      normalize_conformal_factor(constant_factor(-1.0));
  REQUIRE(id.shift == 0.0);
  REQUIRE(id.scale == 1.0);
  REQUIRE(id.f_bar == 1.0);
}

TEST_CASE("constant factors certify the maximal continuity modulus") {
  const SphereGeom geom{4};
  const ConformalFactor f = constant_factor(-1.0);
  REQUIRE(modulus_delta(geom, f, 0.5, 1.0, 421, 2000) == 1.0);

  TorusGeom torus;
  torus.periods = Vec::Constant(4, 2.0 * pi);
  REQUIRE(modulus_delta(torus, f, 0.1, 1.0, 421, 2000) == 1.0);
}

TEST_CASE("lipschitz rule passes the continuity audit") {
  // For |f(x)-f(y)| <= K d(x,y), the modulus log(1+eps)/(5 K e^{f_bar})
  // keeps the oscillation under half log(1+eps) with a 25 percent margin.
  const SphereGeom geom{4};
  const NormalizedConformal lin =
      normalize_conformal_factor(sphere_linear_factor(1.0, 0.5));
  const double K = 0.5;
  const double eps = 0.5;
  const double rule =
      std::log1p(eps) / (5.0 * K * std::exp(lin.f_bar));
  Rng rng = Rng::stage(77, "rule-audit");
  REQUIRE(modulus_audit(geom, lin.f, rule, eps, lin.f_bar, rng, 20000));
}

TEST_CASE("certified modulus passes its audit on a fresh stream") {
  const SphereGeom geom{4};
  const NormalizedConformal lin =
      normalize_conformal_factor(sphere_linear_factor(1.0, 0.5));
  const double delta = modulus_delta(geom, lin.f, 0.5, lin.f_bar, 421, 20000);
  REQUIRE(delta > 0.0);
  REQUIRE(delta <= 1.0);
  // Halving from one always lands on a power of two.
  REQUIRE(std::log2(delta) == Catch::Approx(std::round(std::log2(delta))).margin(1e-12));
  Rng fresh = Rng::stage(9001, "independent-audit");
  REQUIRE(modulus_audit(geom, lin.f, delta, 0.5, lin.f_bar, fresh, 20000));
}

TEST_CASE("tube radius reduction only fires for oscillating factors") {
  const SphereGeom geom{4};
  // Constant factor: radius passes through untouched.
  REQUIRE(uniform_continuity_radius(geom, constant_factor(-1.0), 0.5, 0.0099,
                                    421) == 0.0099);

  const NormalizedConformal lin =
      normalize_conformal_factor(sphere_linear_factor(1.0, 0.5));
  const double r = uniform_continuity_radius(geom, lin.f, 0.5, 0.0099, 421);
  REQUIRE(r > 0.0);
  REQUIRE(r <= 0.0099);
}
