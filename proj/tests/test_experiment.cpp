#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "warpcert/experiment.hpp"

using namespace warpcert;
namespace fs = std::filesystem;

namespace {

bool has_issue(const std::vector<ConfigIssue>& issues, int line,
               const std::string& needle) {
  for (const ConfigIssue& is : issues)
    if (is.line == line && is.message.find(needle) != std::string::npos)
      return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kSweepConfig =
    "# two-step sweep on the round sphere\n"
    "manifold = sphere\n"
    "n = 4\n"
    "f = constant\n"
    "a = -3\n"
    "epsilon = 0.5 0.25\n"
    "seed = 421\n"
    "pairs = 4\n"
    "mesh_points = 400\n"
    "mesh_neighbors = 12\n"
    "eta_floor = 0.9\n"
    "scalar_radial = 64\n"
    "scalar_angular = 64\n"
    "eig_samples = 500\n";

}  // namespace

TEST_CASE("config parser fills every recognized key") {
  const ExperimentConfig cfg = parse_config(kSweepConfig);
  REQUIRE(cfg.variant == Variant::sphere);
  REQUIRE(cfg.n == 4);
  REQUIRE(cfg.factor.family == "constant");
  REQUIRE(cfg.factor.a == -3.0);
  REQUIRE(cfg.factor.normalize);
  REQUIRE(cfg.epsilons == std::vector<double>{0.5, 0.25});
  REQUIRE(cfg.seed == 421);
  REQUIRE(cfg.pairs == 4);
  REQUIRE(cfg.mesh_points == 400);
  REQUIRE(cfg.mesh_neighbors == 12);
  REQUIRE(cfg.eta_floor == 0.9);
  REQUIRE(cfg.scalar_radial == 64);
  REQUIRE(cfg.scalar_angular == 64);
  REQUIRE(cfg.eig_samples == 500);
}

TEST_CASE("config validation reports each defect with its line") {
  const std::string text =
      "manifold = sphere\n"      // 1
      "n = 3\n"                  // 2
      "f = torus-cosine\n"       // 3
      "epsilon = 0.5 2.0\n"      // 4
      "bogus = 1\n"              // 5
      "pairs = 0\n"              // 6
      "just-a-token\n"           // 7
      "mesh_points = 50\n"       // 8
      "periods = 1 2 3 4\n";     // 9
  const auto issues = validate_config(text, nullptr);
  REQUIRE(has_issue(issues, 2, "n must be at least 4"));
  REQUIRE(has_issue(issues, 3, "torus-cosine requires manifold = torus"));
  REQUIRE(has_issue(issues, 4, "epsilon must lie in (0,1)"));
  REQUIRE(has_issue(issues, 5, "unknown key 'bogus'"));
  REQUIRE(has_issue(issues, 6, "pairs must be a positive integer"));
  REQUIRE(has_issue(issues, 7, "expected key = value"));
  REQUIRE(has_issue(issues, 8, "mesh_points must be an integer >= 100"));
  REQUIRE(has_issue(issues, 9, "periods only apply to the torus"));
  REQUIRE(has_issue(issues, 0, "seed is required"));

  REQUIRE(has_issue(validate_config("seed = 1\nepsilon = 0.1\n", nullptr), 0,
                    "manifold is required"));
  REQUIRE(has_issue(
      validate_config("manifold = klein\nseed = 1\nepsilon = 0.1\n", nullptr),
      1, "manifold must be sphere or torus"));
  REQUIRE(has_issue(
      validate_config(
          "manifold = sphere\nseed = 1\nepsilon = 0.5 0.5\n", nullptr),
      3, "epsilon values must be distinct"));
  REQUIRE(has_issue(
      validate_config("manifold = sphere\nseed = 1\nepsilon = 0.5\n"
                      "f = tabulated\nsamples = 1 2 3\n",
                      nullptr),
      5, "tabulated f needs at least 8 samples"));
  REQUIRE(has_issue(
      validate_config("manifold = sphere\nseed = 1\nepsilon = 0.5\n"
                      "f = constant\na = -0.5\nnormalize = off\n",
                      nullptr),
      6, "f must satisfy f <= -1 when normalize is off"));
  REQUIRE(has_issue(
      validate_config("manifold = torus\nseed = 1\nepsilon = 0.5\n"
                      "periods = 1 2\n",
                      nullptr),
      4, "periods must list exactly n lengths"));
  REQUIRE(has_issue(
      validate_config("manifold = sphere\nseed = 1\nepsilon = 0.5\na =\n",
                      nullptr),
      4, "empty value"));

  REQUIRE_THROWS_AS(parse_config("manifold = sphere\n"), config_error);
  REQUIRE_THROWS_AS(load_config_file("no-such-file.cfg"), config_error);
}

TEST_CASE("config hash ignores comments and spacing but not values") {
  const ExperimentConfig a = parse_config(kSweepConfig);
  const std::string shuffled =
      "seed=421\nepsilon =  0.5   0.25\nmanifold =sphere\n"
      "eta_floor = 0.9   # floor keeps one packing per sweep\n"
      "\n"
      "a = -3\nf = constant\nn = 4\npairs = 4\nmesh_points = 400\n"
      "mesh_neighbors = 12\nscalar_radial = 64\nscalar_angular = 64\n"
      "eig_samples = 500\n";
  const ExperimentConfig b = parse_config(shuffled);
  REQUIRE(config_canonical(a) == config_canonical(b));
  REQUIRE(config_hash(a) == config_hash(b));

  ExperimentConfig c = a;
  c.seed = 422;
  REQUIRE(config_hash(c) != config_hash(a));
}

TEST_CASE("tabulated factors interpolate their samples") {
  ExperimentConfig cfg;
  cfg.variant = Variant::torus;
  cfg.n = 4;
  cfg.factor.family = "tabulated";
  cfg.factor.samples.assign(8, -2.0);
  cfg.factor.normalize = false;
  const ConformalFactor f = make_conformal_factor(cfg);
  Vec p = Vec::Zero(4);
  for (double x : {0.0, 0.7, 3.1, 6.2, -1.3}) {
    p[0] = x;
    REQUIRE(f(p) == Catch::Approx(-2.0).margin(1e-12));
  }
  REQUIRE(f.sup == Catch::Approx(-2.0).margin(1e-12));
  REQUIRE(f.inf == Catch::Approx(-2.0).margin(1e-12));

  // Sphere tabulation clamps the first coordinate into [-1, 1].
  ExperimentConfig scfg;
  scfg.variant = Variant::sphere;
  scfg.factor.family = "tabulated";
  for (int j = 0; j < 10; ++j)
    scfg.factor.samples.push_back(-2.0 + 0.4 * std::sin(1.7 * j));
  const ConformalFactor g = make_conformal_factor(scfg);
  Vec q = Vec::Zero(5);
  q[0] = 2.0;
  Vec q1 = Vec::Zero(5);
  q1[0] = 1.0;
  REQUIRE(g(q) == g(q1));
  REQUIRE(g.sup < -1.0);
  REQUIRE(g.inf > -2.6);
}

TEST_CASE("factor preparation normalizes the supremum to minus one") {
  ExperimentConfig cfg;
  cfg.variant = Variant::sphere;
  cfg.factor.family = "constant";
  cfg.factor.a = -3.0;
  const PreparedFactor pf = prepare_factor(cfg);
  REQUIRE(pf.shift == Catch::Approx(-2.0).margin(1e-12));
  REQUIRE(pf.scale == Catch::Approx(std::exp(-4.0)).epsilon(1e-12));
  REQUIRE(pf.f_bar == Catch::Approx(1.0).margin(1e-12));
  Vec p = Vec::Zero(5);
  p[0] = 0.3;
  REQUIRE(pf.f(p) == Catch::Approx(-1.0).margin(1e-12));

  ExperimentConfig lin;
  lin.variant = Variant::sphere;
  lin.factor.family = "sphere-linear";
  lin.factor.a = 1.0;
  lin.factor.b = 0.5;
  const PreparedFactor pl = prepare_factor(lin);
  REQUIRE(pl.shift == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(pl.f_bar == Catch::Approx(2.0).margin(1e-9));

  // Unnormalized factors must already sit at or below minus one.
  ExperimentConfig bad;
  bad.variant = Variant::sphere;
  bad.factor.family = "constant";
  bad.factor.a = -0.5;
  bad.factor.normalize = false;
  REQUIRE_THROWS_AS(prepare_factor(bad), config_error);
}

TEST_CASE("sphere runs are deterministic end to end") {
  const ExperimentConfig cfg = parse_config(kSweepConfig);
  fs::remove_all("exp-run-a");
  fs::remove_all("exp-run-b");
  const RunManifest m1 = run_experiment(cfg, "exp-run-a");
  const RunManifest m2 = run_experiment(cfg, "exp-run-b");

  REQUIRE(m1.config_hash == config_hash(cfg));
  REQUIRE(m1.failed_stage.empty());
  REQUIRE(m1.rows.size() == 2);
  REQUIRE(m1.rows[0].epsilon == 0.5);  // sweep runs epsilon descending
  REQUIRE(m1.rows[1].epsilon == 0.25);
  REQUIRE(m1.shift == Catch::Approx(-2.0).margin(1e-12));
  REQUIRE(m1.f_bar == Catch::Approx(1.0).margin(1e-12));

  for (const EpsilonRow& row : m1.rows) {
    REQUIRE(row.modulus == 1.0);  // constant factor never moves
    REQUIRE(row.eta == 0.9);      // floor dominates epsilon * modulus / 6
    REQUIRE(row.metric_pass);
    REQUIRE(row.atlas_pass);
    REQUIRE(row.arcs_pass);
    REQUIRE(row.brackets_pass);
    REQUIRE(row.blocks == row.atlas_circles);
    REQUIRE(row.min_scalar > 0.0);
    REQUIRE(row.scalar_floor == 0.0);
    REQUIRE(row.delta > 0.0);
    REQUIRE(row.delta < 1e-6);
    REQUIRE(row.eps0 == 0.0);  // inner zone underflows at the certified cutoff
    REQUIRE(row.R > 0.0);
    REQUIRE(row.R < 0.01);
    REQUIRE(row.hat_alpha ==
            Catch::Approx(1.0 - row.R * row.R / 5.0).epsilon(1e-12));
  }
  // Both rows reuse one atlas under the eta floor.
  REQUIRE(m1.rows[0].atlas_centers == m1.rows[1].atlas_centers);
  REQUIRE(m1.rows[0].R == m1.rows[1].R);
  REQUIRE(m1.rows[0].bilipschitz ==
          Catch::Approx(1.5 * std::exp(2.0)).epsilon(1e-12));
  REQUIRE(m1.rows[1].bilipschitz ==
          Catch::Approx(1.25 * std::exp(2.0)).epsilon(1e-12));

  REQUIRE(m1.convergence.has_value());
  REQUIRE(m1.convergence->points.size() == 2);
  REQUIRE(m1.rows[1].sup_total_gap < m1.rows[0].sup_total_gap);
  REQUIRE(m1.convergence->pass());
  REQUIRE(m1.pass());

  // Same config, fresh directory: identical deterministic content.
  REQUIRE(manifest_json(m1)["deterministic"] ==
          manifest_json(m2)["deterministic"]);
  REQUIRE(slurp("exp-run-a/distances.csv") == slurp("exp-run-b/distances.csv"));
  REQUIRE(slurp("exp-run-a/convergence_summary.csv") ==
          slurp("exp-run-b/convergence_summary.csv"));

  // The manifest on disk carries the same deterministic block.
  const auto on_disk =
      nlohmann::json::parse(slurp("exp-run-a/manifest.json"));
  REQUIRE(on_disk["schema"] == "warpcert-manifest-1");
  REQUIRE(on_disk["failure"].is_null());
  REQUIRE(on_disk["deterministic"] == manifest_json(m1)["deterministic"]);

  REQUIRE(m1.timings_ms.count("mesh") == 1);
  REQUIRE(m1.timings_ms.count("certify") == 1);

  // Every listed artifact exists until one is removed.
  REQUIRE(verify_manifest_artifacts(m1));
  REQUIRE(verify_manifest_artifacts(m2));
  fs::remove("exp-run-b/distances.csv");
  REQUIRE_FALSE(verify_manifest_artifacts(m2));
}

TEST_CASE("torus runs certify the relaxed scalar floor") {
  const ExperimentConfig cfg = parse_config(
      "manifold = torus\n"
      "n = 4\n"
      "periods = 3 3 3 3\n"
      "f = torus-cosine\n"
      "a = 2\n"
      "b = 0.3\n"
      "epsilon = 0.1\n"
      "seed = 421\n"
      "scalar_radial = 64\n"
      "scalar_angular = 64\n"
      "eig_samples = 500\n");
  fs::remove_all("exp-run-t");
  const RunManifest m = run_experiment(cfg, "exp-run-t");
  REQUIRE(m.failed_stage.empty());
  REQUIRE(m.variant == Variant::torus);
  REQUIRE(m.rows.size() == 1);
  const EpsilonRow& row = m.rows[0];
  REQUIRE(row.scalar_floor == -0.1);
  REQUIRE(row.min_scalar >= -0.1);
  REQUIRE(row.metric_pass);
  REQUIRE(row.blocks == row.atlas_circles);
  REQUIRE(row.blocks == 32);  // 4 axes, two lattice lines per free axis
  REQUIRE(row.modulus > 0.0);
  REQUIRE(row.modulus < 1.0);
  REQUIRE_FALSE(m.convergence.has_value());
  REQUIRE(m.pass());
  REQUIRE(verify_manifest_artifacts(m));
}

TEST_CASE("stage failures leave a partial manifest behind") {
  // Periods this small force the tube radius under its floor during
  // assembly; the run must record the failing stage and rethrow.
  const ExperimentConfig cfg = parse_config(
      "manifold = torus\n"
      "n = 4\n"
      "periods = 5e-6 5e-6 5e-6 5e-6\n"
      "f = constant\n"
      "a = -1\n"
      "epsilon = 0.1\n"
      "seed = 7\n");
  fs::remove_all("exp-run-fail");
  REQUIRE_THROWS_AS(run_experiment(cfg, "exp-run-fail"), construction_error);
  const auto j = nlohmann::json::parse(slurp("exp-run-fail/manifest.json"));
  REQUIRE(j["schema"] == "warpcert-manifest-1");
  REQUIRE(j["failure"]["stage"] == "assemble");
  const std::string witness = j["failure"]["witness"];
  REQUIRE(witness.find("tube radius") != std::string::npos);
}
