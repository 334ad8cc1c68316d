// Command-line front end: run full experiments, certify a single block,
// inspect packings, bracket distances, and pretty-print run manifests.

#include <cstdio>
#include <fstream>
#include <string>

#include "CLI11.hpp"

#include "warpcert/experiment.hpp"

namespace wc = warpcert;

namespace {

void print_row(const wc::EpsilonRow& r, bool sphere) {
  std::printf("  epsilon %-8g eta %-8g blocks %-5d R %-11g delta %-11g\n",
              r.epsilon, r.eta, r.blocks, r.R, r.delta);
  std::printf("    min scalar %-14g floor %-10g bilipschitz %-10g metric %s\n",
              r.min_scalar, r.scalar_floor, r.bilipschitz,
              r.metric_pass ? "pass" : "FAIL");
  if (sphere)
    std::printf(
        "    atlas %s  arcs %s  brackets %s  sup gap %-12g fitted C %-10g\n",
        r.atlas_pass ? "pass" : "FAIL", r.arcs_pass ? "pass" : "FAIL",
        r.brackets_pass ? "pass" : "FAIL", r.sup_total_gap, r.fitted_C);
}

int print_manifest(const wc::RunManifest& m) {
  std::printf("manifest: %s/manifest.json  (config %s)\n", m.out_dir.c_str(),
              wc::detail::hash_hex(m.config_hash).c_str());
  std::printf("variant %s  n %d  shift %g  f_bar %g\n",
              wc::variant_name(m.variant), m.n, m.shift, m.f_bar);
  const bool sphere = m.variant == wc::Variant::sphere;
  for (const wc::EpsilonRow& r : m.rows) print_row(r, sphere);
  if (m.convergence) {
    const wc::ConvergenceReport& rep = *m.convergence;
    std::printf(
        "convergence: gaps %s  fit stability %.4g (<= 2)  verdict %s\n",
        rep.gaps_decreasing ? "decreasing" : "NOT DECREASING",
        rep.stability_ratio, rep.pass() ? "pass" : "FAIL");
  }
  double total = 0.0;
  for (const auto& kv : m.timings_ms) total += kv.second;
  std::printf("stages:");
  for (const auto& kv : m.timings_ms)
    std::printf(" %s %.0fms", kv.first.c_str(), kv.second);
  std::printf("  (total %.0fms)\n", total);
  if (!m.failed_stage.empty())
    std::printf("FAILED at stage %s: %s\n", m.failed_stage.c_str(),
                m.failure_witness.c_str());
  const bool ok = m.pass() && wc::verify_manifest_artifacts(m);
  std::printf("overall: %s\n", ok ? "pass" : "FAIL");
  return ok ? 0 : 1;
}

void print_bound_table(const wc::BoundTableReport& rep) {
  std::printf("  table %d (%s): %s\n", rep.table,
              rep.table == 3 ? "torus" : "sphere",
              rep.pass() ? "pass" : "FAIL");
  for (const wc::BoundRow& row : rep.rows) {
    std::printf("    zone %d %-3s %-9s min slack %-13g %s\n", row.zone,
                wc::section_name(row.section),
                row.kind == wc::BoundKind::strict
                    ? "strict"
                    : row.kind == wc::BoundKind::attained ? "attained"
                                                          : "identity",
                row.min_slack,
                row.pass(rep.identity_tol) ? "ok" : "VIOLATED");
  }
}

wc::ExperimentConfig default_config(const std::string& manifold) {
  wc::ExperimentConfig cfg;
  cfg.variant = manifold == "torus" ? wc::Variant::torus : wc::Variant::sphere;
  cfg.n = 4;
  cfg.factor.family = "constant";
  cfg.factor.a = -1.0;
  cfg.epsilons = {0.5};
  cfg.seed = 421;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"construct and certify near-conformal metrics of positive "
               "scalar curvature"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifold = "sphere";
  std::uint64_t seed = 421;
  double epsilon = 0.5;
  double eta = 0.6;
  int pairs = 0;

  CLI::App* run = app.add_subcommand("run", "execute a full experiment sweep");
  run->add_option("--config", config_path, "experiment config file")
      ->required();
  CLI::Option* run_seed = run->add_option("--seed", seed, "override seed");
  run->add_option("--out", out_dir, "override output directory");

  CLI::App* verify =
      app.add_subcommand("verify-block", "certify one warped tube block");
  verify->add_option("--config", config_path, "config supplying f and n");
  verify->add_option("--manifold", manifold, "sphere or torus")
      ->check(CLI::IsMember({"sphere", "torus"}));
  verify->add_option("--epsilon", epsilon, "target epsilon");
  verify->add_option("--seed", seed, "seed");

  CLI::App* pack = app.add_subcommand("pack", "build and audit an atlas");
  pack->add_option("--manifold", manifold, "sphere or torus")
      ->check(CLI::IsMember({"sphere", "torus"}));
  pack->add_option("--eta", eta, "sphere packing scale");
  pack->add_option("--seed", seed, "seed");
  pack->add_option("--out", out_dir, "write atlas JSON here");

  CLI::App* dist =
      app.add_subcommand("distances", "bracket distances for one epsilon");
  dist->add_option("--config", config_path, "experiment config file")
      ->required();
  dist->add_option("--epsilon", epsilon, "epsilon (defaults to config head)");
  CLI::Option* dist_eps = dist->get_option("--epsilon");
  dist->add_option("--pairs", pairs, "override pair count");
  CLI::Option* dist_seed = dist->add_option("--seed", seed, "override seed");

  std::string report_dir;
  CLI::App* report = app.add_subcommand("report", "summarize a run manifest");
  report->add_option("dir", report_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      wc::ExperimentConfig cfg = wc::load_config_file(config_path);
      if (run_seed->count() > 0) cfg.seed = seed;
      wc::RunManifest m = wc::run_experiment(cfg, out_dir);
      return print_manifest(m);
    }

    if (verify->parsed()) {
      wc::ExperimentConfig cfg = config_path.empty()
                                     ? default_config(manifold)
                                     : wc::load_config_file(config_path);
      if (verify->get_option("--epsilon")->count() > 0 ||
          cfg.epsilons.empty())
        cfg.epsilons = {epsilon};
      const double e = cfg.epsilons.front();
      const wc::PreparedFactor pf = wc::prepare_factor(cfg);
      bool ok = true;
      if (cfg.variant == wc::Variant::sphere) {
        wc::SphereGeom geom{cfg.n};
        wc::GreatCircle circle;
        circle.u = wc::Vec::Zero(geom.ambient());
        circle.v = wc::Vec::Zero(geom.ambient());
        circle.u[0] = 1.0;
        circle.v[1] = 1.0;
        const wc::SphereBlock block = wc::build_sphere_block(
            geom, circle, pf.f, pf.f_bar, e, 0.005, seed);
        const wc::ZoneLayout& z = block.layout();
        std::printf(
            "sphere block: R %g  delta %g  eps0 %g  hat_alpha %.12g\n", z.R,
            z.delta, z.eps0, z.hat_alpha);
        std::printf("  min r^2 scalar on cutoff grid: %g\n",
                    block.delta_certificate().min_r2_scalar);
        for (int table = 1; table <= 2; ++table) {
          const wc::BoundTableReport rep =
              wc::verify_bound_table(block.engine(), table, pf.f_bar);
          print_bound_table(rep);
          ok = ok && rep.pass();
        }
        const wc::AssembledSphere single =
            wc::single_sphere_block(geom, block, pf.f, pf.f_bar, e);
        const wc::MetricCertificate cert =
            wc::certify_metric_properties(single, seed);
        std::printf("  metric certificate: %s (min scalar %g)\n",
                    cert.pass() ? "pass" : "FAIL", cert.min_scalar);
        ok = ok && cert.pass();
      } else {
        wc::TorusGeom geom;
        geom.periods = wc::Vec::Constant(cfg.n, 2.0 * wc::pi);
        for (std::size_t i = 0; i < cfg.periods.size(); ++i)
          geom.periods[static_cast<int>(i)] = cfg.periods[i];
        wc::TorusLine line;
        line.axis = 0;
        line.base = wc::Vec::Zero(geom.n());
        const wc::TorusBlock block = wc::build_torus_block(
            geom, line, pf.f, pf.f_bar, e, 1.0, seed);
        const wc::ZoneLayout& z = block.layout();
        std::printf(
            "torus block: R %g  delta %g  eps0 %g  hat_alpha %.12g\n", z.R,
            z.delta, z.eps0, z.hat_alpha);
        const wc::BoundTableReport rep =
            wc::verify_bound_table(block.engine(), 3, pf.f_bar);
        print_bound_table(rep);
        ok = rep.pass();
        const wc::AssembledTorus single =
            wc::single_torus_block(block, pf.f, pf.f_bar, e);
        const wc::MetricCertificate cert =
            wc::certify_metric_properties(single, seed);
        std::printf("  metric certificate: %s (min scalar %g >= %g)\n",
                    cert.pass() ? "pass" : "FAIL", cert.min_scalar,
                    cert.scalar_floor);
        ok = ok && cert.pass();
      }
      std::printf("verify-block: %s\n", ok ? "pass" : "FAIL");
      return ok ? 0 : 1;
    }

    if (pack->parsed()) {
      if (manifold == "sphere") {
        wc::SphereGeom geom{4};
        const std::vector<wc::Vec> centers =
            wc::pack_balls(geom, eta, seed);
        const wc::PackedAtlas atlas =
            wc::select_circles(geom, centers, eta, seed);
        const wc::AtlasAudit audit = wc::audit_atlas(geom, atlas, seed);
        std::printf(
            "atlas: eta %g  centers %d  circles %zu  R %g  min circle gap "
            "%g\n",
            atlas.eta, atlas.center_count(), atlas.circles.size(), atlas.R,
            atlas.min_circle_distance);
        std::printf(
            "audit: separation %g  center-to-circle %g  coverage %g  pair "
            "cover %g  %s\n",
            audit.min_center_separation, audit.max_center_to_circle,
            audit.coverage_worst, audit.pair_cover_worst,
            audit.pass(atlas) ? "pass" : "FAIL");
        if (!out_dir.empty()) {
          std::filesystem::create_directories(out_dir);
          wc::detail::write_text(
              std::filesystem::path(out_dir) / "atlas.json",
              wc::detail::atlas_json(atlas, audit).dump(2) + "\n");
          std::printf("wrote %s/atlas.json\n", out_dir.c_str());
        }
        return audit.pass(atlas) ? 0 : 1;
      }
      wc::TorusGeom geom;
      geom.periods = wc::Vec::Constant(4, 2.0 * wc::pi);
      const wc::TorusAtlas atlas = wc::build_torus_atlas(geom, 1.5);
      std::printf("torus atlas: lines %zu  R %g  min line gap %g\n",
                  atlas.lines.size(), atlas.R, atlas.min_line_distance);
      return atlas.min_line_distance > 2.0 * atlas.R ? 0 : 1;
    }

    if (dist->parsed()) {
      wc::ExperimentConfig cfg = wc::load_config_file(config_path);
      if (dist_seed->count() > 0) cfg.seed = seed;
      if (dist_eps->count() > 0) cfg.epsilons = {epsilon};
      if (pairs > 0) cfg.pairs = pairs;
      if (cfg.variant != wc::Variant::sphere)
        throw wc::config_error("distances: brackets are a sphere statement");
      const double e = cfg.epsilons.front();
      const wc::PreparedFactor pf = wc::prepare_factor(cfg);
      wc::SphereGeom geom{cfg.n};
      const double modulus =
          wc::modulus_delta(geom, pf.f, e, pf.f_bar, cfg.seed);
      const double net = std::max(e * modulus / 6.0, cfg.eta_floor);
      const std::vector<wc::Vec> centers =
          wc::pack_balls(geom, net, cfg.seed);
      const wc::PackedAtlas atlas =
          wc::select_circles(geom, centers, net, cfg.seed);
      wc::Rng rng = wc::Rng::stage(cfg.seed, "pair-endpoints");
      std::vector<wc::Vec> anchors;
      for (int k = 0; k < 2 * cfg.pairs; ++k)
        anchors.push_back(geom.sample(rng));
      wc::MeshOptions mo;
      mo.base_points = cfg.mesh_points;
      mo.neighbors = cfg.mesh_neighbors;
      const wc::ConformalMesh<wc::SphereGeom> mesh(geom, pf.f, anchors,
                                                   cfg.seed, mo);
      std::printf("pair  lower         d_h           upper         hops\n");
      std::vector<wc::DistanceCertificate> certs;
      for (int k = 0; k < cfg.pairs; ++k) {
        certs.push_back(wc::bracket_distance(geom, atlas, pf.f, e, pf.f_bar,
                                             modulus, mesh, 2 * k, 2 * k + 1));
        const wc::DistanceCertificate& c = certs.back();
        std::printf("%-5d %-13.8f %-13.8f %-13.8f %s\n", k, c.lower, c.d_h,
                    c.upper, c.used_direct ? "direct" : "arc");
      }
      const wc::ConvergencePoint pt = wc::summarize_brackets(certs);
      std::printf(
          "epsilon %g: sup upper gap %g  sup lower gap %g  brackets %s\n",
          e, pt.sup_upper_gap, pt.sup_lower_gap,
          pt.brackets_ok ? "ok" : "VIOLATED");
      return pt.brackets_ok ? 0 : 1;
    }

    if (report->parsed()) {
      std::ifstream in(std::filesystem::path(report_dir) / "manifest.json");
      if (!in)
        throw wc::config_error("report: no manifest.json in " + report_dir);
      nlohmann::json j;
      in >> j;
      const nlohmann::json& det = j.at("deterministic");
      std::printf("config %s  variant %s  n %d  all_pass %s\n",
                  det.at("config_hash").get<std::string>().c_str(),
                  det.at("variant").get<std::string>().c_str(),
                  det.at("n").get<int>(),
                  det.at("all_pass").get<bool>() ? "true" : "false");
      for (const auto& row : det.at("per_epsilon"))
        std::printf(
            "  epsilon %-8g blocks %-5d min scalar %-13g metric %s sup gap "
            "%g\n",
            row.at("epsilon").get<double>(), row.at("blocks").get<int>(),
            row.at("min_scalar").get<double>(),
            row.at("metric_pass").get<bool>() ? "pass" : "FAIL",
            row.at("sup_total_gap").get<double>());
      bool exists = true;
      for (const auto& rel : det.at("artifacts"))
        exists = exists &&
                 std::filesystem::exists(std::filesystem::path(report_dir) /
                                         rel.get<std::string>());
      std::printf("artifacts present: %s\n", exists ? "yes" : "NO");
      return det.at("all_pass").get<bool>() && exists ? 0 : 1;
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 1;
}
