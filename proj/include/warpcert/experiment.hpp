#pragma once

// Configuration-driven orchestration: parse a key-value experiment file,
// run normalize -> pack -> assemble -> certify -> bracket distances across an
// epsilon sweep, and emit a JSON manifest plus CSV tables.  All numeric
// output is deterministic for a fixed config and seed; wall-clock timings
// live in a separate manifest subtree so the deterministic part is
// byte-comparable across runs.

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "json.hpp"

#include "warpcert/assembly.hpp"
#include "warpcert/common.hpp"
#include "warpcert/conformal.hpp"
#include "warpcert/distance.hpp"
#include "warpcert/mesh.hpp"
#include "warpcert/packing.hpp"

namespace warpcert {

struct ConfigIssue {
  int line = 0;  // 0 for file-level issues
  std::string message;
};

struct FactorSpec {
  std::string family = "constant";  // constant | sphere-linear | torus-cosine | tabulated
  double a = 1.0;
  double b = 0.0;
  std::vector<double> samples;  // tabulated only
  bool normalize = true;
};

struct ExperimentConfig {
  Variant variant = Variant::sphere;
  int n = 4;
  std::vector<double> periods;  // torus; empty means 2*pi per axis
  FactorSpec factor;
  std::vector<double> epsilons;
  std::uint64_t seed = 0;
  int pairs = 100;
  int mesh_points = 3000;
  int mesh_neighbors = 24;
  double eta_floor = 0.6;
  double torus_spacing = 1.5;
  int scalar_radial = 400;
  int scalar_angular = 400;
  int eig_samples = 10000;
  std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool parse_double(const std::string& s, double* out) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return false;
    *out = v;
    return true;
  } catch (...) {
    return false;
  }
}

inline bool parse_double_list(const std::string& s, std::vector<double>* out) {
  std::istringstream in(s);
  std::string tok;
  out->clear();
  while (in >> tok) {
    double v = 0.0;
    if (!parse_double(tok, &v)) return false;
    out->push_back(v);
  }
  return !out->empty();
}

inline bool parse_int(const std::string& s, int* out) {
  double v = 0.0;
  if (!parse_double(s, &v)) return false;
  if (v != std::floor(v) || std::abs(v) > 2.0e9) return false;
  *out = static_cast<int>(v);
  return true;
}

inline bool parse_u64(const std::string& s, std::uint64_t* out) {
  if (s.empty()) return false;
  std::uint64_t v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  *out = v;
  return true;
}

}  // namespace detail

// Parse plus semantic checks with line-anchored diagnostics.  Returns every
// issue found; the parsed config in *out is only meaningful when the list
// comes back empty.
inline std::vector<ConfigIssue> validate_config(const std::string& text,
                                                ExperimentConfig* out) {
  using detail::trim;
  std::vector<ConfigIssue> issues;
  ExperimentConfig cfg;
  bool seed_seen = false, manifold_seen = false, epsilon_seen = false;
  int n_line = 0, family_line = 0, samples_line = 0, normalize_line = 0;
  int periods_line = 0;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line_no, "expected key = value"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (val.empty()) {
      issues.push_back({line_no, "empty value for key '" + key + "'"});
      continue;
    }

    if (key == "manifold") {
      manifold_seen = true;
      if (val == "sphere") {
        cfg.variant = Variant::sphere;
      } else if (val == "torus") {
        cfg.variant = Variant::torus;
      } else {
        issues.push_back({line_no, "manifold must be sphere or torus"});
      }
    } else if (key == "n") {
      n_line = line_no;
      if (!detail::parse_int(val, &cfg.n))
        issues.push_back({line_no, "n must be an integer"});
    } else if (key == "periods") {
      periods_line = line_no;
      if (!detail::parse_double_list(val, &cfg.periods))
        issues.push_back({line_no, "periods must be a list of numbers"});
    } else if (key == "f") {
      family_line = line_no;
      if (val == "constant" || val == "sphere-linear" || val == "torus-cosine" ||
          val == "tabulated") {
        cfg.factor.family = val;
      } else {
        issues.push_back(
            {line_no,
             "f must be constant, sphere-linear, torus-cosine, or tabulated"});
      }
    } else if (key == "a") {
      if (!detail::parse_double(val, &cfg.factor.a))
        issues.push_back({line_no, "a must be a number"});
    } else if (key == "b") {
      if (!detail::parse_double(val, &cfg.factor.b))
        issues.push_back({line_no, "b must be a number"});
    } else if (key == "samples") {
      samples_line = line_no;
      if (!detail::parse_double_list(val, &cfg.factor.samples))
        issues.push_back({line_no, "samples must be a list of numbers"});
    } else if (key == "normalize") {
      normalize_line = line_no;
      if (val == "on") {
        cfg.factor.normalize = true;
      } else if (val == "off") {
        cfg.factor.normalize = false;
      } else {
        issues.push_back({line_no, "normalize must be on or off"});
      }
    } else if (key == "epsilon") {
      epsilon_seen = true;
      if (!detail::parse_double_list(val, &cfg.epsilons)) {
        issues.push_back({line_no, "epsilon must be a list of numbers"});
      } else {
        for (double e : cfg.epsilons)
          if (!(e > 0.0 && e < 1.0)) {
            issues.push_back({line_no, "epsilon must lie in (0,1)"});
            break;
          }
        std::vector<double> sorted = cfg.epsilons;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          issues.push_back({line_no, "epsilon values must be distinct"});
      }
    } else if (key == "seed") {
      if (!detail::parse_u64(val, &cfg.seed))
        issues.push_back({line_no, "seed must be a nonnegative integer"});
      else
        seed_seen = true;
    } else if (key == "pairs") {
      if (!detail::parse_int(val, &cfg.pairs) || cfg.pairs < 1)
        issues.push_back({line_no, "pairs must be a positive integer"});
    } else if (key == "mesh_points") {
      if (!detail::parse_int(val, &cfg.mesh_points) || cfg.mesh_points < 100)
        issues.push_back({line_no, "mesh_points must be an integer >= 100"});
    } else if (key == "mesh_neighbors") {
      if (!detail::parse_int(val, &cfg.mesh_neighbors) ||
          cfg.mesh_neighbors < 4)
        issues.push_back({line_no, "mesh_neighbors must be an integer >= 4"});
    } else if (key == "eta_floor") {
      if (!detail::parse_double(val, &cfg.eta_floor) ||
          !(cfg.eta_floor > 0.0 && cfg.eta_floor < 0.5 * pi))
        issues.push_back({line_no, "eta_floor must lie in (0, pi/2)"});
    } else if (key == "torus_spacing") {
      if (!detail::parse_double(val, &cfg.torus_spacing) ||
          !(cfg.torus_spacing > 0.0))
        issues.push_back({line_no, "torus_spacing must be positive"});
    } else if (key == "scalar_radial") {
      if (!detail::parse_int(val, &cfg.scalar_radial) || cfg.scalar_radial < 16)
        issues.push_back({line_no, "scalar_radial must be an integer >= 16"});
    } else if (key == "scalar_angular") {
      if (!detail::parse_int(val, &cfg.scalar_angular) ||
          cfg.scalar_angular < 16)
        issues.push_back({line_no, "scalar_angular must be an integer >= 16"});
    } else if (key == "eig_samples") {
      if (!detail::parse_int(val, &cfg.eig_samples) || cfg.eig_samples < 100)
        issues.push_back({line_no, "eig_samples must be an integer >= 100"});
    } else if (key == "out") {
      cfg.out_dir = val;
    } else {
      issues.push_back({line_no, "unknown key '" + key + "'"});
    }
  }

  if (!manifold_seen) issues.push_back({0, "manifold is required"});
  if (!seed_seen) issues.push_back({0, "seed is required"});
  if (!epsilon_seen) issues.push_back({0, "epsilon is required"});
  if (cfg.n < 4)
    issues.push_back({n_line, "n must be at least 4"});

  const bool sphere = cfg.variant == Variant::sphere;
  if (sphere && cfg.factor.family == "torus-cosine")
    issues.push_back({family_line, "torus-cosine requires manifold = torus"});
  if (!sphere && cfg.factor.family == "sphere-linear")
    issues.push_back({family_line, "sphere-linear requires manifold = sphere"});
  if (sphere && !cfg.periods.empty())
    issues.push_back({periods_line, "periods only apply to the torus"});
  if (!sphere && !cfg.periods.empty() &&
      static_cast<int>(cfg.periods.size()) != cfg.n)
    issues.push_back({periods_line, "periods must list exactly n lengths"});
  if (!sphere)
    for (double L : cfg.periods)
      if (!(L > 0.0)) {
        issues.push_back({periods_line, "periods must be positive"});
        break;
      }

  if (cfg.factor.family == "tabulated") {
    if (cfg.factor.samples.size() < 8)
      issues.push_back({samples_line ? samples_line : 0,
                        "tabulated f needs at least 8 samples"});
    if (!cfg.factor.normalize)
      for (double v : cfg.factor.samples)
        if (!(v <= -1.0)) {
          issues.push_back({normalize_line ? normalize_line : samples_line,
                            "f must satisfy f <= -1 when normalize is off"});
          break;
        }
  } else if (!cfg.factor.normalize) {
    double sup = 0.0;
    if (cfg.factor.family == "constant")
      sup = cfg.factor.a;
    else
      sup = -cfg.factor.a + std::abs(cfg.factor.b);
    if (!(sup <= -1.0))
      issues.push_back({normalize_line,
                        "f must satisfy f <= -1 when normalize is off"});
  }

  if (issues.empty() && out) *out = cfg;
  return issues;
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  const std::vector<ConfigIssue> issues = validate_config(text, &cfg);
  if (!issues.empty()) {
    std::string msg = "config error";
    for (const ConfigIssue& is : issues)
      msg += "\n  line " + std::to_string(is.line) + ": " + is.message;
    throw config_error(msg);
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// Canonical serialization of the parsed config; hashing this rather than the
// raw text makes the hash insensitive to comments and whitespace.
inline std::string config_canonical(const ExperimentConfig& cfg) {
  char num[40];
  std::string s;
  auto put = [&](const char* key, const std::string& val) {
    s += key;
    s += '=';
    s += val;
    s += '\n';
  };
  auto fmt = [&](double v) {
    std::snprintf(num, sizeof num, "%.17g", v);
    return std::string(num);
  };
  put("manifold", cfg.variant == Variant::sphere ? "sphere" : "torus");
  put("n", std::to_string(cfg.n));
  std::string lst;
  for (double L : cfg.periods) lst += fmt(L) + " ";
  put("periods", lst);
  put("f", cfg.factor.family);
  put("a", fmt(cfg.factor.a));
  put("b", fmt(cfg.factor.b));
  lst.clear();
  for (double v : cfg.factor.samples) lst += fmt(v) + " ";
  put("samples", lst);
  put("normalize", cfg.factor.normalize ? "on" : "off");
  lst.clear();
  for (double e : cfg.epsilons) lst += fmt(e) + " ";
  put("epsilon", lst);
  put("seed", std::to_string(cfg.seed));
  put("pairs", std::to_string(cfg.pairs));
  put("mesh_points", std::to_string(cfg.mesh_points));
  put("mesh_neighbors", std::to_string(cfg.mesh_neighbors));
  put("eta_floor", fmt(cfg.eta_floor));
  put("torus_spacing", fmt(cfg.torus_spacing));
  put("scalar_radial", std::to_string(cfg.scalar_radial));
  put("scalar_angular", std::to_string(cfg.scalar_angular));
  put("eig_samples", std::to_string(cfg.eig_samples));
  return s;
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a(config_canonical(cfg));
}

// The conformal exponent as configured, before any normalization.
inline ConformalFactor make_conformal_factor(const ExperimentConfig& cfg) {
  const FactorSpec& spec = cfg.factor;
  if (spec.family == "constant") return constant_factor(spec.a);
  if (spec.family == "sphere-linear")
    return sphere_linear_factor(spec.a, spec.b);

  std::vector<double> periods = cfg.periods;
  if (cfg.variant == Variant::torus && periods.empty())
    periods.assign(static_cast<std::size_t>(cfg.n), 2.0 * pi);
  if (spec.family == "torus-cosine")
    return torus_cosine_factor(spec.a, spec.b, periods.at(0));

  // Tabulated: cubic spline through equally spaced samples of the first
  // coordinate; periodic guards on the torus, clamped ends on the sphere.
  ConformalFactor f;
  f.family = "tabulated";
  const std::vector<double>& v = spec.samples;
  const int m = static_cast<int>(v.size());
  if (cfg.variant == Variant::sphere) {
    const double h = 2.0 / (m - 1);
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline(
        v.data(), v.size(), -1.0, h);
    f.value = [spline](const Vec& p) {
      return spline(clamp_unit(p[0]));
    };
  } else {
    const double L = periods.at(0);
    const double h = L / m;
    std::vector<double> ext(static_cast<std::size_t>(m) + 6);
    for (int j = -3; j < m + 3; ++j)
      ext[static_cast<std::size_t>(j + 3)] =
          v[static_cast<std::size_t>(((j % m) + m) % m)];
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline(
        ext.data(), ext.size(), -3.0 * h, h);
    f.value = [spline, L](const Vec& p) {
      double s = std::fmod(p[0], L);
      if (s < 0.0) s += L;
      return spline(s);
    };
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const int scan = 8192;
  Vec probe = Vec::Zero(cfg.variant == Variant::sphere ? cfg.n + 1 : cfg.n);
  const double width = cfg.variant == Variant::sphere ? 2.0 : periods.at(0);
  const double start = cfg.variant == Variant::sphere ? -1.0 : 0.0;
  for (int i = 0; i <= scan; ++i) {
    probe[0] = start + width * i / scan;
    const double y = f.value(probe);
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  f.inf = lo;
  f.sup = hi;
  return f;
}

// The factor actually fed to the construction: normalized to sup = -1 when
// requested, passed through (and merely validated) otherwise.
struct PreparedFactor {
  ConformalFactor f;
  double f_bar = 1.0;
  double shift = 0.0;   // raw f = prepared f + shift
  double scale = 1.0;   // e^{2 shift}
};

inline PreparedFactor prepare_factor(const ExperimentConfig& cfg) {
  const ConformalFactor raw = make_conformal_factor(cfg);
  PreparedFactor out;
  if (cfg.factor.normalize) {
    NormalizedConformal norm = normalize_conformal_factor(raw);
    out.f = norm.f;
    out.f_bar = norm.f_bar;
    out.shift = norm.shift;
    out.scale = norm.scale;
  } else {
    if (!(raw.sup <= -1.0))
      throw config_error("f must satisfy f <= -1 when normalize is off");
    out.f = raw;
    out.f_bar = -raw.inf;
  }
  return out;
}

// ----------------------------------------------------------------------------
// Run manifest

struct EpsilonRow {
  double epsilon = 0.0;
  double modulus = 0.0;
  double eta = 0.0;  // sphere only
  double R = 0.0;
  double delta = 0.0;      // smallest certified cutoff over the blocks
  double eps0 = 0.0;       // zone-1 width at that cutoff (0 if underflowed)
  double hat_alpha = 0.0;
  int atlas_centers = 0;
  int atlas_circles = 0;
  int blocks = 0;
  double min_scalar = 0.0;
  double scalar_floor = 0.0;
  double bilipschitz = 0.0;
  bool metric_pass = false;
  bool atlas_pass = false;
  bool arcs_pass = false;
  bool brackets_pass = false;
  double sup_upper_gap = 0.0;
  double sup_lower_gap = 0.0;
  double sup_total_gap = 0.0;
  double fitted_C = 0.0;
};

struct RunManifest {
  std::uint64_t config_hash = 0;
  Variant variant = Variant::sphere;
  int n = 4;
  double shift = 0.0;
  double f_bar = 1.0;
  std::vector<EpsilonRow> rows;
  std::optional<ConvergenceReport> convergence;
  std::vector<std::string> artifacts;  // relative to out_dir
  std::map<std::string, double> timings_ms;
  std::string failed_stage;    // empty on success
  std::string failure_witness;
  std::string out_dir;

  bool pass() const {
    if (!failed_stage.empty() || rows.empty()) return false;
    for (const EpsilonRow& r : rows) {
      if (!r.metric_pass) return false;
      if (variant == Variant::sphere &&
          !(r.atlas_pass && r.arcs_pass && r.brackets_pass))
        return false;
    }
    if (convergence && !convergence->pass()) return false;
    return true;
  }
};

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write artifact: " + path.string());
  out << body;
}

inline nlohmann::json certificate_json(const MetricCertificate& c) {
  nlohmann::json j;
  j["variant"] = variant_name(c.variant);
  j["epsilon"] = c.epsilon;
  j["f_bar"] = c.f_bar;
  j["blocks"] = c.blocks;
  j["scalar_floor"] = c.scalar_floor;
  j["min_scalar"] = c.min_scalar;
  j["scalar_block"] = c.scalar_block;
  j["scalar_r"] = c.scalar_r;
  j["scalar_s"] = c.scalar_s;
  j["max_outside_deviation"] = c.max_outside_deviation;
  j["outside_samples"] = c.outside_samples;
  j["min_eig_upper"] = c.min_eig_upper;
  j["min_eig_lower"] = c.min_eig_lower;
  j["eig_samples"] = c.eig_samples;
  j["max_core_pointwise"] = c.max_core_pointwise;
  j["max_core_length_gap"] = c.max_core_length_gap;
  j["min_form_eigenvalue"] = c.min_form_eigenvalue;
  j["max_form_eigenvalue"] = c.max_form_eigenvalue;
  j["bilipschitz_constant"] = c.bilipschitz_constant;
  j["max_active"] = c.max_active;
  j["scalar_ok"] = c.scalar_ok;
  j["outside_ok"] = c.outside_ok;
  j["upper_ok"] = c.upper_ok;
  j["lower_ok"] = c.lower_ok;
  j["core_ok"] = c.core_ok;
  j["support_ok"] = c.support_ok;
  j["sandwich_ok"] = c.sandwich_ok;
  j["pass"] = c.pass();
  return j;
}

inline nlohmann::json atlas_json(const PackedAtlas& atlas,
                                 const AtlasAudit& audit) {
  nlohmann::json j;
  j["eta"] = atlas.eta;
  j["R"] = atlas.R;
  j["centers"] = atlas.center_count();
  j["circles"] = static_cast<int>(atlas.circles.size());
  j["min_circle_distance"] = atlas.min_circle_distance;
  j["audit"] = {{"min_center_separation", audit.min_center_separation},
                {"min_circle_distance", audit.min_circle_distance},
                {"max_center_to_circle", audit.max_center_to_circle},
                {"coverage_worst", audit.coverage_worst},
                {"pair_cover_worst", audit.pair_cover_worst},
                {"pass", audit.pass(atlas)}};
  nlohmann::json centers = nlohmann::json::array();
  for (const Vec& w : atlas.centers) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < w.size(); ++k) row.push_back(w[k]);
    centers.push_back(row);
  }
  j["center_points"] = centers;
  return j;
}

}  // namespace detail

inline nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json det;
  det["config_hash"] = detail::hash_hex(m.config_hash);
  det["variant"] = variant_name(m.variant);
  det["n"] = m.n;
  det["shift"] = m.shift;
  det["f_bar"] = m.f_bar;
  det["all_pass"] = m.pass();
  nlohmann::json rows = nlohmann::json::array();
  for (const EpsilonRow& r : m.rows) {
    nlohmann::json j;
    j["epsilon"] = r.epsilon;
    j["modulus"] = r.modulus;
    j["eta"] = r.eta;
    j["R"] = r.R;
    j["delta"] = r.delta;
    j["eps0"] = r.eps0;
    j["hat_alpha"] = r.hat_alpha;
    j["atlas_centers"] = r.atlas_centers;
    j["atlas_circles"] = r.atlas_circles;
    j["blocks"] = r.blocks;
    j["min_scalar"] = r.min_scalar;
    j["scalar_floor"] = r.scalar_floor;
    j["bilipschitz"] = r.bilipschitz;
    j["metric_pass"] = r.metric_pass;
    j["atlas_pass"] = r.atlas_pass;
    j["arcs_pass"] = r.arcs_pass;
    j["brackets_pass"] = r.brackets_pass;
    j["sup_upper_gap"] = r.sup_upper_gap;
    j["sup_lower_gap"] = r.sup_lower_gap;
    j["sup_total_gap"] = r.sup_total_gap;
    j["fitted_C"] = r.fitted_C;
    rows.push_back(j);
  }
  det["per_epsilon"] = rows;
  if (m.convergence) {
    const ConvergenceReport& rep = *m.convergence;
    det["convergence"] = {{"gaps_decreasing", rep.gaps_decreasing},
                          {"fitted_stable", rep.fitted_stable},
                          {"stability_ratio", rep.stability_ratio},
                          {"brackets_ok", rep.brackets_ok},
                          {"pass", rep.pass()}};
  } else {
    det["convergence"] = nullptr;
  }
  det["artifacts"] = m.artifacts;

  nlohmann::json j;
  j["schema"] = "warpcert-manifest-1";
  j["deterministic"] = det;
  j["timings_ms"] = m.timings_ms;
  if (m.failed_stage.empty()) {
    j["failure"] = nullptr;
  } else {
    j["failure"] = {{"stage", m.failed_stage},
                    {"witness", m.failure_witness}};
  }
  return j;
}

// Every artifact the manifest references must exist on disk.
inline bool verify_manifest_artifacts(const RunManifest& m) {
  namespace fs = std::filesystem;
  for (const std::string& rel : m.artifacts)
    if (!fs::exists(fs::path(m.out_dir) / rel)) return false;
  return true;
}

// Radial profile of the worst angular scalar curvature for one block; rows
// feed the plot-ready CSV.
inline std::vector<std::pair<double, double>> scalar_profile(
    const CurvatureEngine& engine, int radial = 256, int angular = 64) {
  std::vector<std::pair<double, double>> rows;
  const double R = engine.layout().R;
  const double circ = engine.circumference();
  for (int i = 1; i <= radial; ++i) {
    const double r = R * i / radial;
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < angular; ++j)
      worst = std::min(worst, engine.at(r, circ * j / angular).scalar);
    rows.emplace_back(r, worst);
  }
  return rows;
}

// Executes the full pipeline for one config.  Artifacts land in out_dir (or
// the override); a stage failure still writes the partial manifest with the
// failing stage's witness before rethrowing.
inline RunManifest run_experiment(const ExperimentConfig& cfg,
                                  const std::string& out_override = "") {
  namespace fs = std::filesystem;
  RunManifest manifest;
  manifest.config_hash = config_hash(cfg);
  manifest.variant = cfg.variant;
  manifest.n = cfg.n;
  manifest.out_dir = out_override.empty() ? cfg.out_dir : out_override;
  fs::create_directories(manifest.out_dir);

  std::string current_stage = "setup";
  auto timed = [&](const char* stage, auto&& fn) {
    current_stage = stage;
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    manifest.timings_ms[stage] +=
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  };
  auto emit = [&](const std::string& name, const std::string& body) {
    detail::write_text(fs::path(manifest.out_dir) / name, body);
    manifest.artifacts.push_back(name);
  };
  auto write_manifest = [&]() {
    detail::write_text(fs::path(manifest.out_dir) / "manifest.json",
                       manifest_json(manifest).dump(2) + "\n");
  };

  std::vector<double> eps = cfg.epsilons;
  std::sort(eps.begin(), eps.end(), std::greater<double>());

  try {
    PreparedFactor pf;
    timed("normalize", [&] { pf = prepare_factor(cfg); });
    manifest.shift = pf.shift;
    manifest.f_bar = pf.f_bar;

    CertBudget budget;
    budget.scalar_radial = cfg.scalar_radial;
    budget.scalar_angular = cfg.scalar_angular;
    budget.eig_samples = cfg.eig_samples;

    if (cfg.variant == Variant::sphere) {
      SphereGeom geom{cfg.n};

      // One oracle mesh serves the whole sweep: the target h does not
      // depend on epsilon.
      std::vector<Vec> anchors;
      std::optional<ConformalMesh<SphereGeom>> mesh;
      timed("mesh", [&] {
        Rng rng = Rng::stage(cfg.seed, "pair-endpoints");
        anchors.reserve(2 * static_cast<std::size_t>(cfg.pairs));
        for (int k = 0; k < 2 * cfg.pairs; ++k)
          anchors.push_back(geom.sample(rng));
        MeshOptions mo;
        mo.base_points = cfg.mesh_points;
        mo.neighbors = cfg.mesh_neighbors;
        mesh.emplace(geom, pf.f, anchors, cfg.seed, mo);
      });

      // Atlases are cached per realized eta; with the floor active across a
      // sweep every epsilon reuses the same packing.
      std::map<double, std::pair<PackedAtlas, AtlasAudit>> atlases;
      std::string distance_csv = "epsilon,pair,lower,upper,d_h,gap\n";
      std::string profile_csv = "epsilon,r,min_scalar\n";
      std::vector<ConvergencePoint> points;

      for (std::size_t ei = 0; ei < eps.size(); ++ei) {
        const double e = eps[ei];
        EpsilonRow row;
        row.epsilon = e;

        timed("modulus", [&] {
          row.modulus = modulus_delta(geom, pf.f, e, pf.f_bar, cfg.seed);
        });
        row.eta = std::max(e * row.modulus / 6.0, cfg.eta_floor);

        timed("pack", [&] {
          if (!atlases.count(row.eta)) {
            const std::vector<Vec> centers =
                pack_balls(geom, row.eta, cfg.seed);
            PackedAtlas atlas =
                select_circles(geom, centers, row.eta, cfg.seed);
            const AtlasAudit audit = audit_atlas(geom, atlas, cfg.seed);
            atlases.emplace(row.eta, std::make_pair(std::move(atlas), audit));
          }
        });
        const PackedAtlas& atlas = atlases.at(row.eta).first;
        const AtlasAudit& audit = atlases.at(row.eta).second;
        row.atlas_centers = atlas.center_count();
        row.atlas_circles = static_cast<int>(atlas.circles.size());
        row.atlas_pass = audit.pass(atlas);

        std::optional<AssembledSphere> assembled;
        timed("assemble", [&] {
          assembled.emplace(
              assemble_sphere(geom, atlas, pf.f, pf.f_bar, e, cfg.seed));
        });
        row.blocks = assembled->block_count();
        row.R = assembled->block(0).layout().R;
        row.hat_alpha = assembled->block(0).layout().hat_alpha;
        row.delta = std::numeric_limits<double>::infinity();
        for (int b = 0; b < assembled->block_count(); ++b) {
          const ZoneLayout& z = assembled->block(b).layout();
          if (z.delta < row.delta) {
            row.delta = z.delta;
            row.eps0 = z.eps0;
          }
        }

        MetricCertificate cert;
        timed("certify", [&] {
          cert = certify_metric_properties(*assembled, cfg.seed, budget);
        });
        row.metric_pass = cert.pass();
        row.min_scalar = cert.min_scalar;
        row.scalar_floor = cert.scalar_floor;
        row.bilipschitz = cert.bilipschitz_constant;
        const std::string tag = "eps" + std::to_string(ei);
        emit("metric_certificate_" + tag + ".json",
             detail::certificate_json(cert).dump(2) + "\n");
        emit("atlas_" + tag + ".json",
             detail::atlas_json(atlas, audit).dump(2) + "\n");

        for (const auto& pr : scalar_profile(assembled->block(0).engine()))
          profile_csv += detail::csv_num(e) + "," + detail::csv_num(pr.first) +
                         "," + detail::csv_num(pr.second) + "\n";

        std::vector<DistanceCertificate> certs;
        timed("distances", [&] {
          const ArcAudit arcs =
              audit_circle_arcs(geom, atlas, pf.f, e, row.modulus, cfg.seed);
          row.arcs_pass = arcs.pass;
          certs.reserve(static_cast<std::size_t>(cfg.pairs));
          for (int k = 0; k < cfg.pairs; ++k)
            certs.push_back(bracket_distance(geom, atlas, pf.f, e, pf.f_bar,
                                             row.modulus, *mesh, 2 * k,
                                             2 * k + 1));
        });
        for (std::size_t k = 0; k < certs.size(); ++k) {
          const DistanceCertificate& c = certs[k];
          distance_csv += detail::csv_num(e) + "," + std::to_string(k) + "," +
                          detail::csv_num(c.lower) + "," +
                          detail::csv_num(c.upper) + "," +
                          detail::csv_num(c.d_h) + "," +
                          detail::csv_num(c.gap()) + "\n";
        }
        const ConvergencePoint point = summarize_brackets(certs);
        row.brackets_pass = point.brackets_ok;
        row.sup_upper_gap = point.sup_upper_gap;
        row.sup_lower_gap = point.sup_lower_gap;
        row.sup_total_gap = point.sup_total_gap;
        row.fitted_C = point.fitted_C;
        points.push_back(point);
        manifest.rows.push_back(row);
      }

      timed("converge", [&] {
        if (points.size() >= 2)
          manifest.convergence = convergence_report(points);
      });

      timed("artifacts", [&] {
        emit("distances.csv", distance_csv);
        emit("scalar_profile.csv", profile_csv);
        std::string conv_csv =
            "epsilon,pairs,sup_upper_gap,sup_lower_gap,sup_total_gap,fitted_C\n";
        for (const ConvergencePoint& p : points)
          conv_csv += detail::csv_num(p.epsilon) + "," +
                      std::to_string(p.pairs) + "," +
                      detail::csv_num(p.sup_upper_gap) + "," +
                      detail::csv_num(p.sup_lower_gap) + "," +
                      detail::csv_num(p.sup_total_gap) + "," +
                      detail::csv_num(p.fitted_C) + "\n";
        emit("convergence_summary.csv", conv_csv);
        if (manifest.convergence) {
          nlohmann::json j;
          const ConvergenceReport& rep = *manifest.convergence;
          j["gaps_decreasing"] = rep.gaps_decreasing;
          j["fitted_stable"] = rep.fitted_stable;
          j["stability_ratio"] = rep.stability_ratio;
          j["brackets_ok"] = rep.brackets_ok;
          j["pass"] = rep.pass();
          emit("convergence_report.json", j.dump(2) + "\n");
        }
      });
    } else {
      TorusGeom geom;
      geom.periods = Vec::Constant(cfg.n, 2.0 * pi);
      for (std::size_t i = 0; i < cfg.periods.size(); ++i)
        geom.periods[static_cast<int>(i)] = cfg.periods[i];

      std::optional<TorusAtlas> atlas;
      timed("pack", [&] {
        atlas.emplace(build_torus_atlas(geom, cfg.torus_spacing));
      });

      std::string profile_csv = "epsilon,r,min_scalar\n";
      for (std::size_t ei = 0; ei < eps.size(); ++ei) {
        const double e = eps[ei];
        EpsilonRow row;
        row.epsilon = e;
        timed("modulus", [&] {
          row.modulus = modulus_delta(geom, pf.f, e, pf.f_bar, cfg.seed);
        });

        std::optional<AssembledTorus> assembled;
        timed("assemble", [&] {
          assembled.emplace(
              assemble_torus(*atlas, pf.f, pf.f_bar, e, cfg.seed));
        });
        row.blocks = assembled->block_count();
        row.atlas_circles = static_cast<int>(atlas->lines.size());
        row.R = assembled->block(0).layout().R;
        row.hat_alpha = assembled->block(0).layout().hat_alpha;
        row.delta = std::numeric_limits<double>::infinity();
        for (int b = 0; b < assembled->block_count(); ++b) {
          const ZoneLayout& z = assembled->block(b).layout();
          if (z.delta < row.delta) {
            row.delta = z.delta;
            row.eps0 = z.eps0;
          }
        }

        MetricCertificate cert;
        timed("certify", [&] {
          cert = certify_metric_properties(*assembled, cfg.seed, budget);
        });
        row.metric_pass = cert.pass();
        row.min_scalar = cert.min_scalar;
        row.scalar_floor = cert.scalar_floor;
        row.bilipschitz = cert.bilipschitz_constant;
        emit("metric_certificate_eps" + std::to_string(ei) + ".json",
             detail::certificate_json(cert).dump(2) + "\n");

        for (const auto& pr : scalar_profile(assembled->block(0).engine()))
          profile_csv += detail::csv_num(e) + "," + detail::csv_num(pr.first) +
                         "," + detail::csv_num(pr.second) + "\n";

        // Distance brackets are a sphere statement; the torus run certifies
        // the scalar floor sequence only.
        row.atlas_pass = true;
        row.arcs_pass = true;
        row.brackets_pass = true;
        manifest.rows.push_back(row);
      }
      timed("artifacts", [&] { emit("scalar_profile.csv", profile_csv); });
    }
  } catch (const std::exception& ex) {
    manifest.failed_stage = current_stage;
    manifest.failure_witness = ex.what();
    write_manifest();
    throw;
  }

  write_manifest();
  return manifest;
}

}  // namespace warpcert
