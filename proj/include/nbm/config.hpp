#pragma once

// JSON run configuration. Expressions are parsed at load time; every error names the
// offending JSON pointer.

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "nbm/expr.hpp"
#include "nbm/geometry.hpp"
#include "nbm/io.hpp"
#include "nbm/kernel.hpp"
#include "nbm/training.hpp"

namespace nbm {

struct LevelSetConfig {
  std::string expression;   // analytic phi(x, y, z)
  std::string file;         // or a sampled-grid file, relative to the config
  bool sampled = false;     // sample `expression` onto a coarse grid
  int resolution = 0;       // coarse grid size when sampled; 0 means the base resolution
};

struct ProblemConfig {
  Cube domain;
  LevelSetConfig level_set;
  std::string mu_minus = "1", mu_plus = "1";
  std::string k_minus = "0", k_plus = "0";
  std::string f_minus = "0", f_plus = "0";
  std::string alpha = "0", beta = "0";
  std::string g = "0";
};

struct EvalConfig {
  int m = 64;
  std::optional<std::string> exact_minus;
  std::optional<std::string> exact_plus;

  bool has_exact() const { return exact_minus.has_value() && exact_plus.has_value(); }
};

struct RunConfig {
  std::string name;
  ProblemConfig problem;
  TrainConfig train;
  EvalConfig eval;
  std::filesystem::path output_dir = "out";
  std::filesystem::path base_dir;  // directory of the config file
};

namespace detail {

inline expr::Expression parse_at(const std::string& source, const std::string& pointer) {
  try {
    return expr::parse(source);
  } catch (const expr::ParseError& e) {
    throw ConfigError(pointer + ": " + e.what() + " in \"" + source + "\"");
  }
}

template <class T>
void read_field(const nlohmann::json& obj, const char* key, T& out, const std::string& pointer) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(pointer + "/" + key + ": " + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("/: config must be a JSON object");

  RunConfig c;
  c.base_dir = base_dir;
  detail::read_field(j, "name", c.name, "");

  if (!j.contains("problem") || !j["problem"].is_object()) throw ConfigError("/problem: missing object");
  const auto& p = j["problem"];
  auto& pc = c.problem;
  if (p.contains("domain")) {
    std::vector<double> d;
    detail::read_field(p, "domain", d, "/problem");
    if (d.size() != 2 || !(d[1] > d[0])) throw ConfigError("/problem/domain: expected [lo, hi] with lo < hi");
    pc.domain = {d[0], d[1]};
  }
  if (!p.contains("level_set") || !p["level_set"].is_object()) throw ConfigError("/problem/level_set: missing object");
  const auto& ls = p["level_set"];
  detail::read_field(ls, "expression", pc.level_set.expression, "/problem/level_set");
  detail::read_field(ls, "file", pc.level_set.file, "/problem/level_set");
  detail::read_field(ls, "sampled", pc.level_set.sampled, "/problem/level_set");
  detail::read_field(ls, "resolution", pc.level_set.resolution, "/problem/level_set");
  if (pc.level_set.expression.empty() == pc.level_set.file.empty()) {
    throw ConfigError("/problem/level_set: give exactly one of \"expression\" or \"file\"");
  }
  for (auto [key, field] : {std::pair{"mu_minus", &pc.mu_minus}, {"mu_plus", &pc.mu_plus}, {"k_minus", &pc.k_minus},
                            {"k_plus", &pc.k_plus}, {"f_minus", &pc.f_minus}, {"f_plus", &pc.f_plus},
                            {"alpha", &pc.alpha}, {"beta", &pc.beta}, {"g", &pc.g}}) {
    detail::read_field(p, key, *field, "/problem");
    detail::parse_at(*field, std::string("/problem/") + key);
  }
  if (!pc.level_set.expression.empty()) detail::parse_at(pc.level_set.expression, "/problem/level_set/expression");

  if (j.contains("train")) {
    const auto& t = j["train"];
    auto& tc = c.train;
    const std::string at = "/train";
    detail::read_field(t, "epochs", tc.epochs, at);
    detail::read_field(t, "batch_size", tc.batch_size, at);
    detail::read_field(t, "learning_rate", tc.learning_rate, at);
    detail::read_field(t, "adam_beta1", tc.adam_beta1, at);
    detail::read_field(t, "adam_beta2", tc.adam_beta2, at);
    detail::read_field(t, "adam_eps", tc.adam_eps, at);
    detail::read_field(t, "base_resolution", tc.base_resolution, at);
    detail::read_field(t, "refinement_levels", tc.refinement_levels, at);
    detail::read_field(t, "level_weights", tc.level_weights, at);
    detail::read_field(t, "boundary_weight", tc.boundary_weight, at);
    detail::read_field(t, "seed", tc.seed, at);
    detail::read_field(t, "workers", tc.workers, at);
    detail::read_field(t, "layer_sizes", tc.layer_sizes, at);
    detail::read_field(t, "omega0", tc.omega0, at);
    std::string mode = "grid_nodes";
    detail::read_field(t, "sampler", mode, at);
    if (mode == "grid_nodes") {
      tc.sampler = SamplerMode::GridNodes;
    } else if (mode == "uniform_random") {
      tc.sampler = SamplerMode::UniformRandom;
    } else {
      throw ConfigError("/train/sampler: expected \"grid_nodes\" or \"uniform_random\"");
    }
    try {
      tc.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("/train: ") + e.what());
    }
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    detail::read_field(e, "M", c.eval.m, "/eval");
    if (c.eval.m < 2) throw ConfigError("/eval/M: must be >= 2");
    std::string s;
    if (e.contains("exact_minus")) {
      detail::read_field(e, "exact_minus", s, "/eval");
      detail::parse_at(s, "/eval/exact_minus");
      c.eval.exact_minus = s;
    }
    if (e.contains("exact_plus")) {
      detail::read_field(e, "exact_plus", s, "/eval");
      detail::parse_at(s, "/eval/exact_plus");
      c.eval.exact_plus = s;
    }
  }
  std::string out;
  detail::read_field(j, "output_dir", out, "");
  if (!out.empty()) c.output_dir = out;
  return c;
}

/// Reads a config file; a missing or unreadable file is an IoError.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return parse_run_config(text, path.parent_path());
}

/// Builds the problem (level set included) and checks mu > 0 on both sides.
inline ProblemSpec build_problem(const RunConfig& c) {
  const auto& pc = c.problem;
  ProblemSpec p;
  p.domain = pc.domain;
  p.mu_minus = detail::parse_at(pc.mu_minus, "/problem/mu_minus");
  p.mu_plus = detail::parse_at(pc.mu_plus, "/problem/mu_plus");
  p.k_minus = detail::parse_at(pc.k_minus, "/problem/k_minus");
  p.k_plus = detail::parse_at(pc.k_plus, "/problem/k_plus");
  p.f_minus = detail::parse_at(pc.f_minus, "/problem/f_minus");
  p.f_plus = detail::parse_at(pc.f_plus, "/problem/f_plus");
  p.alpha = detail::parse_at(pc.alpha, "/problem/alpha");
  p.beta = detail::parse_at(pc.beta, "/problem/beta");
  p.g = detail::parse_at(pc.g, "/problem/g");
  if (!pc.level_set.file.empty()) {
    std::filesystem::path file = pc.level_set.file;
    if (file.is_relative()) file = c.base_dir / file;
    try {
      p.level_set = load_sampled_level_set(file.string());
    } catch (const std::runtime_error& e) {
      throw IoError(std::string("/problem/level_set/file: ") + e.what());
    }
    const auto* g = p.level_set.sampled();
    if (g->domain.lo != p.domain.lo || g->domain.hi != p.domain.hi) {
      throw ConfigError("/problem/level_set/file: level-set DOMAIN differs from /problem/domain");
    }
  } else {
    LevelSet analytic(AnalyticLevelSet{detail::parse_at(pc.level_set.expression, "/problem/level_set/expression")});
    if (pc.level_set.sampled) {
      const int nc = pc.level_set.resolution > 0 ? pc.level_set.resolution : c.train.base_resolution;
      p.level_set = LevelSet::sampled_from(analytic, nc, p.domain);
    } else {
      p.level_set = std::move(analytic);
    }
  }
  try {
    check_positive_mu(p);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("/problem: ") + e.what());
  } catch (const expr::EvalError& e) {
    throw ConfigError(std::string("/problem: ") + e.what());
  }
  return p;
}

}  // namespace nbm
