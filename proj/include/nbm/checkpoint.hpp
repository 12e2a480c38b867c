#pragma once

// Model checkpoints: JSON with layer sizes, 17-digit flat parameters, seed and a hash of
// the problem the pair was trained on.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include "json.hpp"
#include "nbm/io.hpp"
#include "nbm/kernel.hpp"
#include "nbm/surrogate.hpp"

namespace nbm {

/// FNV-1a over the canonical text of every field of the problem.
inline std::string problem_hash(const ProblemSpec& p) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (const auto* e : {&p.mu_minus, &p.mu_plus, &p.k_minus, &p.k_plus, &p.f_minus, &p.f_plus, &p.alpha, &p.beta, &p.g}) {
    mix(e->to_string());
  }
  mix(format_double(p.domain.lo));
  mix(format_double(p.domain.hi));
  if (const auto* a = p.level_set.analytic_repr()) {
    mix(a->phi.to_string());
  } else {
    const auto* s = p.level_set.sampled();
    mix(std::to_string(s->nc));
    for (double v : s->values) mix(format_double(v));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Checkpoint {
  std::vector<int> layer_sizes;
  double omega0 = 1.0;
  std::uint64_t seed = 0;
  std::string problem_hash;
  std::vector<double> params;

  SolutionPair to_pair() const {
    const std::size_t half = nbm::parameter_count(layer_sizes);
    if (params.size() != 2 * half) throw IoError("checkpoint: parameter count does not match layer sizes");
    SolutionPair pair;
    pair.net_minus = SineMlp(layer_sizes, std::vector<double>(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(half)), omega0);
    pair.net_plus = SineMlp(layer_sizes, std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(half), params.end()), omega0);
    return pair;
  }
};

inline std::string format_checkpoint(const SolutionPair& pair, std::uint64_t seed, const std::string& hash) {
  std::ostringstream out;
  out << "{\n  \"layer_sizes\": [";
  const auto& sizes = pair.net_minus.layer_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) out << (i ? ", " : "") << sizes[i];
  out << "],\n  \"omega0\": " << format_double(pair.net_minus.omega0()) << ",\n  \"seed\": " << seed
      << ",\n  \"problem_hash\": \"" << hash << "\",\n  \"params\": [";
  const auto flat = pair.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    out << (i ? "," : "") << (i % 4 == 0 ? "\n    " : " ") << format_double(flat[i]);
  }
  out << "\n  ]\n}\n";
  return out.str();
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  Checkpoint c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    c.omega0 = j.value("omega0", 1.0);
    c.seed = j.at("seed").get<std::uint64_t>();
    c.problem_hash = j.at("problem_hash").get<std::string>();
    c.params = j.at("params").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const SolutionPair& pair, std::uint64_t seed,
                            const ProblemSpec& problem) {
  write_file_atomic(path, format_checkpoint(pair, seed, problem_hash(problem)));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace nbm
