#pragma once

// Error norms against exact solutions, convergence orders and field export.

#include <cmath>
#include <concepts>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nbm/expr.hpp"
#include "nbm/geometry.hpp"
#include "nbm/io.hpp"
#include "nbm/kernel.hpp"
#include "nbm/surrogate.hpp"

namespace nbm {

/// Anything that can report a solution value at a point.
template <class T>
concept SolutionField = requires(const T& f, const Vec3& p) {
  { f.value(p) } -> std::convertible_to<double>;
};

/// A trained pair seen through its level set.
struct PairField {
  const SolutionPair& pair;
  const LevelSet& level_set;

  double value(const Vec3& p) const { return evaluate_solution(pair, level_set, p); }
};

struct ErrorNorms {
  double rmse = 0.0;
  double linf = 0.0;
};

/// Nodes of the (m+1)^3 evaluation grid, x fastest.
inline std::vector<Vec3> nodal_grid(const Cube& domain, int m) {
  const double h = domain.extent() / m;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(m + 1) * (m + 1) * (m + 1));
  for (int k = 0; k <= m; ++k) {
    for (int j = 0; j <= m; ++j) {
      for (int i = 0; i <= m; ++i) pts.push_back({domain.lo + i * h, domain.lo + j * h, domain.lo + k * h});
    }
  }
  return pts;
}

template <SolutionField Field>
ErrorNorms evaluate_errors(const Field& field, const ProblemSpec& problem, const expr::Expression& exact_minus,
                           const expr::Expression& exact_plus, int m) {
  if (m < 2) throw std::invalid_argument("evaluation grid needs M >= 2");
  double sum_sq = 0.0;
  double max_abs = 0.0;
  const auto pts = nodal_grid(problem.domain, m);
  for (const Vec3& p : pts) {
    const Side s = problem.level_set.side(p);
    const double exact = s == Side::Minus ? exact_minus.evaluate(p) : exact_plus.evaluate(p);
    const double e = field.value(p) - exact;
    sum_sq += e * e;
    max_abs = std::max(max_abs, std::fabs(e));
  }
  return {std::sqrt(sum_sq / static_cast<double>(pts.size())), max_abs};
}

inline ErrorNorms evaluate_errors(const SolutionPair& pair, const ProblemSpec& problem,
                                  const expr::Expression& exact_minus, const expr::Expression& exact_plus, int m) {
  return evaluate_errors(PairField{pair, problem.level_set}, problem, exact_minus, exact_plus, m);
}

class NonPositiveError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// log2(e_coarse / e_fine) for a resolution doubling.
inline double convergence_order(double e_coarse, double e_fine) {
  if (!(e_coarse > 0.0) || !(e_fine > 0.0)) throw NonPositiveError("convergence order needs positive errors");
  return std::log2(e_coarse / e_fine);
}

struct ErrorReport {
  int resolution = 0;
  double rmse = 0.0;
  double linf = 0.0;
  std::optional<double> order_rmse;
  std::optional<double> order_linf;
  int epochs = 0;
  double seconds_per_epoch = 0.0;
};

/// Fills the order columns from successive rows (resolutions doubling).
inline void fill_orders(std::vector<ErrorReport>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    rows[i].order_rmse = convergence_order(rows[i - 1].rmse, rows[i].rmse);
    rows[i].order_linf = convergence_order(rows[i - 1].linf, rows[i].linf);
  }
}

/// Columns: N, rmse, order, linf, order, sec/epoch.
inline std::string format_report_csv(const std::vector<ErrorReport>& rows) {
  std::ostringstream out;
  out << "N,rmse,order_rmse,linf,order_linf,sec_per_epoch,epochs\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : rows) {
    out << r.resolution << ',' << format_double(r.rmse) << ',' << opt(r.order_rmse) << ','
        << format_double(r.linf) << ',' << opt(r.order_linf) << ',' << format_double(r.seconds_per_epoch) << ','
        << r.epochs << '\n';
  }
  return out.str();
}

struct FieldSample {
  Vec3 point;
  double u = 0.0;
  double phi = 0.0;
};

template <SolutionField Field>
std::vector<FieldSample> sample_field(const Field& field, const ProblemSpec& problem, int m) {
  if (m < 2) throw std::invalid_argument("export grid needs M >= 2");
  std::vector<FieldSample> out;
  for (const Vec3& p : nodal_grid(problem.domain, m)) out.push_back({p, field.value(p), problem.level_set.phi(p)});
  return out;
}

/// Legacy VTK STRUCTURED_POINTS (ASCII) with point arrays "u" and "phi".
inline std::string format_vtk(const std::vector<FieldSample>& samples, const Cube& domain, int m) {
  std::ostringstream out;
  const double h = domain.extent() / m;
  out << "# vtk DataFile Version 3.0\n"
      << "nbm solution field\n"
      << "ASCII\n"
      << "DATASET STRUCTURED_POINTS\n"
      << "DIMENSIONS " << m + 1 << ' ' << m + 1 << ' ' << m + 1 << '\n'
      << "ORIGIN " << format_double(domain.lo) << ' ' << format_double(domain.lo) << ' ' << format_double(domain.lo) << '\n'
      << "SPACING " << format_double(h) << ' ' << format_double(h) << ' ' << format_double(h) << '\n'
      << "POINT_DATA " << samples.size() << '\n'
      << "SCALARS u double 1\nLOOKUP_TABLE default\n";
  for (const auto& s : samples) out << format_double(s.u) << '\n';
  out << "SCALARS phi double 1\nLOOKUP_TABLE default\n";
  for (const auto& s : samples) out << format_double(s.phi) << '\n';
  return out.str();
}

inline std::string format_field_csv(const std::vector<FieldSample>& samples) {
  std::ostringstream out;
  out << "x,y,z,u,phi\n";
  for (const auto& s : samples) {
    out << format_double(s.point.x) << ',' << format_double(s.point.y) << ',' << format_double(s.point.z) << ','
        << format_double(s.u) << ',' << format_double(s.phi) << '\n';
  }
  return out.str();
}

inline std::vector<FieldSample> parse_field_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "x,y,z,u,phi") throw IoError("field CSV: unexpected header '" + line + "'");
  std::vector<FieldSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FieldSample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &s.point.x, &s.point.y, &s.point.z, &s.u, &s.phi) != 5) {
      throw IoError("field CSV: malformed row '" + line + "'");
    }
    out.push_back(s);
  }
  return out;
}

/// Writes <stem>.vtk and <stem>.csv.
template <SolutionField Field>
void export_field(const Field& field, const ProblemSpec& problem, int m, const std::filesystem::path& stem) {
  const auto samples = sample_field(field, problem, m);
  std::filesystem::path vtk = stem;
  vtk += ".vtk";
  std::filesystem::path csv = stem;
  csv += ".csv";
  write_file_atomic(vtk, format_vtk(samples, problem.domain, m));
  write_file_atomic(csv, format_field_csv(samples));
}

/// Largest |u(x + d n) - u(x - d n)| over interface points x found along random chords
/// through the domain.
template <SolutionField Field>
double interface_jump_probe(const Field& field, const LevelSet& ls, const Cube& domain, double offset,
                            int chords = 200, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(domain.lo, domain.hi);
  double best = 0.0;
  for (int c = 0; c < chords; ++c) {
    const Vec3 a{coord(rng), coord(rng), coord(rng)};
    const Vec3 b{coord(rng), coord(rng), coord(rng)};
    const auto cross = ls.find_crossing(a, b);
    if (!cross) continue;
    const Vec3 out = cross->location + cross->normal * offset;
    const Vec3 in = cross->location - cross->normal * offset;
    if (!domain.contains(out) || !domain.contains(in)) continue;
    best = std::max(best, std::fabs(field.value(out) - field.value(in)));
  }
  return best;
}

}  // namespace nbm
