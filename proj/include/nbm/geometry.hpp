#pragma once

// Level-set description of the interface: phi < 0 is the interior (Minus) subdomain,
// phi > 0 the exterior (Plus) one, and phi == 0 is classified as Minus.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nbm/expr.hpp"
#include "nbm/vec3.hpp"

namespace nbm {

enum class Side { Minus, Plus };

inline const char* to_string(Side s) { return s == Side::Minus ? "minus" : "plus"; }
inline Side other(Side s) { return s == Side::Minus ? Side::Plus : Side::Minus; }

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfDomain : public GeometryError {
 public:
  explicit OutOfDomain(const Vec3& p)
      : GeometryError(format(p)) {}

 private:
  static std::string format(const Vec3& p) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "point (%.17g, %.17g, %.17g) lies outside the domain", p.x, p.y, p.z);
    return buf;
  }
};

class DegenerateGradient : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Interface crossing along a directed segment a -> b.
struct Crossing {
  double theta = 0.0;  // fraction of the way from a to b, in (0, 1)
  Vec3 location;
  Vec3 normal;  // unit, pointing from Minus toward Plus
};

struct AnalyticLevelSet {
  expr::Expression phi;
};

/// Nodal values on an (nc+1)^3 uniform grid over the cube, x-fastest.
struct SampledLevelSet {
  int nc = 0;
  Cube domain;
  std::vector<double> values;

  double spacing() const { return domain.extent() / nc; }
  double node(int i, int j, int k) const {
    const std::size_t n = static_cast<std::size_t>(nc) + 1;
    return values[static_cast<std::size_t>(i) + n * (static_cast<std::size_t>(j) + n * static_cast<std::size_t>(k))];
  }
};

class LevelSet {
 public:
  static constexpr double kAnalyticNormalStep = 1e-5;
  static constexpr double kMinGradient = 1e-12;
  static constexpr double kBisectionTolerance = 1e-12;
  static constexpr int kBisectionMaxIterations = 100;

  explicit LevelSet(AnalyticLevelSet a) : repr_(std::move(a)) {}
  explicit LevelSet(SampledLevelSet s) : repr_(std::move(s)) {
    const auto& g = std::get<SampledLevelSet>(repr_);
    if (g.nc < 1) throw std::invalid_argument("sampled level set needs nc >= 1");
    const std::size_t n = static_cast<std::size_t>(g.nc) + 1;
    if (g.values.size() != n * n * n) {
      throw std::invalid_argument("sampled level set needs (nc+1)^3 values");
    }
  }

  static LevelSet analytic(const std::string& source) { return LevelSet(AnalyticLevelSet{expr::parse(source)}); }

  /// Samples any level set at the nodes of an (nc+1)^3 grid over `domain`.
  static LevelSet sampled_from(const LevelSet& source, int nc, const Cube& domain) {
    SampledLevelSet g;
    g.nc = nc;
    g.domain = domain;
    const double h = domain.extent() / nc;
    g.values.reserve(static_cast<std::size_t>(nc + 1) * (nc + 1) * (nc + 1));
    for (int k = 0; k <= nc; ++k) {
      for (int j = 0; j <= nc; ++j) {
        for (int i = 0; i <= nc; ++i) {
          g.values.push_back(source.phi({domain.lo + i * h, domain.lo + j * h, domain.lo + k * h}));
        }
      }
    }
    return LevelSet(std::move(g));
  }

  bool is_sampled() const { return std::holds_alternative<SampledLevelSet>(repr_); }
  const SampledLevelSet* sampled() const { return std::get_if<SampledLevelSet>(&repr_); }
  const AnalyticLevelSet* analytic_repr() const { return std::get_if<AnalyticLevelSet>(&repr_); }

  double phi(const Vec3& p) const {
    if (const auto* a = std::get_if<AnalyticLevelSet>(&repr_)) return a->phi.evaluate(p);
    const auto& g = std::get<SampledLevelSet>(repr_);
    if (!g.domain.contains(p)) throw OutOfDomain(p);
    return trilinear(g, p);
  }

  Side side(const Vec3& p) const { return phi(p) <= 0.0 ? Side::Minus : Side::Plus; }

  Vec3 normal(const Vec3& p) const {
    Vec3 grad;
    if (std::holds_alternative<AnalyticLevelSet>(repr_)) {
      const double h = kAnalyticNormalStep;
      for (int i = 0; i < 3; ++i) {
        const Vec3 e = unit_axis(i) * h;
        grad[static_cast<std::size_t>(i)] = (phi(p + e) - phi(p - e)) / (2.0 * h);
      }
    } else {
      const auto& g = std::get<SampledLevelSet>(repr_);
      if (!g.domain.contains(p)) throw OutOfDomain(p);
      const double h = 0.5 * g.spacing();
      // Near the boundary the stencil is clamped into the cube (one-sided difference).
      for (int i = 0; i < 3; ++i) {
        Vec3 fwd = p;
        Vec3 bwd = p;
        auto c = static_cast<std::size_t>(i);
        fwd[c] = std::min(p[c] + h, g.domain.hi);
        bwd[c] = std::max(p[c] - h, g.domain.lo);
        grad[c] = (trilinear(g, fwd) - trilinear(g, bwd)) / (fwd[c] - bwd[c]);
      }
    }
    const double len = norm(grad);
    if (!(len >= kMinGradient)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "level-set gradient vanishes at (%.17g, %.17g, %.17g)", p.x, p.y, p.z);
      throw DegenerateGradient(buf);
    }
    return grad * (1.0 / len);
  }

  std::optional<Crossing> find_crossing(const Vec3& a, const Vec3& b) const {
    const double fa = phi(a);
    const double fb = phi(b);
    const Side sa = fa <= 0.0 ? Side::Minus : Side::Plus;
    const Side sb = fb <= 0.0 ? Side::Minus : Side::Plus;
    if (sa == sb) return std::nullopt;

    double theta = 0.0;
    if (is_sampled()) {
      theta = fa / (fa - fb);
    } else {
      theta = bisect(a, b, fa, fb, sa);
    }
    Crossing c;
    c.theta = theta;
    c.location = a + (b - a) * theta;
    c.normal = normal(c.location);
    return c;
  }

 private:
  static double trilinear(const SampledLevelSet& g, const Vec3& p) {
    const double h = g.spacing();
    int idx[3];
    double w[3];
    for (std::size_t c = 0; c < 3; ++c) {
      const double s = (p[c] - g.domain.lo) / h;
      int i = static_cast<int>(std::floor(s));
      i = std::clamp(i, 0, g.nc - 1);
      idx[c] = i;
      w[c] = std::clamp(s - i, 0.0, 1.0);
    }
    double v = 0.0;
    for (int dk = 0; dk <= 1; ++dk) {
      for (int dj = 0; dj <= 1; ++dj) {
        for (int di = 0; di <= 1; ++di) {
          const double weight = (di ? w[0] : 1.0 - w[0]) * (dj ? w[1] : 1.0 - w[1]) * (dk ? w[2] : 1.0 - w[2]);
          v += weight * g.node(idx[0] + di, idx[1] + dj, idx[2] + dk);
        }
      }
    }
    return v;
  }

  // Bisection on t in [0,1], finished by one linear-interpolation step inside the final
  // bracket, so that linear level sets yield their root to rounding.
  double bisect(const Vec3& a, const Vec3& b, double fa, double fb, Side sa) const {
    double t0 = 0.0;
    double t1 = 1.0;
    double f0 = fa;
    double f1 = fb;
    for (int it = 0; it < kBisectionMaxIterations; ++it) {
      const double tm = 0.5 * (t0 + t1);
      if (tm <= t0 || tm >= t1) break;
      const double fm = phi(a + (b - a) * tm);
      if (fm == 0.0) return tm;
      const Side sm = fm <= 0.0 ? Side::Minus : Side::Plus;
      if (sm == sa) {
        t0 = tm;
        f0 = fm;
      } else {
        t1 = tm;
        f1 = fm;
      }
      if (std::fabs(fm) < kBisectionTolerance) break;
    }
    if (f0 == f1) return 0.5 * (t0 + t1);
    const double t = t0 + f0 * (t1 - t0) / (f0 - f1);
    return std::clamp(t, t0, t1);
  }

  std::variant<AnalyticLevelSet, SampledLevelSet> repr_;
};

/// Reads "NC <int> DOMAIN <xmin> <xmax>" followed by (NC+1)^3 doubles, x fastest.
inline LevelSet load_sampled_level_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open level-set file '" + path + "'");
  std::string tag_nc, tag_domain;
  SampledLevelSet g;
  if (!(in >> tag_nc >> g.nc >> tag_domain >> g.domain.lo >> g.domain.hi) || tag_nc != "NC" ||
      tag_domain != "DOMAIN") {
    throw std::runtime_error("level-set file '" + path + "': malformed header");
  }
  if (g.nc < 1 || !(g.domain.hi > g.domain.lo)) {
    throw std::runtime_error("level-set file '" + path + "': invalid NC or DOMAIN");
  }
  const std::size_t n = static_cast<std::size_t>(g.nc) + 1;
  g.values.resize(n * n * n);
  for (auto& v : g.values) {
    if (!(in >> v)) throw std::runtime_error("level-set file '" + path + "': too few values");
  }
  double extra;
  if (in >> extra) throw std::runtime_error("level-set file '" + path + "': trailing values");
  return LevelSet(std::move(g));
}

inline std::string format_sampled_level_set(const SampledLevelSet& g) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "NC %d DOMAIN %.17g %.17g\n", g.nc, g.domain.lo, g.domain.hi);
  out << buf;
  const std::size_t row = static_cast<std::size_t>(g.nc) + 1;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", g.values[i]);
    out << buf << ((i + 1) % row == 0 ? '\n' : ' ');
  }
  return out.str();
}

}  // namespace nbm
