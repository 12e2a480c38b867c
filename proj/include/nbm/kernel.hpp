#pragma once

// Point-local discretization of  k u - div(mu grad u) = f  with sharp jump conditions
//   [u] = u+ - u- = alpha,   [mu du/dn] = mu+ du+/dn - mu- du-/dn = beta   on phi = 0,
// assembled on an implicit 7-point cell of width h placed at a collocation point.
//
// An arm p -> q that stays on one side contributes the face flux mu(mid) (u(q) - u(p)) / h.
// An arm that crosses the interface at fraction theta uses the one-sided flux
//   F = mu_hat [ (u_far(q) - u_near(p) - a) / h - (1 - theta) b_a / mu_far ],
//   mu_hat = mu_near mu_far / (theta mu_far + (1 - theta) mu_near),
// with a = sigma alpha, b_a = sigma beta (n . e), sigma = +1 when p is on the Minus side.
// F is exact for piecewise-linear solutions along the arm; the tangential part of the
// flux jump is dropped. The row stores -sum(F)/h with the constant parts moved into rhs.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbm/expr.hpp"
#include "nbm/geometry.hpp"
#include "nbm/surrogate.hpp"
#include "nbm/vec3.hpp"

namespace nbm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One full PDE instance.
struct ProblemSpec {
  expr::Expression mu_minus;
  expr::Expression mu_plus;
  expr::Expression k_minus;
  expr::Expression k_plus;
  expr::Expression f_minus;
  expr::Expression f_plus;
  expr::Expression alpha;
  expr::Expression beta;
  expr::Expression g;
  Cube domain;
  LevelSet level_set{AnalyticLevelSet{expr::parse("x")}};

  const expr::Expression& mu(Side s) const { return s == Side::Minus ? mu_minus : mu_plus; }
  const expr::Expression& k(Side s) const { return s == Side::Minus ? k_minus : k_plus; }
  const expr::Expression& f(Side s) const { return s == Side::Minus ? f_minus : f_plus; }
};

/// Samples mu on an (n+1)^3 grid and throws ConfigError if mu_s <= 0 anywhere on side s.
inline void check_positive_mu(const ProblemSpec& problem, int n = 16) {
  const double h = problem.domain.extent() / n;
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        const Vec3 p{problem.domain.lo + i * h, problem.domain.lo + j * h, problem.domain.lo + k * h};
        const Side s = problem.level_set.side(p);
        const double mu = problem.mu(s).evaluate(p);
        if (!(mu > 0.0)) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "mu_%s = %g is not positive at (%g, %g, %g)", to_string(s), mu, p.x, p.y, p.z);
          throw ConfigError(buf);
        }
      }
    }
  }
}

struct StencilTerm {
  Vec3 point;
  Side side = Side::Minus;  // which network evaluates this point
  double coefficient = 0.0;
};

/// One collocation point's row: residual = sum_j coefficient_j u_{side_j}(point_j) - rhs.
struct StencilAssembly {
  Vec3 center;
  double h = 0.0;
  std::vector<StencilTerm> terms;  // terms[0] is the center
  double rhs = 0.0;
  double diagonal = 0.0;
  int crossed_arms = 0;
};

struct PointResidual {
  double r = 0.0;    // raw / diagonal
  double raw = 0.0;
};

/// Grazing crossings closer than this to either end of an arm are treated as uncrossed.
inline constexpr double kThetaSnap = 1e-6;

inline StencilAssembly assemble(const ProblemSpec& problem, const Vec3& p, double h) {
  const LevelSet& ls = problem.level_set;
  for (int axis = 0; axis < 3; ++axis) {
    for (double dir : {-1.0, 1.0}) {
      const Vec3 q = p + unit_axis(axis) * (dir * h);
      if (!problem.domain.contains(q)) throw OutOfDomain(q);
    }
  }
  const Side s = ls.side(p);
  const double h2 = h * h;

  StencilAssembly a;
  a.center = p;
  a.h = h;
  a.terms.reserve(7);
  a.terms.push_back({p, s, 0.0});
  double center = problem.k(s).evaluate(p);
  double rhs = problem.f(s).evaluate(p);

  for (int axis = 0; axis < 3; ++axis) {
    for (double dir : {-1.0, 1.0}) {
      const Vec3 e = unit_axis(axis) * dir;
      const Vec3 q = p + e * h;
      std::optional<Crossing> cross;
      if (ls.side(q) != s) {
        cross = ls.find_crossing(p, q);
        if (cross && (cross->theta < kThetaSnap || cross->theta > 1.0 - kThetaSnap)) cross.reset();
      }
      if (!cross) {
        const double mu = problem.mu(s).evaluate(p + e * (0.5 * h));
        center += mu / h2;
        a.terms.push_back({q, s, -mu / h2});
        continue;
      }
      const Side far = other(s);
      const double theta = cross->theta;
      const double mu_near = problem.mu(s).evaluate(cross->location);
      const double mu_far = problem.mu(far).evaluate(cross->location);
      const double mu_hat = mu_near * mu_far / (theta * mu_far + (1.0 - theta) * mu_near);
      const double sigma = s == Side::Minus ? 1.0 : -1.0;
      const double jump = sigma * problem.alpha.evaluate(cross->location);
      const double flux_jump = sigma * problem.beta.evaluate(cross->location) * dot(cross->normal, e);
      center += mu_hat / h2;
      a.terms.push_back({q, far, -mu_hat / h2});
      rhs -= mu_hat * (jump / h2 + (1.0 - theta) * flux_jump / (h * mu_far));
      ++a.crossed_arms;
    }
  }
  a.terms[0].coefficient = center;
  a.diagonal = center;
  a.rhs = rhs;
  return a;
}

/// Residual of the row with u supplied by `u(side, point)`.
template <class SideFunction>
PointResidual residual_with(const StencilAssembly& a, const SideFunction& u) {
  double raw = 0.0;
  for (const auto& t : a.terms) raw += t.coefficient * u(t.side, t.point);
  raw -= a.rhs;
  return {raw / a.diagonal, raw};
}

inline PointResidual residual(const StencilAssembly& a, const SolutionPair& pair) {
  return residual_with(a, [&pair](Side s, const Vec3& p) { return pair.value(s, p); });
}

struct Cotangent {
  Vec3 point;
  Side side = Side::Minus;
  double value = 0.0;
};

/// Cotangents of r^2 with respect to each network evaluation of the row.
inline std::vector<Cotangent> residual_cotangents(const StencilAssembly& a, const SolutionPair& pair) {
  const PointResidual res = residual(a, pair);
  std::vector<Cotangent> out;
  out.reserve(a.terms.size());
  for (const auto& t : a.terms) out.push_back({t.point, t.side, 2.0 * res.r * t.coefficient / a.diagonal});
  return out;
}

inline double boundary_residual(const ProblemSpec& problem, const SolutionPair& pair, const Vec3& pb) {
  return evaluate_solution(pair, problem.level_set, pb) - problem.g.evaluate(pb);
}

}  // namespace nbm
