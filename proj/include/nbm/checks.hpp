#pragma once

// Verification oracles for the kernel and the training pipeline. Each oracle compares the
// implementation against something computed independently of it: closed-form piecewise
// linear solutions, manufactured smooth solutions, finite differences and repeat runs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nbm/expr.hpp"
#include "nbm/kernel.hpp"
#include "nbm/training.hpp"

namespace nbm::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using AssembleFn = std::function<StencilAssembly(const ProblemSpec&, const Vec3&, double)>;

inline StencilAssembly default_assemble(const ProblemSpec& p, const Vec3& x, double h) { return assemble(p, x, h); }

namespace detail {

inline std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline expr::Expression constant(double v) { return expr::Expression::constant(v); }

}  // namespace detail

// ---------------------------------------------------------------------------------------
// 1D jump exactness

struct JumpCase {
  double theta;
  double mu_minus;
  double mu_plus;
  double jump;       // alpha = [u]
  double flux_jump;  // beta = [mu du/dn]
  Side center_side;
};

/// Every (theta, mu-, mu+, alpha, beta, side) combination of the exactness suite.
inline std::vector<JumpCase> jump_cases() {
  std::vector<JumpCase> out;
  const double mus[] = {0.5, 1.0, 3.0};
  const double jumps[] = {-1.0, 0.0, 2.0};
  for (int t = 1; t <= 9; ++t) {
    for (double mm : mus) {
      for (double mp : mus) {
        for (double a : jumps) {
          for (double b : jumps) {
            for (Side s : {Side::Minus, Side::Plus}) out.push_back({t / 10.0, mm, mp, a, b, s});
          }
        }
      }
    }
  }
  return out;
}

/// Preconditioned residual of the row at the origin for the exact piecewise-linear
/// solution of one case. The interface is the plane x = theta h; the center sits on
/// `center_side`, and u varies only in x.
inline double jump_case_residual(const JumpCase& c, const AssembleFn& assemble_fn, double h = 0.25) {
  const double xg = c.theta * h;
  ProblemSpec p;
  p.domain = {-1.0, 1.0};
  p.mu_minus = detail::constant(c.mu_minus);
  p.mu_plus = detail::constant(c.mu_plus);
  p.k_minus = detail::constant(0.0);
  p.k_plus = detail::constant(0.0);
  p.f_minus = detail::constant(0.0);
  p.f_plus = detail::constant(0.0);
  p.alpha = detail::constant(c.jump);
  p.beta = detail::constant(c.flux_jump);
  p.g = detail::constant(0.0);
  const auto x = expr::Expression::variable(0);
  const auto shift = expr::Expression::constant(xg);
  // Minus side lies toward -x when the center is on Minus, toward +x otherwise.
  p.level_set = LevelSet(AnalyticLevelSet{c.center_side == Side::Minus ? expr::Expression::binary(expr::Op::Sub, x, shift)
                                                                       : expr::Expression::binary(expr::Op::Sub, shift, x)});

  // Near side: u = u0 + g_near x. Along +x the far side starts at xg.
  const double mu_near = c.center_side == Side::Minus ? c.mu_minus : c.mu_plus;
  const double mu_far = c.center_side == Side::Minus ? c.mu_plus : c.mu_minus;
  const double u0 = 0.3;
  const double g_near = 0.7;
  double g_far = 0.0;
  double far_at_interface = 0.0;
  const double near_at_interface = u0 + g_near * xg;
  if (c.center_side == Side::Minus) {
    // n = +x: beta = mu+ g+ - mu- g-, alpha = u+ - u-
    g_far = (c.flux_jump + mu_near * g_near) / mu_far;
    far_at_interface = near_at_interface + c.jump;
  } else {
    // n = -x: beta = -mu+ g+ + mu- g-, alpha = u+ - u-
    g_far = (c.flux_jump + mu_near * g_near) / mu_far;
    far_at_interface = near_at_interface - c.jump;
  }
  const Side near = c.center_side;
  auto u = [&](Side s, const Vec3& q) {
    if (s == near) return u0 + g_near * q.x;
    return far_at_interface + g_far * (q.x - xg);
  };
  const StencilAssembly a = assemble_fn(p, Vec3{0.0, 0.0, 0.0}, h);
  return residual_with(a, u).r;
}

inline CheckResult jump_exactness(const AssembleFn& assemble_fn = default_assemble, double tolerance = 1e-12) {
  double worst = 0.0;
  std::size_t failures = 0;
  const auto cases = jump_cases();
  for (const auto& c : cases) {
    const double r = std::fabs(jump_case_residual(c, assemble_fn));
    worst = std::max(worst, std::isfinite(r) ? r : INFINITY);
    if (!(r < tolerance)) ++failures;
  }
  CheckResult out;
  out.name = "jump-exactness";
  out.passed = failures == 0;
  out.detail = std::to_string(cases.size()) + " cases, max |r| = " + detail::fmt("%.3e", worst) + ", failures " +
               std::to_string(failures);
  return out;
}

// ---------------------------------------------------------------------------------------
// Manufactured-solution truncation sweep

struct TruncationLevel {
  int n = 0;  // h = extent / n
  double uncrossed_max_raw = 0.0;
  double crossed_max_r = 0.0;
  std::size_t crossed_count = 0;
};

struct TruncationSweep {
  std::vector<TruncationLevel> levels;
  std::vector<double> uncrossed_orders;
};

/// Substitutes the exact solution into rows assembled at `points` random centers for
/// h = extent/n, n in `resolutions`. Centers are shared across h and keep every arm of
/// the coarsest cell inside the domain.
inline TruncationSweep truncation_sweep(const ProblemSpec& problem, const expr::Expression& exact_minus,
                                        const expr::Expression& exact_plus,
                                        const std::vector<int>& resolutions = {8, 16, 32, 64},
                                        std::size_t points = 10000, std::uint64_t seed = 11) {
  const double margin = problem.domain.extent() / *std::min_element(resolutions.begin(), resolutions.end());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(problem.domain.lo + margin, problem.domain.hi - margin);
  std::vector<Vec3> centers(points);
  for (auto& c : centers) {
    c.x = coord(rng);
    c.y = coord(rng);
    c.z = coord(rng);
  }
  auto u = [&](Side s, const Vec3& q) { return s == Side::Minus ? exact_minus.evaluate(q) : exact_plus.evaluate(q); };
  TruncationSweep sweep;
  for (int n : resolutions) {
    TruncationLevel lvl;
    lvl.n = n;
    const double h = problem.domain.extent() / n;
    for (const Vec3& c : centers) {
      const StencilAssembly a = assemble(problem, c, h);
      const PointResidual r = residual_with(a, u);
      if (a.crossed_arms == 0) {
        lvl.uncrossed_max_raw = std::max(lvl.uncrossed_max_raw, std::fabs(r.raw));
      } else {
        ++lvl.crossed_count;
        lvl.crossed_max_r = std::max(lvl.crossed_max_r, std::fabs(r.r));
      }
    }
    sweep.levels.push_back(lvl);
  }
  for (std::size_t i = 1; i < sweep.levels.size(); ++i) {
    const double a = sweep.levels[i - 1].uncrossed_max_raw;
    const double b = sweep.levels[i].uncrossed_max_raw;
    sweep.uncrossed_orders.push_back(a > 0.0 && b > 0.0 ? std::log2(a / b) : 0.0);
  }
  return sweep;
}

/// Uncrossed raw residuals must converge at order 2 +/- tolerance (or vanish to rounding
/// when the exact solution is piecewise linear); crossed preconditioned residuals must
/// not grow as h decreases.
inline CheckResult truncation_check(const TruncationSweep& sweep, double order_tolerance = 0.25) {
  CheckResult out;
  out.name = "truncation";
  bool ok = true;
  bool exact = true;
  for (const auto& l : sweep.levels) {
    if (!std::isfinite(l.uncrossed_max_raw) || !std::isfinite(l.crossed_max_r)) ok = false;
    if (l.uncrossed_max_raw > 1e-9) exact = false;
  }
  if (!exact) {
    for (double o : sweep.uncrossed_orders) {
      if (!(std::fabs(o - 2.0) <= order_tolerance)) ok = false;
    }
  }
  for (std::size_t i = 1; i < sweep.levels.size(); ++i) {
    if (sweep.levels[i].crossed_count == 0 || sweep.levels[i - 1].crossed_count == 0) continue;
    if (sweep.levels[i].crossed_max_r > sweep.levels[i - 1].crossed_max_r) ok = false;
  }
  std::string d;
  for (std::size_t i = 0; i < sweep.levels.size(); ++i) {
    const auto& l = sweep.levels[i];
    d += "h=extent/" + std::to_string(l.n) + ": uncrossed " + detail::fmt("%.3e", l.uncrossed_max_raw) + ", crossed r " +
         detail::fmt("%.3e", l.crossed_max_r) + " (" + std::to_string(l.crossed_count) + ")";
    if (i > 0 && !exact) d += ", order " + detail::fmt("%.3f", sweep.uncrossed_orders[i - 1]);
    if (i + 1 < sweep.levels.size()) d += "; ";
  }
  out.passed = ok;
  out.detail = d;
  return out;
}

// ---------------------------------------------------------------------------------------
// Gradient against central finite differences

/// The loss computed row by row from kernel::residual and boundary_residual, without
/// the slot lowering used by loss_and_grad.
inline double reference_loss(const ProblemSpec& problem, const SolutionPair& pair, const Batch& batch,
                             const TrainConfig& config) {
  double interior = 0.0;
  for (const Vec3& p : batch.interior) {
    for (int l = 0; l < config.refinement_levels; ++l) {
      const auto a = assemble(problem, p, level_width(config, problem.domain, l));
      const double r = residual(a, pair).r;
      interior += config.level_weight(l) * r * r;
    }
  }
  double boundary = 0.0;
  for (const Vec3& p : batch.boundary) {
    const double r = boundary_residual(problem, pair, p);
    boundary += r * r;
  }
  double loss = 0.0;
  if (!batch.interior.empty()) loss += interior / static_cast<double>(batch.interior.size());
  if (!batch.boundary.empty()) loss += config.boundary_weight * boundary / static_cast<double>(batch.boundary.size());
  return loss;
}

/// A batch with up to `crossed` interface cells, `uncrossed` regular cells (at the
/// coarsest level) and `boundary` face points.
inline Batch mixed_batch(const ProblemSpec& problem, const TrainConfig& config, int crossed = 4, int uncrossed = 3,
                         int boundary = 3, std::uint64_t seed = 5) {
  const double h0 = level_width(config, problem.domain, 0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(problem.domain.lo + h0, problem.domain.hi - h0);
  std::uniform_real_distribution<double> face(problem.domain.lo, problem.domain.hi);
  Batch b;
  int nc = 0;
  int nu = 0;
  for (int tries = 0; tries < 200000 && (nc < crossed || nu < uncrossed); ++tries) {
    const Vec3 p{coord(rng), coord(rng), coord(rng)};
    const bool is_crossed = assemble(problem, p, h0).crossed_arms > 0;
    if (is_crossed && nc < crossed) {
      b.interior.push_back(p);
      ++nc;
    } else if (!is_crossed && nu < uncrossed) {
      b.interior.push_back(p);
      ++nu;
    }
  }
  for (int i = 0; i < boundary; ++i) {
    Vec3 p{face(rng), face(rng), face(rng)};
    p[static_cast<std::size_t>(i % 3)] = (i % 2 == 0) ? problem.domain.lo : problem.domain.hi;
    b.boundary.push_back(p);
  }
  return b;
}

struct GradientComparison {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
  std::size_t worst_index = 0;
};

/// Component-wise |fd - g| / max(|fd|, |g|, floor) with floor = 1e-3 max|g|: entries three
/// orders below the largest component are compared on that scale.
inline GradientComparison compare_gradient_fd(const ProblemSpec& problem, const SolutionPair& pair, const Batch& batch,
                                              const TrainConfig& config, double step = 1e-6) {
  const LossAndGrad lg = loss_and_grad(problem, pair, batch, config);
  std::vector<double> theta = pair.flatten();
  SolutionPair probe = pair;
  double gmax = 0.0;
  for (double g : lg.grad) gmax = std::max(gmax, std::fabs(g));
  const double floor = 1e-3 * gmax;
  GradientComparison cmp;
  cmp.parameters = theta.size();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    probe.unflatten(theta);
    const double lp = reference_loss(problem, probe, batch, config);
    theta[i] = saved - step;
    probe.unflatten(theta);
    const double lm = reference_loss(problem, probe, batch, config);
    theta[i] = saved;
    const double fd = (lp - lm) / (2.0 * step);
    const double denom = std::max({std::fabs(fd), std::fabs(lg.grad[i]), floor, 1e-300});
    const double rel = std::fabs(fd - lg.grad[i]) / denom;
    if (rel > cmp.max_relative_error || !std::isfinite(rel)) {
      cmp.max_relative_error = std::isfinite(rel) ? rel : INFINITY;
      cmp.worst_index = i;
    }
  }
  return cmp;
}

inline CheckResult gradient_check(const ProblemSpec& problem, TrainConfig config, double tolerance = 1e-5) {
  config.refinement_levels = std::max(config.refinement_levels, 2);
  config.level_weights.clear();
  const SolutionPair pair = SolutionPair::init(config.layer_sizes, config.seed, config.omega0);
  const Batch batch = mixed_batch(problem, config);
  const auto cmp = compare_gradient_fd(problem, pair, batch, config);
  CheckResult out;
  out.name = "gradient-fd";
  out.passed = cmp.max_relative_error < tolerance;
  out.detail = std::to_string(cmp.parameters) + " parameters, " + std::to_string(batch.interior.size()) + " interior + " +
               std::to_string(batch.boundary.size()) + " boundary points, L=" +
               std::to_string(config.refinement_levels) + ", max rel err " +
               detail::fmt("%.3e", cmp.max_relative_error);
  return out;
}

// ---------------------------------------------------------------------------------------
// Determinism

inline double relative_difference(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::fabs(a[i] - b[i]));
    scale = std::max(scale, std::fabs(a[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

struct WorkerInvariance {
  bool losses_equal = true;
  double max_grad_relative = 0.0;
};

/// Loss and gradient of one full grid batch for each worker count.
inline WorkerInvariance worker_invariance(const ProblemSpec& problem, TrainConfig config,
                                          const std::vector<int>& worker_counts = {1, 2, 4}) {
  config.workers = 1;
  const SolutionPair pair = SolutionPair::init(config.layer_sizes, config.seed, config.omega0);
  const auto batches = sample_epoch(config, problem.domain, 0);
  const AssembledBatch lowered = assemble_batch(problem, batches.front(), config);
  config.workers = worker_counts.front();
  const LossAndGrad base = loss_and_grad(pair, lowered, config);
  WorkerInvariance out;
  for (int w : worker_counts) {
    config.workers = w;
    const LossAndGrad lg = loss_and_grad(pair, lowered, config);
    if (lg.loss != base.loss) out.losses_equal = false;
    out.max_grad_relative = std::max(out.max_grad_relative, relative_difference(base.grad, lg.grad));
  }
  return out;
}

inline CheckResult determinism_check(const ProblemSpec& problem, TrainConfig config, int epochs = 5) {
  config.epochs = epochs;
  config.workers = 1;
  const auto a = train(problem, config);
  const auto b = train(problem, config);
  bool same = a.history.size() == b.history.size();
  for (std::size_t i = 0; same && i < a.history.size(); ++i) same = a.history[i].loss == b.history[i].loss;
  same = same && a.pair.flatten() == b.pair.flatten();
  const auto inv = worker_invariance(problem, config);
  CheckResult out;
  out.name = "determinism";
  out.passed = same && inv.losses_equal && inv.max_grad_relative <= 1e-14;
  out.detail = std::string("repeat run ") + (same ? "identical" : "DIFFERS") + ", workers {1,2,4} loss " +
               (inv.losses_equal ? "equal" : "DIFFERS") + ", grad rel diff " +
               detail::fmt("%.3e", inv.max_grad_relative);
  return out;
}

}  // namespace nbm::checks
