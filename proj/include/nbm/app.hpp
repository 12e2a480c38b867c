#pragma once

// Command implementations behind the nbm CLI. Exit codes:
//   0 success, 1 config error, 2 numerical failure, 3 I/O error, 4 oracle failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nbm/checkpoint.hpp"
#include "nbm/checks.hpp"
#include "nbm/config.hpp"
#include "nbm/evalmetrics.hpp"
#include "nbm/io.hpp"
#include "nbm/training.hpp"

namespace nbm::app {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalError = 2, kIoError = 3, kOracleFailure = 4 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> workers;
  std::optional<int> resolution;
  std::optional<std::string> out;
  int log_every = 0;  // 0: quiet
};

inline void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.seed) c.train.seed = *o.seed;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.workers) c.train.workers = *o.workers;
  if (o.resolution) c.train.base_resolution = *o.resolution;
  if (o.out) c.output_dir = *o.out;
  c.train.validate();
}

inline std::string format_history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,loss\n";
  for (const auto& r : history) out << r.epoch << ',' << format_double(r.loss) << '\n';
  return out.str();
}

inline std::string format_timing_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,seconds\n";
  for (const auto& r : history) out << r.epoch << ',' << format_double(r.seconds) << '\n';
  return out.str();
}

/// Median seconds per epoch, skipping the first epoch (which includes one-off setup).
inline double seconds_per_epoch(const std::vector<EpochRecord>& history) {
  std::vector<double> t;
  for (std::size_t i = history.size() > 1 ? 1 : 0; i < history.size(); ++i) t.push_back(history[i].seconds);
  if (t.empty()) return 0.0;
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

struct SolveOutcome {
  TrainResult result;
  std::optional<ErrorReport> report;
};

/// Trains one configuration and writes checkpoint.json, history.csv, timing.csv,
/// field.{vtk,csv} and (with exact solutions) report.csv into the output directory.
inline SolveOutcome run_solve(const RunConfig& config, std::ostream& log, int log_every = 0) {
  const ProblemSpec problem = build_problem(config);
  const auto& tc = config.train;
  EpochCallback cb;
  if (log_every > 0) {
    cb = [&log, log_every, &tc](const EpochRecord& r) {
      if (r.epoch % log_every == 0 || r.epoch + 1 == tc.epochs) {
        log << "epoch " << r.epoch << " loss " << format_double(r.loss) << " (" << r.seconds << " s)\n";
      }
    };
  }
  SolveOutcome out;
  out.result = train(problem, tc, cb);

  const auto& dir = config.output_dir;
  save_checkpoint(dir / "checkpoint.json", out.result.pair, tc.seed, problem);
  write_file_atomic(dir / "history.csv", format_history_csv(out.result.history));
  write_file_atomic(dir / "timing.csv", format_timing_csv(out.result.history));
  export_field(PairField{out.result.pair, problem.level_set}, problem, config.eval.m, dir / "field");
  if (config.eval.has_exact()) {
    const auto em = expr::parse(*config.eval.exact_minus);
    const auto ep = expr::parse(*config.eval.exact_plus);
    const ErrorNorms norms = evaluate_errors(out.result.pair, problem, em, ep, config.eval.m);
    ErrorReport rep;
    rep.resolution = tc.base_resolution;
    rep.rmse = norms.rmse;
    rep.linf = norms.linf;
    rep.epochs = tc.epochs;
    rep.seconds_per_epoch = seconds_per_epoch(out.result.history);
    write_file_atomic(dir / "report.csv", format_report_csv({rep}));
    out.report = rep;
  }
  return out;
}

/// Maps the exception taxonomy onto exit codes.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const expr::EvalError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const GeometryError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidArchitecture& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  }
}

inline int cmd_solve(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& log,
                     std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config = load_run_config(config_path);
    apply_overrides(config, overrides);
    const auto outcome = run_solve(config, log, overrides.log_every);
    log << "final loss " << format_double(outcome.result.history.back().loss) << '\n';
    if (outcome.report) {
      log << "N=" << outcome.report->resolution << " rmse " << format_double(outcome.report->rmse) << " linf "
          << format_double(outcome.report->linf) << " sec/epoch " << outcome.report->seconds_per_epoch << '\n';
    }
    log << "wrote " << config.output_dir.string() << '\n';
    return int{kOk};
  });
}

inline int cmd_sweep(const std::filesystem::path& config_path, const std::vector<int>& resolutions,
                     const Overrides& overrides, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig base = load_run_config(config_path);
    apply_overrides(base, overrides);
    if (resolutions.empty()) throw ConfigError("--resolutions: need at least one resolution");
    for (std::size_t i = 0; i < resolutions.size(); ++i) {
      const int n = resolutions[i];
      if (n < 4 || (n & (n - 1)) != 0) throw ConfigError("--resolutions: each entry must be a power of two >= 4");
      if (i > 0 && n != 2 * resolutions[i - 1]) throw ConfigError("--resolutions: entries must double successively");
    }
    if (!base.eval.has_exact()) throw ConfigError("/eval: sweep needs exact_minus and exact_plus");
    std::vector<ErrorReport> rows;
    for (int n : resolutions) {
      RunConfig c = base;
      c.train.base_resolution = n;
      c.output_dir = base.output_dir / ("N" + std::to_string(n));
      log << "sweep: N=" << n << '\n';
      const auto outcome = run_solve(c, log, overrides.log_every);
      rows.push_back(*outcome.report);
    }
    fill_orders(rows);
    const std::string table = format_report_csv(rows);
    write_file_atomic(base.output_dir / "convergence.csv", table);
    log << table;
    return int{kOk};
  });
}

/// Runs every oracle, printing one PASS/FAIL line each.
inline int run_checks(const RunConfig& config, std::ostream& log, const checks::AssembleFn& assemble_fn) {
  const ProblemSpec problem = build_problem(config);
  std::vector<checks::CheckResult> results;
  results.push_back(checks::jump_exactness(assemble_fn));
  if (config.eval.has_exact()) {
    const auto sweep = checks::truncation_sweep(problem, expr::parse(*config.eval.exact_minus),
                                                expr::parse(*config.eval.exact_plus));
    results.push_back(checks::truncation_check(sweep));
  } else {
    results.push_back({"truncation", true, "skipped: no exact solution in config"});
  }
  TrainConfig small = config.train;
  results.push_back(checks::gradient_check(problem, small));
  small.base_resolution = 4;
  results.push_back(checks::determinism_check(problem, small));
  bool all = true;
  for (const auto& r : results) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  return all ? kOk : kOracleFailure;
}

inline int cmd_check(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& log,
                     std::ostream& err, const checks::AssembleFn& assemble_fn = checks::default_assemble) {
  return guarded(err, [&] {
    RunConfig config = load_run_config(config_path);
    apply_overrides(config, overrides);
    return run_checks(config, log, assemble_fn);
  });
}

}  // namespace nbm::app
