#pragma once

// Collocation sampling, residual loss aggregation and Adam training of a SolutionPair.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "nbm/kernel.hpp"
#include "nbm/surrogate.hpp"

namespace nbm {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SamplerMode { GridNodes, UniformRandom };

struct TrainConfig {
  int epochs = 10000;
  int batch_size = 32 * 32 * 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int base_resolution = 16;
  int refinement_levels = 1;
  std::vector<double> level_weights;  // empty: all ones
  double boundary_weight = 1.0;
  SamplerMode sampler = SamplerMode::GridNodes;
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<int> layer_sizes{3, 10, 10, 10, 10, 10, 1};
  double omega0 = 1.0;

  double level_weight(int l) const {
    return level_weights.empty() ? 1.0 : level_weights[static_cast<std::size_t>(l)];
  }

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (base_resolution < 4 || (base_resolution & (base_resolution - 1)) != 0) {
      throw ConfigError("base_resolution must be a power of two >= 4");
    }
    if (refinement_levels < 1) throw ConfigError("refinement_levels must be >= 1");
    if (!level_weights.empty() && level_weights.size() != static_cast<std::size_t>(refinement_levels)) {
      throw ConfigError("level_weights must have one entry per refinement level");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(boundary_weight >= 0.0)) throw ConfigError("boundary_weight must be non-negative");
    try {
      validate_architecture(layer_sizes);
    } catch (const InvalidArchitecture& e) {
      throw ConfigError(std::string("layer_sizes: ") + e.what());
    }
  }
};

/// Cell width of refinement level l.
inline double level_width(const TrainConfig& config, const Cube& domain, int level) {
  return domain.extent() / config.base_resolution / static_cast<double>(1 << level);
}

struct Batch {
  std::vector<Vec3> interior;
  std::vector<Vec3> boundary;
  // GridNodes only: index of each interior point in the interior node enumeration.
  std::vector<std::size_t> interior_ids;
};

/// Interior nodes of the (n+1)^3 grid, x fastest.
inline std::vector<Vec3> interior_grid_nodes(const Cube& domain, int n) {
  const double h = domain.extent() / n;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n - 1) * (n - 1) * (n - 1));
  for (int k = 1; k < n; ++k) {
    for (int j = 1; j < n; ++j) {
      for (int i = 1; i < n; ++i) pts.push_back({domain.lo + i * h, domain.lo + j * h, domain.lo + k * h});
    }
  }
  return pts;
}

inline std::vector<Vec3> boundary_grid_nodes(const Cube& domain, int n) {
  const double h = domain.extent() / n;
  std::vector<Vec3> pts;
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        if (i == 0 || j == 0 || k == 0 || i == n || j == n || k == n) {
          pts.push_back({domain.lo + i * h, domain.lo + j * h, domain.lo + k * h});
        }
      }
    }
  }
  return pts;
}

/// Interior nodes are visited brick by brick: bricks of kGridBrick nodes in shuffled
/// order, grid order inside each brick. Batches then cover compact regions, so the
/// stencils of a batch share most of their evaluation points.
inline constexpr std::array<int, 3> kGridBrick{32, 32, 16};

inline std::vector<std::size_t> grid_brick_order(int n, std::mt19937_64& rng) {
  const int m = n - 1;
  const int bx = (m + kGridBrick[0] - 1) / kGridBrick[0];
  const int by = (m + kGridBrick[1] - 1) / kGridBrick[1];
  const int bz = (m + kGridBrick[2] - 1) / kGridBrick[2];
  std::vector<int> bricks(static_cast<std::size_t>(bx) * by * bz);
  for (std::size_t b = 0; b < bricks.size(); ++b) bricks[b] = static_cast<int>(b);
  std::shuffle(bricks.begin(), bricks.end(), rng);
  std::vector<std::size_t> ids;
  ids.reserve(static_cast<std::size_t>(m) * m * m);
  for (int b : bricks) {
    const int i0 = (b % bx) * kGridBrick[0];
    const int j0 = (b / bx % by) * kGridBrick[1];
    const int k0 = (b / bx / by) * kGridBrick[2];
    for (int k = k0; k < std::min(m, k0 + kGridBrick[2]); ++k) {
      for (int j = j0; j < std::min(m, j0 + kGridBrick[1]); ++j) {
        for (int i = i0; i < std::min(m, i0 + kGridBrick[0]); ++i) {
          ids.push_back(static_cast<std::size_t>(i) + static_cast<std::size_t>(m) * (j + static_cast<std::size_t>(m) * k));
        }
      }
    }
  }
  return ids;
}

inline std::vector<Batch> sample_epoch(const TrainConfig& config, const Cube& domain, std::uint64_t epoch_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(epoch_index), static_cast<std::uint32_t>(epoch_index >> 32)};
  std::mt19937_64 rng(seq);
  const int n = config.base_resolution;

  std::vector<Vec3> interior;
  std::vector<Vec3> boundary;
  std::vector<std::size_t> ids;
  if (config.sampler == SamplerMode::GridNodes) {
    const auto nodes = interior_grid_nodes(domain, n);
    ids = grid_brick_order(n, rng);
    interior.reserve(ids.size());
    for (std::size_t id : ids) interior.push_back(nodes[id]);
    boundary = boundary_grid_nodes(domain, n);
    std::shuffle(boundary.begin(), boundary.end(), rng);
  } else {
    const double h0 = domain.extent() / n;
    std::uniform_real_distribution<double> inner(domain.lo + h0, domain.hi - h0);
    std::uniform_real_distribution<double> face(domain.lo, domain.hi);
    std::uniform_int_distribution<int> which(0, 5);
    const std::size_t n_int = static_cast<std::size_t>(n) * n * n;
    const std::size_t n_bnd = 6 * static_cast<std::size_t>(n + 1) * (n + 1);
    interior.reserve(n_int);
    for (std::size_t i = 0; i < n_int; ++i) {
      const double x = inner(rng);
      const double y = inner(rng);
      const double z = inner(rng);
      interior.push_back({x, y, z});
    }
    boundary.reserve(n_bnd);
    for (std::size_t i = 0; i < n_bnd; ++i) {
      const int f = which(rng);
      Vec3 p;
      p.x = face(rng);
      p.y = face(rng);
      p.z = face(rng);
      p[static_cast<std::size_t>(f / 2)] = (f % 2 == 0) ? domain.lo : domain.hi;
      boundary.push_back(p);
    }
  }

  // Interior points are cut into chunks of batch_size; boundary points are spread
  // over the same number of batches.
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t count = std::max<std::size_t>(1, (interior.size() + bs - 1) / bs);
  std::vector<Batch> batches(count);
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t i0 = b * bs;
    const std::size_t i1 = std::min(interior.size(), i0 + bs);
    if (i0 < i1) {
      batches[b].interior.assign(interior.begin() + static_cast<std::ptrdiff_t>(i0), interior.begin() + static_cast<std::ptrdiff_t>(i1));
      if (!ids.empty()) batches[b].interior_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(i0), ids.begin() + static_cast<std::ptrdiff_t>(i1));
    }
    const std::size_t b0 = boundary.size() * b / count;
    const std::size_t b1 = boundary.size() * (b + 1) / count;
    batches[b].boundary.assign(boundary.begin() + static_cast<std::ptrdiff_t>(b0), boundary.begin() + static_cast<std::ptrdiff_t>(b1));
  }
  return batches;
}

/// A batch lowered to network evaluations: every distinct (point, side) pair is a slot
/// evaluated once; rows and boundary entries refer to slots.
struct AssembledBatch {
  struct Slot {
    Vec3 point;
    Side side = Side::Minus;
  };
  struct Term {
    std::uint32_t slot = 0;
    double coefficient = 0.0;
  };
  struct Row {
    std::uint32_t first_term = 0;
    std::uint32_t term_count = 0;
    double rhs = 0.0;
    double diagonal = 1.0;
    double weight = 1.0;
  };
  struct BoundaryEntry {
    std::uint32_t slot = 0;
    double g = 0.0;
  };

  std::vector<Slot> slots;
  std::vector<Term> terms;
  std::vector<Row> rows;  // point-major, then level
  std::vector<BoundaryEntry> boundary;
  std::size_t interior_count = 0;
};

namespace detail {

struct SlotKey {
  std::uint64_t x, y, z;
  Side side;
  bool operator==(const SlotKey&) const = default;
};

struct SlotKeyHash {
  std::size_t operator()(const SlotKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t v : {k.x, k.y, k.z, static_cast<std::uint64_t>(k.side)}) {
      h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

inline std::uint64_t bits(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

class SlotTable {
 public:
  SlotTable(AssembledBatch& out, std::size_t expected) : out_(out) {
    index_.reserve(expected);
    out_.slots.reserve(expected);
  }

  std::uint32_t get(const Vec3& p, Side s) {
    const SlotKey key{bits(p.x), bits(p.y), bits(p.z), s};
    auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(out_.slots.size()));
    if (inserted) out_.slots.push_back({p, s});
    return it->second;
  }

 private:
  AssembledBatch& out_;
  std::unordered_map<SlotKey, std::uint32_t, SlotKeyHash> index_;
};

/// Runs fn(shard, begin, end) over `workers` contiguous shards of [0, n).
template <class Fn>
void for_each_shard(int workers, std::size_t n, Fn&& fn) {
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(w - 1);
  for (std::size_t s = 1; s < w; ++s) {
    threads.emplace_back([&fn, s, n, w] { fn(s, n * s / w, n * (s + 1) / w); });
  }
  fn(std::size_t{0}, std::size_t{0}, n / w);
}

}  // namespace detail

/// Assemblies of every level for one collocation point.
using PointAssemblies = std::vector<StencilAssembly>;

inline PointAssemblies assemble_levels(const ProblemSpec& problem, const Vec3& p, const TrainConfig& config) {
  PointAssemblies out;
  out.reserve(static_cast<std::size_t>(config.refinement_levels));
  for (int l = 0; l < config.refinement_levels; ++l) {
    out.push_back(assemble(problem, p, level_width(config, problem.domain, l)));
  }
  return out;
}

/// Lowers a batch. `cache`, if given, holds precomputed assemblies indexed by
/// Batch::interior_ids.
inline AssembledBatch assemble_batch(const ProblemSpec& problem, const Batch& batch, const TrainConfig& config,
                                     const std::vector<PointAssemblies>* cache = nullptr) {
  AssembledBatch out;
  out.interior_count = batch.interior.size();
  detail::SlotTable table(out, 2 * batch.interior.size() + batch.boundary.size());
  out.rows.reserve(batch.interior.size() * static_cast<std::size_t>(config.refinement_levels));
  const bool cached = cache != nullptr && batch.interior_ids.size() == batch.interior.size();
  PointAssemblies scratch;
  for (std::size_t i = 0; i < batch.interior.size(); ++i) {
    const PointAssemblies* levels = nullptr;
    if (cached) {
      levels = &(*cache)[batch.interior_ids[i]];
    } else {
      scratch = assemble_levels(problem, batch.interior[i], config);
      levels = &scratch;
    }
    for (std::size_t l = 0; l < levels->size(); ++l) {
      const StencilAssembly& a = (*levels)[l];
      AssembledBatch::Row row;
      row.first_term = static_cast<std::uint32_t>(out.terms.size());
      row.term_count = static_cast<std::uint32_t>(a.terms.size());
      row.rhs = a.rhs;
      row.diagonal = a.diagonal;
      row.weight = config.level_weight(static_cast<int>(l));
      for (const auto& t : a.terms) out.terms.push_back({table.get(t.point, t.side), t.coefficient});
      out.rows.push_back(row);
    }
  }
  out.boundary.reserve(batch.boundary.size());
  for (const Vec3& pb : batch.boundary) {
    const Side s = problem.level_set.side(pb);
    out.boundary.push_back({table.get(pb, s), problem.g.evaluate(pb)});
  }
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// loss = (1/|interior|) sum_p sum_l w_l r_p(h_l)^2 + lambda_b (1/|boundary|) sum_b (u - g)^2
///
/// The loss is reduced serially in row order, so it does not depend on `workers`.
/// Gradient shard sums are added in shard-index order.
inline LossAndGrad loss_and_grad(const SolutionPair& pair, const AssembledBatch& batch, const TrainConfig& config) {
  const std::size_t nslots = batch.slots.size();
  std::vector<double> values(nslots);
  detail::for_each_shard(config.workers, nslots, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) values[i] = pair.value(batch.slots[i].side, batch.slots[i].point);
  });

  const double inv_int = batch.interior_count ? 1.0 / static_cast<double>(batch.interior_count) : 0.0;
  const double bnd_scale =
      batch.boundary.empty() ? 0.0 : config.boundary_weight / static_cast<double>(batch.boundary.size());

  std::vector<double> cot(nslots, 0.0);
  double interior_sum = 0.0;
  for (const auto& row : batch.rows) {
    double raw = 0.0;
    for (std::uint32_t j = 0; j < row.term_count; ++j) {
      const auto& t = batch.terms[row.first_term + j];
      raw += t.coefficient * values[t.slot];
    }
    raw -= row.rhs;
    const double r = raw / row.diagonal;
    interior_sum += row.weight * r * r;
    const double scale = 2.0 * row.weight * r * inv_int / row.diagonal;
    for (std::uint32_t j = 0; j < row.term_count; ++j) {
      const auto& t = batch.terms[row.first_term + j];
      cot[t.slot] += scale * t.coefficient;
    }
  }
  double boundary_sum = 0.0;
  for (const auto& b : batch.boundary) {
    const double res = values[b.slot] - b.g;
    boundary_sum += res * res;
    cot[b.slot] += 2.0 * bnd_scale * res;
  }

  LossAndGrad out;
  out.loss = inv_int * interior_sum + bnd_scale * boundary_sum;
  if (!std::isfinite(out.loss)) return out;

  const std::size_t np = pair.parameter_count();
  const std::size_t off_plus = pair.offset(Side::Plus);
  const std::size_t workers = static_cast<std::size_t>(std::max(1, config.workers));
  std::vector<std::vector<double>> partial(workers, std::vector<double>(np, 0.0));
  detail::for_each_shard(config.workers, nslots, [&](std::size_t shard, std::size_t b, std::size_t e) {
    std::span<double> g = partial[shard];
    for (std::size_t i = b; i < e; ++i) {
      if (cot[i] == 0.0) continue;
      const auto& slot = batch.slots[i];
      const SineMlp& net = pair.net(slot.side);
      const std::size_t off = slot.side == Side::Minus ? 0 : off_plus;
      net.accumulate_gradient(slot.point, cot[i], g.subspan(off, net.parameter_count()));
    }
  });
  out.grad = std::move(partial[0]);
  for (std::size_t s = 1; s < workers; ++s) {
    for (std::size_t k = 0; k < np; ++k) out.grad[k] += partial[s][k];
  }
  return out;
}

inline LossAndGrad loss_and_grad(const ProblemSpec& problem, const SolutionPair& pair, const Batch& batch,
                                 const TrainConfig& config) {
  return loss_and_grad(pair, assemble_batch(problem, batch, config), config);
}

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit OptimizerState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(OptimizerState& state, std::span<double> params, std::span<const double> grad,
                      const TrainConfig& config) {
  if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  SolutionPair pair;
  std::vector<EpochRecord> history;
};

/// Assemblies of every interior grid node, in interior_grid_nodes order.
inline std::vector<PointAssemblies> assemble_grid(const ProblemSpec& problem, const TrainConfig& config) {
  const auto nodes = interior_grid_nodes(problem.domain, config.base_resolution);
  std::vector<PointAssemblies> out(nodes.size());
  detail::for_each_shard(config.workers, nodes.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = assemble_levels(problem, nodes[i], config);
  });
  return out;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from `initial` (or a seeded initialization when null).
inline TrainResult train(const ProblemSpec& problem, const TrainConfig& config, const EpochCallback& on_epoch = {},
                         const SolutionPair* initial = nullptr) {
  config.validate();
  TrainResult result;
  result.pair = initial ? *initial : SolutionPair::init(config.layer_sizes, config.seed, config.omega0);
  std::vector<double> params = result.pair.flatten();
  OptimizerState state(params.size());

  std::vector<PointAssemblies> cache;
  if (config.sampler == SamplerMode::GridNodes) cache = assemble_grid(problem, config);

  result.history.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = sample_epoch(config, problem.domain, static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    for (const Batch& batch : batches) {
      const AssembledBatch lowered = assemble_batch(problem, batch, config, cache.empty() ? nullptr : &cache);
      const LossAndGrad lg = loss_and_grad(result.pair, lowered, config);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += lg.loss;
      adam_step(state, params, lg.grad, config);
      result.pair.unflatten(params);
    }
    const auto stop = std::chrono::steady_clock::now();
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches.size()),
                    std::chrono::duration<double>(stop - start).count()};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace nbm
