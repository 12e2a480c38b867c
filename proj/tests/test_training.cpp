#include <gtest/gtest.h>

#include <cmath>

#include "nbm/checks.hpp"
#include "nbm/training.hpp"

using namespace nbm;

namespace {

ProblemSpec sphere_problem() {
  ProblemSpec p;
  p.mu_minus = expr::parse("y^2*log(x+2)+4");
  p.mu_plus = expr::parse("exp(-z)");
  p.k_minus = expr::parse("0");
  p.k_plus = expr::parse("0");
  p.f_minus = expr::parse("-(y^2*log(x+2)+4)*exp(z)");
  p.f_plus = expr::parse("2*exp(-z)*cos(x)*sin(y)");
  p.alpha = expr::parse("cos(x)*sin(y)-exp(z)");
  p.beta = expr::parse(
      "(exp(-z)*(cos(x)*cos(y)*y-sin(x)*sin(y)*x)-(y^2*log(x+2)+4)*exp(z)*z)/sqrt(x^2+y^2+z^2)");
  p.g = expr::parse("cos(x)*sin(y)");
  p.level_set = LevelSet::analytic("sqrt(x^2+y^2+z^2)-0.5");
  return p;
}

TrainConfig small_config() {
  TrainConfig c;
  c.base_resolution = 4;
  c.epochs = 3;
  return c;
}

}  // namespace

TEST(Training, GridSampleCounts) {
  const auto batches = sample_epoch(small_config(), Cube{}, 0);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].interior.size(), 27u);
  EXPECT_EQ(batches[0].boundary.size(), 98u);
  EXPECT_EQ(batches[0].interior_ids.size(), 27u);
  for (const auto& p : batches[0].boundary) {
    const bool on_face = std::fabs(std::fabs(p.x) - 1) < 1e-15 || std::fabs(std::fabs(p.y) - 1) < 1e-15 ||
                         std::fabs(std::fabs(p.z) - 1) < 1e-15;
    EXPECT_TRUE(on_face);
  }
}

TEST(Training, GridShuffleIsSeededPerEpoch) {
  auto c = small_config();
  c.base_resolution = 64;
  const auto a = sample_epoch(c, Cube{}, 3);
  const auto b = sample_epoch(c, Cube{}, 3);
  const auto d = sample_epoch(c, Cube{}, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].interior_ids, b[i].interior_ids);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].interior_ids != d[i].interior_ids;
  EXPECT_TRUE(differs);
  EXPECT_NE(a[0].boundary, d[0].boundary);
}

TEST(Training, GridBatchesArePermutedBricks) {
  auto c = small_config();
  c.base_resolution = 64;
  const auto batches = sample_epoch(c, Cube{}, 0);
  const auto nodes = interior_grid_nodes(Cube{}, 64);
  std::vector<int> seen(nodes.size(), 0);
  std::vector<int> brick_sequence;
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.interior.size(); ++i) {
      const std::size_t id = b.interior_ids[i];
      ++seen[id];
      EXPECT_EQ(b.interior[i].x, nodes[id].x);
      EXPECT_EQ(b.interior[i].z, nodes[id].z);
      const int brick = static_cast<int>(id % 63 / 32 + 2 * (id / 63 % 63 / 32) + 4 * (id / (63 * 63) / 16));
      if (brick_sequence.empty() || brick_sequence.back() != brick) brick_sequence.push_back(brick);
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  // 2 x 2 x 4 bricks, each visited in one contiguous run
  EXPECT_EQ(brick_sequence.size(), 16u);
  EXPECT_NE(brick_sequence, std::vector<int>({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}));
}

TEST(Training, UniformSamplesStayInsideMargin) {
  TrainConfig c;
  c.base_resolution = 8;
  c.sampler = SamplerMode::UniformRandom;
  const auto batches = sample_epoch(c, Cube{}, 0);
  std::size_t n_int = 0;
  std::size_t n_bnd = 0;
  for (const auto& b : batches) {
    n_int += b.interior.size();
    n_bnd += b.boundary.size();
    for (const auto& p : b.interior) {
      for (int a = 0; a < 3; ++a) {
        EXPECT_GE(p[a], -0.75);
        EXPECT_LE(p[a], 0.75);
      }
    }
  }
  EXPECT_EQ(n_int, 512u);
  EXPECT_EQ(n_bnd, 6u * 81u);
}

TEST(Training, BatchesSplitInteriorAndBoundary) {
  auto c = small_config();
  c.batch_size = 10;
  const auto batches = sample_epoch(c, Cube{}, 0);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].interior.size(), 10u);
  EXPECT_EQ(batches[2].interior.size(), 7u);
  std::size_t nb = 0;
  for (const auto& b : batches) nb += b.boundary.size();
  EXPECT_EQ(nb, 98u);
}

TEST(Training, EmptyBatchHasZeroLoss) {
  const auto pair = SolutionPair::init(small_config().layer_sizes, 0);
  const auto lg = loss_and_grad(sphere_problem(), pair, Batch{}, small_config());
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.grad) EXPECT_EQ(g, 0.0);
}

TEST(Training, SlotLoweringMatchesReferenceLoss) {
  auto c = small_config();
  c.refinement_levels = 2;
  const auto problem = sphere_problem();
  const auto pair = SolutionPair::init(c.layer_sizes, 1);
  const auto batch = checks::mixed_batch(problem, c);
  const double ref = checks::reference_loss(problem, pair, batch, c);
  const double got = loss_and_grad(problem, pair, batch, c).loss;
  EXPECT_NEAR(got, ref, 1e-13 * ref);
}

TEST(Training, GradientMatchesFiniteDifferences) {
  auto c = small_config();
  c.refinement_levels = 2;
  const auto problem = sphere_problem();
  const auto pair = SolutionPair::init(c.layer_sizes, 2);
  const auto batch = checks::mixed_batch(problem, c);
  EXPECT_EQ(batch.interior.size(), 7u);
  EXPECT_EQ(batch.boundary.size(), 3u);
  const auto cmp = checks::compare_gradient_fd(problem, pair, batch, c);
  EXPECT_EQ(cmp.parameters, 982u);
  EXPECT_LT(cmp.max_relative_error, 1e-5);
}

TEST(Training, WorkerCountDoesNotChangeResults) {
  const auto inv = checks::worker_invariance(sphere_problem(), small_config());
  EXPECT_TRUE(inv.losses_equal);
  EXPECT_LE(inv.max_grad_relative, 1e-14);
}

TEST(Training, AdamClosedForm) {
  TrainConfig c;
  OptimizerState s(1);
  std::vector<double> theta{0.0};
  const std::vector<double> g{1.0};
  adam_step(s, theta, g, c);
  EXPECT_NEAR(theta[0], -1e-3 / (1.0 + 1e-8), 1e-17);
  adam_step(s, theta, g, c);
  EXPECT_NEAR(s.m[0], 0.19, 1e-15);
  EXPECT_NEAR(s.v[0], 0.001999, 1e-15);
  EXPECT_NEAR(theta[0], -2e-3 / (1.0 + 1e-8), 1e-17);
  EXPECT_EQ(s.step, 2);
  std::vector<double> wrong(2);
  EXPECT_THROW(adam_step(s, wrong, g, c), std::invalid_argument);
}

TEST(Training, TrainingIsDeterministicAndDecreasesLoss) {
  auto c = small_config();
  c.epochs = 40;
  c.learning_rate = 1e-2;
  const auto problem = sphere_problem();
  const auto a = train(problem, c);
  const auto b = train(problem, c);
  ASSERT_EQ(a.history.size(), 40u);
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].loss, b.history[i].loss);
  EXPECT_EQ(a.pair.flatten(), b.pair.flatten());
  EXPECT_LT(a.history.back().loss, a.history.front().loss);
}

TEST(Training, CachedAndUncachedAssemblyAgree) {
  auto c = small_config();
  c.refinement_levels = 2;
  const auto problem = sphere_problem();
  const auto cache = assemble_grid(problem, c);
  const auto batch = sample_epoch(c, problem.domain, 1)[0];
  const auto pair = SolutionPair::init(c.layer_sizes, 0);
  const auto x = loss_and_grad(pair, assemble_batch(problem, batch, c, &cache), c);
  const auto y = loss_and_grad(pair, assemble_batch(problem, batch, c), c);
  EXPECT_EQ(x.loss, y.loss);
  EXPECT_EQ(x.grad, y.grad);
}

TEST(Training, NonFiniteLossAborts) {
  auto p = sphere_problem();
  p.g = expr::parse("exp(1000)");
  EXPECT_THROW(train(p, small_config()), NumericalError);
}

TEST(Training, ConfigValidation) {
  TrainConfig c;
  c.base_resolution = 12;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.refinement_levels = 2;
  c.level_weights = {1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.layer_sizes = {3, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}
