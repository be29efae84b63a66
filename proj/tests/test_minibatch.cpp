#include <gtest/gtest.h>

#include <random>

#include "fedres/minibatch.hpp"
#include "oracles.hpp"

using namespace fedres;

namespace {

FederatedDataset random_dataset(std::size_t p, std::size_t dg, std::size_t dl, long n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  FederatedDataset d;
  d.global_dim = dg;
  d.local_dims.assign(p, dl);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<Sample> s;
    for (long t = 0; t < n; ++t) {
      Sample x;
      for (std::size_t k = 0; k < dg; ++k) x.x_global.push_back(z(gen));
      for (std::size_t k = 0; k < dl; ++k) x.x_local.push_back(z(gen));
      x.y = z(gen);
      s.push_back(std::move(x));
    }
    d.train.push_back(std::move(s));
  }
  return d;
}

HyperParams hp(double eta) { return HyperParams{100.0, eta, {eta}}; }

}  // namespace

TEST(AggregateLoss, SingleSampleIsPlainLoss) {
  const Sample s{{1.0, 2.0}, {3.0}, 4.0};
  const GlobalParams wg{{0.5, 0.1}};
  const LocalParams wl{{0.2}, 0};
  EXPECT_EQ(aggregate_loss(std::vector<Sample>{s}, 1, wg, wl), loss(wg, wl, s));
  const auto [gg, gl] = aggregate_grads(std::vector<Sample>{s}, 1, wg, wl);
  EXPECT_EQ(gg, grad_global(wg, wl, s));
  EXPECT_EQ(gl, grad_local(wg, wl, s));
}

TEST(AggregateLoss, DuplicatedSampleKeepsValue) {
  const Sample s{{1.0, 2.0}, {3.0}, 4.0};
  const GlobalParams wg{{0.5, 0.1}};
  const LocalParams wl{{0.2}, 0};
  EXPECT_DOUBLE_EQ(aggregate_loss(std::vector<Sample>{s, s}, 2, wg, wl), loss(wg, wl, s));
  const auto [gg, gl] = aggregate_grads(std::vector<Sample>{s, s}, 2, wg, wl);
  for (std::size_t k = 0; k < gg.size(); ++k) EXPECT_DOUBLE_EQ(gg[k], grad_global(wg, wl, s)[k]);
  EXPECT_DOUBLE_EQ(gl[0], grad_local(wg, wl, s)[0]);
}

TEST(AggregateLoss, MeanOfFourSamples) {
  const auto data = random_dataset(1, 3, 2, 4, 1);
  const GlobalParams wg{{0.3, -0.2, 0.1}};
  const LocalParams wl{{0.4, 0.5}, 0};
  double l = 0.0;
  Vector gg(3, 0.0), gl(2, 0.0);
  for (const auto& s : data.train[0]) {
    l += loss(wg, wl, s);
    add_to(gg, grad_global(wg, wl, s));
    add_to(gl, grad_local(wg, wl, s));
  }
  EXPECT_NEAR(aggregate_loss(data.train[0], 4, wg, wl), l / 4.0, 1e-12);
  const auto [ag, al] = aggregate_grads(data.train[0], 4, wg, wl);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(ag[k], gg[k] / 4.0, 1e-12);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(al[k], gl[k] / 4.0, 1e-12);
}

TEST(AggregateLoss, WrongLengthThrows) {
  const Sample s{{1.0}, {1.0}, 1.0};
  EXPECT_THROW(aggregate_loss(std::vector<Sample>{s}, 2, GlobalParams{{0.0}}, LocalParams{{0.0}, 0}), InvariantError);
  EXPECT_THROW(aggregate_grads(std::vector<Sample>{s, s}, 1, GlobalParams{{0.0}}, LocalParams{{0.0}, 0}),
               InvariantError);
}

TEST(Batched, BatchOneIsUnbatchedEngine) {
  const auto data = random_dataset(3, 2, 2, 60, 2);
  const DelayConfig d{{0, 2, 1}, {3, 0, 1}};
  const auto a = run_batched(data, d, hp(0.02), 60, 1, 7);
  const auto b = run_fedres_sgd(data, d, hp(0.02), 60, 7);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) ASSERT_EQ(a.trace[k].loss, b.trace[k].loss);
  EXPECT_EQ(a.final_global, b.final_global);
}

TEST(Batched, FetchesOncePerBatch) {
  const auto data = random_dataset(2, 2, 2, 120, 3);
  for (std::size_t b : {1u, 2u, 3u, 4u, 5u, 8u, 120u}) {
    const auto run = run_batched(data, DelayConfig::uniform(2, 3, 2), hp(0.02), 120, b, 0);
    for (auto f : run.fetches) ASSERT_EQ(f, 120u / b);
    ASSERT_EQ(run.trace.size(), 240u);
  }
}

TEST(Batched, RejectsNonDividingBatch) {
  const auto data = random_dataset(1, 1, 1, 10, 4);
  EXPECT_THROW(run_batched(data, DelayConfig::uniform(1, 0, 0), hp(0.1), 10, 3, 0), ConfigError);
}

TEST(Batched, FullBatchIsOneGradientStep) {
  const auto data = random_dataset(1, 2, 2, 16, 5);
  const auto run = run_batched(data, DelayConfig::uniform(1, 0, 0), hp(0.1), 16, 16, 0);
  const auto [gg, gl] = aggregate_grads(data.train[0], 16, GlobalParams{{0.0, 0.0}}, LocalParams{{0.0, 0.0}, 0});
  EXPECT_EQ(run.final_global.w, step(Vector{0.0, 0.0}, 0.1, gg));
  // the client step of the only batch lands after the run ends
  EXPECT_EQ(run.final_pairs[0].local.w, (Vector{0.0, 0.0}));
}

// Manual FedRes.SGD over the aggregated sequence, batch delays ceil(alpha/b), ceil(beta/b).
TEST(Batched, BatchOfFourMatchesAggregatedSequence) {
  const auto data = random_dataset(2, 2, 3, 64, 6);
  const std::size_t b = 4;
  const DelayConfig d{{5, 0}, {2, 7}};
  const auto run = run_batched(data, d, hp(0.03), 64, b, 0);

  const DelayConfig db{{2, 0}, {1, 2}};
  FedResSgd<> sys(2, {3, 3}, hp(0.03), db);
  std::vector<double> losses;
  for (Round n = 1; n <= 16; ++n) {
    std::vector<ModelPair> pairs;
    for (ClientId i = 0; i < 2; ++i) {
      pairs.push_back(sys.begin_client_round(i, n));
      std::vector<Sample> batch(data.train[i].begin() + (n - 1) * 4, data.train[i].begin() + n * 4);
      sys.end_client_round(i, n, batch);
    }
    for (std::size_t k = 0; k < b; ++k) {
      for (ClientId i = 0; i < 2; ++i) {
        losses.push_back(loss(pairs[i].global, pairs[i].local, data.train[i][std::size_t(n - 1) * b + k]));
      }
    }
    sys.server_round(n);
  }
  ASSERT_EQ(run.trace.size(), losses.size());
  for (std::size_t k = 0; k < losses.size(); ++k) ASSERT_EQ(run.trace[k].loss, losses[k]);
  EXPECT_EQ(run.final_global, sys.server_model());

  const auto ref = oracle::delayed_batched_sgd(data, db.alpha, db.beta, 64, b, 0.03, 0.03, 100.0);
  ASSERT_FALSE(ref.projected);
  for (std::size_t k = 0; k < ref.losses.size(); ++k) ASSERT_EQ(run.trace[k].loss, ref.losses[k]);
  EXPECT_EQ(run.final_global.w, ref.global);
  for (ClientId i = 0; i < 2; ++i) EXPECT_EQ(run.final_pairs[i].local.w, ref.locals[i]);
}
