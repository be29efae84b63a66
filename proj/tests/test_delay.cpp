#include <gtest/gtest.h>

#include <map>
#include <random>
#include <tuple>

#include "fedres/delay.hpp"

using namespace fedres;

namespace {

GlobalParams model(double v) { return GlobalParams{{v}}; }

}  // namespace

TEST(Uplink, ZeroDelayDeliversSameRound) {
  DelayedChannel<int> ch(DelayConfig::uniform(1, 0, 0), model(0));
  ch.uplink_send(0, 3, 42);
  auto got = ch.uplink_receive(3);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].payload, 42);
  EXPECT_EQ(got[0].sent_at, 3);
}

TEST(Uplink, DelayOfThree) {
  DelayedChannel<int> ch(DelayConfig::uniform(1, 3, 0), model(0));
  ch.uplink_send(0, 5, 1);
  for (Round t = 5; t < 8; ++t) EXPECT_TRUE(ch.uplink_receive(t).empty());
  auto got = ch.uplink_receive(8);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].sent_at, 5);
}

TEST(Uplink, FifoOrderPreserved) {
  DelayedChannel<int> ch(DelayConfig::uniform(1, 2, 0), model(0));
  ch.uplink_send(0, 5, 10);
  ch.uplink_send(0, 6, 11);
  EXPECT_TRUE(ch.uplink_receive(6).empty());
  auto a = ch.uplink_receive(7);
  auto b = ch.uplink_receive(8);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(a[0].payload, 10);
  EXPECT_EQ(b[0].payload, 11);
}

TEST(Uplink, AscendingClientOrder) {
  DelayedChannel<int> ch(DelayConfig{{1, 1}, {0, 0}}, model(0));
  ch.uplink_send(1, 1, 21);
  ch.uplink_send(0, 1, 20);
  EXPECT_TRUE(ch.uplink_receive(1).empty());
  auto got = ch.uplink_receive(2);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].client, 0u);
  EXPECT_EQ(got[1].client, 1u);
}

TEST(Uplink, Errors) {
  DelayedChannel<int> ch(DelayConfig::uniform(2, 1, 0), model(0));
  EXPECT_THROW(ch.uplink_send(2, 1, 0), InvariantError);
  EXPECT_THROW(ch.uplink_send(0, 0, 0), InvariantError);
  ch.uplink_receive(1);
  EXPECT_THROW(ch.uplink_receive(1), InvariantError);
  EXPECT_THROW(ch.uplink_receive(0), InvariantError);
}

TEST(Uplink, SkippedRoundIsDetected) {
  DelayedChannel<int> ch(DelayConfig::uniform(1, 1, 0), model(0));
  ch.uplink_send(0, 1, 5);
  EXPECT_THROW(ch.uplink_receive(3), InvariantError);
}

TEST(Downlink, FetchSemantics) {
  DelayedChannel<int> ch(DelayConfig{{0, 0, 0}, {0, 4, 5}}, model(-1));
  for (Round t = 1; t <= 10; ++t) ch.publish_global(t, model(double(t)));
  EXPECT_EQ(ch.fetch_global(0, 10), model(10));
  EXPECT_EQ(ch.fetch_global(1, 10), model(6));
  EXPECT_EQ(ch.fetch_global(2, 5), model(-1));
  EXPECT_EQ(ch.fetch_count(1), 1u);
}

TEST(Downlink, WarmupUsesInitialModel) {
  DelayedChannel<int> ch(DelayConfig::uniform(1, 0, 5), model(7));
  ch.publish_global(1, model(1));
  ch.publish_global(2, model(2));
  EXPECT_EQ(ch.fetch_global(0, 2), model(7));
}

TEST(Downlink, MissingSnapshotThrows) {
  DelayedChannel<int> ch(DelayConfig::uniform(1, 0, 0), model(0));
  EXPECT_THROW(ch.fetch_global(0, 1), InvariantError);
}

TEST(Downlink, RetainsEverySnapshotStillReachable) {
  const DelayConfig d{{3, 1}, {2, 5}};
  DelayedChannel<int> ch(d, model(0));
  for (Round t = 1; t <= 50; ++t) {
    ch.publish_global(t, model(double(t)));
    // the oldest round anyone may ask for is t - (max alpha + max beta)
    for (Round r = std::max<Round>(1, t - d.max_alpha() - d.max_beta()); r <= t; ++r) {
      ASSERT_EQ(ch.snapshot(r), model(double(r)));
    }
  }
}

TEST(Channel, ZeroDelayIsIdentity) {
  DelayedChannel<int> ch(DelayConfig::uniform(3, 0, 0), model(0));
  for (Round t = 1; t <= 20; ++t) {
    ch.publish_global(t, model(double(t)));
    for (ClientId i = 0; i < 3; ++i) {
      ASSERT_EQ(ch.fetch_global(i, t), model(double(t)));
      ch.uplink_send(i, t, int(100 * t + i));
    }
    auto got = ch.uplink_receive(t);
    ASSERT_EQ(got.size(), 3u);
    for (ClientId i = 0; i < 3; ++i) ASSERT_EQ(got[i].payload, int(100 * t + i));
  }
}

// Random delays and send schedules against a per-round list simulation.
TEST(Channel, MatchesBruteForceSimulation) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> pdist(1, 4), ddist(0, 6);
    const auto p = std::size_t(pdist(gen));
    DelayConfig d;
    for (std::size_t i = 0; i < p; ++i) {
      d.alpha.push_back(ddist(gen));
      d.beta.push_back(ddist(gen));
    }
    DelayedChannel<int> ch(d, model(0));
    std::map<Round, std::vector<std::tuple<ClientId, Round, int>>> expected;
    std::bernoulli_distribution send(0.6);
    int counter = 0, delivered = 0, sent = 0;
    const Round horizon = 40;
    for (Round t = 1; t <= horizon + 7; ++t) {
      for (ClientId i = 0; i < p; ++i) {
        if (t <= horizon && send(gen)) {
          ch.uplink_send(i, t, counter);
          expected[t + d.alpha[i]].emplace_back(i, t, counter);
          ++counter;
          ++sent;
        }
      }
      auto got = ch.uplink_receive(t);
      auto want = expected[t];
      std::stable_sort(want.begin(), want.end(),
                       [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t k = 0; k < got.size(); ++k) {
        ASSERT_EQ(got[k].client, std::get<0>(want[k]));
        ASSERT_EQ(got[k].sent_at, std::get<1>(want[k]));
        ASSERT_EQ(got[k].payload, std::get<2>(want[k]));
        ASSERT_EQ(t - got[k].sent_at, d.alpha[got[k].client]);
      }
      delivered += int(got.size());
    }
    ASSERT_EQ(delivered, sent);
    ASSERT_EQ(ch.pending(), 0u);
  }
}

TEST(DelayConfig, Validation) {
  EXPECT_THROW(DelayConfig({{1}, {1, 2}}).validate(2), ConfigError);
  EXPECT_THROW(DelayConfig({{-1}, {0}}).validate(1), ConfigError);
  EXPECT_THROW(DelayConfig({{3}, {3}}).validate(1, 5), ConfigError);
  EXPECT_NO_THROW(DelayConfig({{2}, {3}}).validate(1, 5));
  EXPECT_TRUE(DelayConfig::uniform(3, 1, 2).is_uniform());
  EXPECT_FALSE(DelayConfig({{1, 2}, {0, 0}}).is_uniform());
}

TEST(RoundRing, EvictsOldest) {
  RoundRing<int> ring(3);
  for (Round r = 1; r <= 5; ++r) ring.put(r, int(r));
  EXPECT_FALSE(ring.contains(2));
  EXPECT_EQ(ring.at(3), 3);
  EXPECT_EQ(ring.latest_round(), 5);
  EXPECT_THROW(ring.at(1), InvariantError);
  EXPECT_THROW(ring.put(5, 0), InvariantError);
}
