#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fedres/model.hpp"
#include "fedres/rng.hpp"

namespace fedres {

/// Binary task of one client: merged class C0 (y = +1) against one original class (y = -1).
struct ClientTask {
  int negative_class = 0;
};

/// Per-client sample streams plus the global/local feature split.
struct FederatedDataset {
  std::size_t global_dim = 0;
  std::vector<std::size_t> local_dims;
  std::vector<std::vector<Sample>> train;
  std::vector<std::vector<Sample>> test;

  // Populated by the partitioner; empty for synthetic data.
  std::vector<std::size_t> global_features;
  std::vector<std::size_t> local_features;
  std::vector<ClientTask> tasks;
  std::vector<int> merged_classes;
  std::vector<std::vector<std::size_t>> train_lines;  // source line numbers
  std::vector<std::vector<std::size_t>> test_lines;
  std::size_t per_label = 0;

  std::size_t clients() const { return train.size(); }

  void validate() const {
    if (train.empty()) throw ConfigError("dataset has no clients");
    if (local_dims.size() != train.size()) throw ConfigError("local_dims must have one entry per client");
    if (!test.empty() && test.size() != train.size()) throw ConfigError("test sets must match clients");
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train[i].empty()) throw ConfigError("client " + std::to_string(i) + " has no training data");
      auto check = [&](const Sample& s) {
        if (s.x_global.size() != global_dim || s.x_local.size() != local_dims[i]) {
          throw ConfigError("client " + std::to_string(i) + " sample has wrong feature dimensions");
        }
      };
      for (const auto& s : train[i]) check(s);
      if (!test.empty()) {
        for (const auto& s : test[i]) check(s);
      }
    }
  }
};

/// Round-indexed view of a client's training data. Epoch 0 replays the stored
/// order; each later epoch uses a fresh seeded permutation.
class SampleStream {
 public:
  SampleStream(const FederatedDataset& data, std::uint64_t seed) : data_(&data), seed_(seed) {}

  std::size_t clients() const { return data_->clients(); }
  const FederatedDataset& dataset() const { return *data_; }

  const Sample& at(ClientId i, Round t) const {
    if (t < 1) throw InvariantError("SampleStream: rounds start at 1");
    const auto& pool = data_->train.at(i);
    const auto n = static_cast<std::uint64_t>(pool.size());
    const auto idx = static_cast<std::uint64_t>(t - 1);
    const std::uint64_t epoch = idx / n;
    const std::uint64_t pos = idx % n;
    if (epoch == 0) return pool[pos];
    return pool[permutation(i, epoch)[pos]];
  }

 private:
  const std::vector<std::size_t>& permutation(ClientId i, std::uint64_t epoch) const {
    auto key = std::make_pair(i, epoch);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<std::size_t> perm(data_->train[i].size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto gen = substream(seed_, "stream", i, epoch);
    std::shuffle(perm.begin(), perm.end(), gen);
    return cache_.emplace(key, std::move(perm)).first->second;
  }

  const FederatedDataset* data_;
  std::uint64_t seed_;
  mutable std::map<std::pair<ClientId, std::uint64_t>, std::vector<std::size_t>> cache_;
};

/// One record per (round, client).
struct RoundTrace {
  Round round = 0;
  ClientId client = 0;
  double loss = 0.0;
  double prediction = 0.0;
  double label = 0.0;
  int action = -1;      // bandit mode only
  double reward = 0.0;  // bandit mode only
};

/// Which pair a gradient was taken at: (round of the global snapshot, round of the local model).
struct GradientTag {
  ClientId client = 0;
  Round global_round = 0;
  Round local_round = 0;
  bool on_server = false;
};

struct RunResult {
  std::vector<RoundTrace> trace;             // ordered by round, then client
  std::vector<std::vector<Sample>> observed;  // per client, in round order
  std::vector<ModelPair> final_pairs;         // last prediction pair per client
  GlobalParams final_global;                  // server model after the last round
  std::vector<std::size_t> fetches;           // downlink fetches per client
  std::vector<GradientTag> provenance;        // filled when requested

  double mean_loss() const {
    if (trace.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : trace) s += r.loss;
    return s / static_cast<double>(trace.size());
  }

  /// Mean loss over records with round > from_round.
  double mean_loss_after(Round from_round) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : trace) {
      if (r.round > from_round) {
        s += r.loss;
        ++n;
      }
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
  }
};

inline std::vector<Vector> zero_locals(const FederatedDataset& data) {
  std::vector<Vector> out;
  for (auto d : data.local_dims) out.emplace_back(d, 0.0);
  return out;
}

}  // namespace fedres
