#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedres/model.hpp"

namespace fedres {

/// Per-client uplink (alpha) and downlink (beta) delays, in rounds.
struct DelayConfig {
  std::vector<int> alpha;
  std::vector<int> beta;

  static DelayConfig uniform(std::size_t clients, int up, int down) {
    return DelayConfig{std::vector<int>(clients, up), std::vector<int>(clients, down)};
  }

  std::size_t clients() const { return alpha.size(); }
  int round_trip(ClientId i) const { return alpha.at(i) + beta.at(i); }
  int max_alpha() const { return alpha.empty() ? 0 : *std::max_element(alpha.begin(), alpha.end()); }
  int max_beta() const { return beta.empty() ? 0 : *std::max_element(beta.begin(), beta.end()); }
  int max_round_trip() const {
    int m = 0;
    for (std::size_t i = 0; i < alpha.size(); ++i) m = std::max(m, round_trip(i));
    return m;
  }
  bool is_uniform() const {
    return std::adjacent_find(alpha.begin(), alpha.end(), std::not_equal_to<>()) == alpha.end() &&
           std::adjacent_find(beta.begin(), beta.end(), std::not_equal_to<>()) == beta.end();
  }

  void validate(std::size_t clients, std::optional<int> max_tau = std::nullopt) const {
    if (alpha.size() != clients || beta.size() != clients) {
      throw ConfigError("delay vectors must have one entry per client");
    }
    for (std::size_t i = 0; i < clients; ++i) {
      if (alpha[i] < 0 || beta[i] < 0) throw ConfigError("delays must be nonnegative");
      if (max_tau && round_trip(i) > *max_tau) {
        throw ConfigError("client " + std::to_string(i) + " round trip exceeds tau");
      }
    }
  }
};

/// Fixed-capacity history keyed by round. Keeps the most recent `capacity`
/// rounds; asking for anything older (or never stored) is an invariant breach.
template <typename T>
class RoundRing {
 public:
  explicit RoundRing(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  void put(Round r, T value) {
    if (!items_.empty() && r <= items_.back().first) {
      throw InvariantError("RoundRing: rounds must be stored in increasing order");
    }
    items_.emplace_back(r, std::move(value));
    while (items_.size() > capacity_) items_.pop_front();
  }

  bool contains(Round r) const { return find(r) != nullptr; }

  const T& at(Round r) const {
    if (const T* v = find(r)) return *v;
    throw InvariantError("RoundRing: no entry for round " + std::to_string(r));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  std::optional<Round> latest_round() const {
    if (items_.empty()) return std::nullopt;
    return items_.back().first;
  }

 private:
  const T* find(Round r) const {
    // rounds are contiguous in practice; fall back to a scan otherwise
    if (items_.empty()) return nullptr;
    const Round first = items_.front().first;
    if (r >= first && static_cast<std::size_t>(r - first) < items_.size() &&
        items_[static_cast<std::size_t>(r - first)].first == r) {
      return &items_[static_cast<std::size_t>(r - first)].second;
    }
    for (const auto& [round, value] : items_) {
      if (round == r) return &value;
    }
    return nullptr;
  }

  std::size_t capacity_;
  std::deque<std::pair<Round, T>> items_;
};

/// Deterministic round-indexed transport between P clients and the server.
///
/// Uplink: a payload sent by client i at round t is delivered at t + alpha_i.
/// Downlink: the server publishes one global snapshot per round; a client
/// fetching at round t sees the snapshot of round max(t - beta_i, 0), where
/// round 0 (and anything earlier) is the initial model.
template <typename Payload>
class DelayedChannel {
 public:
  struct Delivery {
    ClientId client;
    Round sent_at;
    Payload payload;
  };

  DelayedChannel(DelayConfig delays, GlobalParams initial)
      : delays_(std::move(delays)),
        initial_(std::move(initial)),
        snapshots_(static_cast<std::size_t>(delays_.max_alpha() + delays_.max_beta() + 2)),
        uplink_(delays_.clients()),
        fetches_(delays_.clients(), 0) {
    delays_.validate(delays_.clients());
  }

  const DelayConfig& delays() const { return delays_; }
  std::size_t clients() const { return delays_.clients(); }

  void uplink_send(ClientId i, Round t, Payload payload) {
    check_client(i);
    if (t < 1) throw InvariantError("uplink_send: rounds start at 1");
    auto& q = uplink_[i];
    const Round due = t + delays_.alpha[i];
    if (!q.empty() && q.back().deliver_at > due) {
      throw InvariantError("uplink_send: send rounds must not decrease");
    }
    q.push_back(Queued{due, t, std::move(payload)});
  }

  /// Everything due exactly at round t, ascending client id, FIFO per client.
  std::vector<Delivery> uplink_receive(Round t) {
    if (last_receive_ && t <= *last_receive_) {
      throw InvariantError("uplink_receive: round " + std::to_string(t) +
                           " already received or out of order");
    }
    last_receive_ = t;
    std::vector<Delivery> out;
    for (ClientId i = 0; i < uplink_.size(); ++i) {
      auto& q = uplink_[i];
      while (!q.empty() && q.front().deliver_at <= t) {
        if (q.front().deliver_at < t) {
          throw InvariantError("uplink_receive: payload due at round " +
                               std::to_string(q.front().deliver_at) + " was never collected");
        }
        out.push_back(Delivery{i, q.front().sent_at, std::move(q.front().payload)});
        q.pop_front();
      }
    }
    return out;
  }

  std::size_t pending() const {
    std::size_t n = 0;
    for (const auto& q : uplink_) n += q.size();
    return n;
  }

  void publish_global(Round t, GlobalParams wg) { snapshots_.put(t, std::move(wg)); }

  GlobalParams fetch_global(ClientId i, Round t) {
    check_client(i);
    ++fetches_[i];
    return snapshot(t - delays_.beta[i]);
  }

  /// Snapshot for round r without counting a fetch; r <= 0 is the initial model.
  const GlobalParams& snapshot(Round r) const {
    if (r <= 0) return initial_;
    if (!snapshots_.contains(r)) {
      throw InvariantError("fetch_global: no snapshot published for round " + std::to_string(r));
    }
    return snapshots_.at(r);
  }

  std::size_t fetch_count(ClientId i) const { return fetches_.at(i); }

 private:
  struct Queued {
    Round deliver_at;
    Round sent_at;
    Payload payload;
  };

  void check_client(ClientId i) const {
    if (i >= uplink_.size()) throw InvariantError("unknown client " + std::to_string(i));
  }

  DelayConfig delays_;
  GlobalParams initial_;
  RoundRing<GlobalParams> snapshots_;
  std::vector<std::deque<Queued>> uplink_;
  std::vector<std::size_t> fetches_;
  std::optional<Round> last_receive_;
};

}  // namespace fedres
