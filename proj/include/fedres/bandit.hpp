#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fedres/rng.hpp"
#include "fedres/sgd.hpp"

namespace fedres {

/// Per-action (global, local) contexts a client sees in one round.
struct BanditContexts {
  std::vector<Vector> global;
  std::vector<Vector> local;

  std::size_t actions() const { return global.size(); }
};

/// Linear federated bandit: mean reward of action a for client i is
/// clip(w_g* . x_g(a) + w_i* . x_l(a), 0, 1); realized rewards add Gaussian
/// noise and are clipped back into [0, 1].
struct BanditEnv {
  std::size_t actions = 2;
  Vector global_star;
  std::vector<Vector> local_star;  // one per client
  double noise = 0.1;

  std::size_t clients() const { return local_star.size(); }

  void validate() const {
    if (actions < 2) throw ConfigError("bandit: need at least 2 actions");
    if (local_star.empty()) throw ConfigError("bandit: need at least one client");
    if (noise < 0.0) throw ConfigError("bandit: noise must be nonnegative");
  }

  double mean_reward(ClientId i, const Vector& xg, const Vector& xl) const {
    return std::clamp(dot(global_star, xg) + dot(local_star.at(i), xl), 0.0, 1.0);
  }

  template <class Gen>
  BanditContexts draw_contexts(ClientId i, Gen& gen) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BanditContexts c;
    for (std::size_t a = 0; a < actions; ++a) {
      Vector g(global_star.size()), l(local_star.at(i).size());
      for (auto& x : g) x = u(gen);
      for (auto& x : l) x = u(gen);
      c.global.push_back(std::move(g));
      c.local.push_back(std::move(l));
    }
    return c;
  }

  template <class Gen>
  double draw_reward(double mean, Gen& gen) const {
    std::normal_distribution<double> z(0.0, 1.0);
    return std::clamp(mean + noise * z(gen), 0.0, 1.0);
  }

  /// Random nonnegative weights scaled so every client's mean lies in [0, 1]
  /// for contexts in the unit cube (realizable without clipping).
  static BanditEnv linear(std::size_t actions, std::size_t clients, std::size_t global_dim,
                          std::size_t local_dim, double noise, std::uint64_t seed) {
    auto gen = substream(seed, "bandit-env");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BanditEnv env;
    env.actions = actions;
    env.noise = noise;
    env.global_star.resize(global_dim);
    for (auto& w : env.global_star) w = u(gen);
    double worst = 0.0;
    for (std::size_t i = 0; i < clients; ++i) {
      Vector l(local_dim);
      for (auto& w : l) w = u(gen);
      double mass = 0.0;
      for (double w : env.global_star) mass += w;
      for (double w : l) mass += w;
      worst = std::max(worst, mass);
      env.local_star.push_back(std::move(l));
    }
    const double shrink = 1.0 / std::max(worst, 1.0);
    env.global_star = scaled(env.global_star, shrink);
    for (auto& l : env.local_star) l = scaled(l, shrink);
    return env;
  }
};

/// Uniform draw on exploration rounds (t a multiple of B); otherwise the
/// predicted-best action, lowest index on ties. Returns a 0-based index.
template <class Gen>
std::size_t choose_action(const GlobalParams& wg, const LocalParams& wl, const BanditContexts& ctx,
                          Round t, Round period, Gen& gen) {
  if (period < 1) throw ConfigError("choose_action: period B must be >= 1");
  if (ctx.actions() == 0) throw InvariantError("choose_action: empty context set");
  if (t % period == 0) {
    std::uniform_int_distribution<std::size_t> pick(0, ctx.actions() - 1);
    return pick(gen);
  }
  std::size_t best = 0;
  double best_value = dot(wg.w, ctx.global[0]) + dot(wl.w, ctx.local[0]);
  for (std::size_t a = 1; a < ctx.actions(); ++a) {
    const double v = dot(wg.w, ctx.global[a]) + dot(wl.w, ctx.local[a]);
    if (v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

struct BanditLogEntry {
  Round round = 0;
  ClientId client = 0;
  std::size_t action = 0;
  double reward = 0.0;
  BanditContexts contexts;
};

/// (1/PT) sum_t sum_i [max_a f_i*(x(a)) - f_i*(x(a_chosen))]
inline double cb_regret(const std::vector<BanditLogEntry>& log, const BanditEnv& env) {
  if (log.empty()) throw ConfigError("cb_regret: empty log");
  double total = 0.0;
  for (const auto& e : log) {
    if (e.client >= env.clients() || e.contexts.actions() != env.actions || e.action >= env.actions) {
      throw InvariantError("cb_regret: log entry does not match the environment");
    }
    double best = -1.0;
    for (std::size_t a = 0; a < env.actions; ++a) {
      best = std::max(best, env.mean_reward(e.client, e.contexts.global[a], e.contexts.local[a]));
    }
    total += best - env.mean_reward(e.client, e.contexts.global[e.action], e.contexts.local[e.action]);
  }
  return total / static_cast<double>(log.size());
}

/// epsilon-greedy residual learner: every B-th round each client explores
/// uniformly and feeds (x(a), reward) as one FedRes.SGD round; in between it
/// acts greedily on the pair it holds and learns nothing.
class FederatedBandit {
 public:
  FederatedBandit(const BanditEnv& env, HyperParams hyper, DelayConfig delays, Round period)
      : period_(period),
        sys_(env.global_star.size(), local_dims(env), std::move(hyper), std::move(delays)) {
    env.validate();
    if (period < 1) throw ConfigError("bandit: period B must be >= 1");
    for (ClientId i = 0; i < env.clients(); ++i) pairs_.push_back(sys_.current_pair(i));
  }

  Round period() const { return period_; }
  bool is_exploration(Round t) const { return t % period_ == 0; }
  const ModelPair& pair(ClientId i) const { return pairs_.at(i); }
  std::size_t updates() const { return updates_; }
  const FedResSgd<>& learner() const { return sys_; }

  /// Clients fetch and apply their delayed local step for this exploration round.
  void begin_exploration(Round t) {
    require_exploration(t);
    for (ClientId i = 0; i < pairs_.size(); ++i) pairs_[i] = sys_.begin_client_round(i, t / period_);
  }

  /// Feeds the squared loss of the explored action to the learner.
  void bandit_round_update(ClientId i, Round t, const BanditContexts& ctx, std::size_t action,
                           double reward) {
    require_exploration(t);
    Sample s{ctx.global.at(action), ctx.local.at(action), reward};
    sys_.end_client_round(i, t / period_, {std::move(s)});
    ++updates_;
  }

  void end_exploration(Round t) {
    require_exploration(t);
    sys_.server_round(t / period_);
  }

 private:
  static std::vector<std::size_t> local_dims(const BanditEnv& env) {
    std::vector<std::size_t> d;
    for (const auto& l : env.local_star) d.push_back(l.size());
    return d;
  }
  void require_exploration(Round t) const {
    if (!is_exploration(t)) {
      throw InvariantError("bandit: round " + std::to_string(t) + " is not an exploration round");
    }
  }

  Round period_;
  FedResSgd<> sys_;
  std::vector<ModelPair> pairs_;
  std::size_t updates_ = 0;
};

enum class BanditPolicy { epsilon_greedy, uniform };

struct BanditRun {
  std::vector<BanditLogEntry> log;
  std::size_t updates = 0;             // (client, exploration round) updates
  std::size_t exploration_rounds = 0;
  double regret = 0.0;
};

/// Delays are counted in exploration rounds (the learner's own clock).
inline BanditRun run_bandit(const BanditEnv& env, const HyperParams& hyper, const DelayConfig& delays,
                            Round rounds, Round period, std::uint64_t seed,
                            BanditPolicy policy = BanditPolicy::epsilon_greedy) {
  env.validate();
  if (rounds < 1) throw ConfigError("bandit: rounds must be >= 1");
  FederatedBandit learner(env, hyper, delays, period);
  const std::size_t p = env.clients();
  std::vector<std::mt19937_64> ctx_gen, reward_gen, explore_gen;
  for (ClientId i = 0; i < p; ++i) {
    ctx_gen.push_back(substream(seed, "contexts", i));
    reward_gen.push_back(substream(seed, "rewards", i));
    explore_gen.push_back(substream(seed, "explore", i));
  }
  BanditRun out;
  out.log.reserve(static_cast<std::size_t>(rounds) * p);
  for (Round t = 1; t <= rounds; ++t) {
    const bool explore = policy == BanditPolicy::epsilon_greedy && learner.is_exploration(t);
    if (explore) {
      learner.begin_exploration(t);
      ++out.exploration_rounds;
    }
    for (ClientId i = 0; i < p; ++i) {
      BanditContexts ctx = env.draw_contexts(i, ctx_gen[i]);
      const auto& pair = learner.pair(i);
      const std::size_t a = policy == BanditPolicy::uniform
                                ? choose_action(pair.global, pair.local, ctx, 0, 1, explore_gen[i])
                                : choose_action(pair.global, pair.local, ctx, t, period, explore_gen[i]);
      const double r = env.draw_reward(env.mean_reward(i, ctx.global[a], ctx.local[a]), reward_gen[i]);
      if (explore) learner.bandit_round_update(i, t, ctx, a, r);
      out.log.push_back(BanditLogEntry{t, i, a, r, std::move(ctx)});
    }
    if (explore) learner.end_exploration(t);
  }
  out.updates = learner.updates();
  out.regret = cb_regret(out.log, env);
  return out;
}

/// Exploration period min{ (PT / (K^4 S sigma2))^(1/5), T^(1/4) / (K^6 gamma D^4 G^2)^(1/8),
/// T^(1/3) / (K^2 D G)^(1/3) }, S = |w_g*|^2 + sum_i |w_i*|^2.
inline double optimal_exploration_period(int clients, long rounds, int actions, double sq_norm_sum,
                                         double sigma2, double gamma, double radius, double grad_bound) {
  if (clients <= 0 || rounds <= 0 || actions <= 0 || !(sq_norm_sum > 0) || !(sigma2 > 0) ||
      !(gamma > 0) || !(radius > 0) || !(grad_bound > 0)) {
    throw ConfigError("optimal_exploration_period: all inputs must be positive");
  }
  const double p = clients, t = static_cast<double>(rounds), k = actions;
  const double variance_term = std::pow(p * t / (std::pow(k, 4) * sq_norm_sum * sigma2), 0.2);
  const double smooth_term =
      std::pow(t, 0.25) / std::pow(std::pow(k, 6) * gamma * std::pow(radius, 4) * grad_bound * grad_bound, 0.125);
  const double delay_term = std::cbrt(t) / std::cbrt(k * k * radius * grad_bound);
  return std::min({variance_term, smooth_term, delay_term});
}

}  // namespace fedres
