#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fedres/bandit.hpp"
#include "fedres/baselines.hpp"
#include "fedres/datagen.hpp"
#include "fedres/erm.hpp"
#include "fedres/io.hpp"
#include "fedres/minibatch.hpp"
#include "fedres/regret.hpp"

namespace fedres {

enum class Algo {
  independent,
  central,
  fedres_sgd,
  fedres_erm,
  fictitious,
  fedres_sgd_misaligned,
  fedres_sgd_asymmetric,
};

inline const std::vector<std::pair<Algo, std::string>>& algo_names() {
  static const std::vector<std::pair<Algo, std::string>> names = {
      {Algo::independent, "independent"},
      {Algo::central, "central"},
      {Algo::fedres_sgd, "fedres-sgd"},
      {Algo::fedres_erm, "fedres-erm"},
      {Algo::fictitious, "fictitious"},
      {Algo::fedres_sgd_misaligned, "fedres-sgd-misaligned"},
      {Algo::fedres_sgd_asymmetric, "fedres-sgd-asymmetric"},
  };
  return names;
}

inline std::string to_string(Algo a) {
  for (const auto& [k, v] : algo_names()) {
    if (k == a) return v;
  }
  return "?";
}

inline Algo parse_algo(const std::string& s) {
  for (const auto& [k, v] : algo_names()) {
    if (v == s) return k;
  }
  throw ConfigError("unknown algorithm '" + s + "'");
}

enum class DataSource { libsvm, example2 };

struct ExperimentConfig {
  Algo algo = Algo::fedres_sgd;
  std::size_t clients = 10;
  Round rounds = 500;
  std::vector<int> delay_up{0};    // one value for all clients, or one per client
  std::vector<int> delay_down{0};
  std::size_t batch = 1;
  std::optional<double> eta;        // default 0.5 / sqrt(T)
  std::optional<double> eta_local;  // default: same as eta
  double radius = 100.0;
  std::size_t rollouts = 50;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool with_regret = true;

  DataSource source = DataSource::example2;
  std::string data_path;  // LIBSVM corpus, optionally gzipped
  std::size_t n0 = 30;
  double holdout = 0.25;

  // synthetic similar/dissimilar tasks
  std::size_t dim = 4;
  double v_norm = 1.0;       // client-specific part, +v / -v
  double shared_norm = 0.0;  // part common to all clients
  double noise = 0.0;
  std::size_t test_size = 200;

  DelayConfig delays() const {
    auto expand = [&](const std::vector<int>& v, const char* name) {
      if (v.size() == 1) return std::vector<int>(clients, v.front());
      if (v.size() != clients) {
        throw ConfigError(std::string(name) + " needs 1 or " + std::to_string(clients) + " values");
      }
      return v;
    };
    return DelayConfig{expand(delay_up, "delay-up"), expand(delay_down, "delay-down")};
  }

  HyperParams hyper() const {
    const double e = eta.value_or(0.5 / std::sqrt(static_cast<double>(rounds)));
    return HyperParams{radius, e, {eta_local.value_or(e)}};
  }

  void validate() const {
    if (clients < 1) throw ConfigError("clients must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (rounds % static_cast<Round>(batch) != 0) throw ConfigError("batch must divide rounds");
    if (rollouts < 1) throw ConfigError("rollouts must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    delays().validate(clients);
    hyper().validate(clients);
    const bool erm = algo == Algo::fedres_erm || algo == Algo::fictitious;
    if (erm && batch != 1) throw ConfigError(to_string(algo) + " does not support mini-batching");
    if (erm && !delays().is_uniform()) throw ConfigError(to_string(algo) + " requires uniform delays");
    if (source == DataSource::libsvm && data_path.empty()) throw ConfigError("libsvm source needs a data path");
    if (source == DataSource::example2) {
      if (clients % 2 != 0) throw ConfigError("synthetic tasks need an even number of clients");
      if (dim < 1) throw ConfigError("dim must be >= 1");
      if (v_norm < 0.0 || shared_norm < 0.0 || noise < 0.0) throw ConfigError("norms and noise must be >= 0");
    }
  }
};

struct CsvRow {
  std::size_t rollout = 0;
  std::string algo;
  std::size_t clients = 0;
  int delay_up = 0;
  int delay_down = 0;
  std::size_t batch = 1;
  Round rounds = 0;
  double axis_value = 0.0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double avg_regret = 0.0;
};

inline const char* csv_header() {
  return "rollout,algo,clients,delay_up,delay_down,batch,rounds,axis_value,train_loss,test_accuracy,avg_regret";
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string to_csv_line(const CsvRow& r) {
  return std::to_string(r.rollout) + ',' + r.algo + ',' + std::to_string(r.clients) + ',' +
         std::to_string(r.delay_up) + ',' + std::to_string(r.delay_down) + ',' + std::to_string(r.batch) + ',' +
         std::to_string(r.rounds) + ',' + format_number(r.axis_value) + ',' + format_number(r.train_loss) + ',' +
         format_number(r.test_accuracy) + ',' + format_number(r.avg_regret);
}

inline std::string to_csv(const std::vector<CsvRow>& rows) {
  std::string out = csv_header();
  out += '\n';
  for (const auto& r : rows) {
    out += to_csv_line(r);
    out += '\n';
  }
  return out;
}

/// Runs job(0..n-1) on up to `threads` workers and returns results by index.
template <class T>
std::vector<T> parallel_map(std::size_t n, std::size_t threads, const std::function<T(std::size_t)>& job) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        slots[k] = job(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t w = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(n, 1));
  if (w == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < w; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    out.push_back(std::move(*slots[k]));
  }
  return out;
}

/// Synthetic dataset of the config: u_g = shared_norm * (+1,-1,...)/sqrt(d),
/// v = v_norm * (1,...,1)/sqrt(d).
inline FederatedDataset synthetic_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  Vector v(cfg.dim), ug(cfg.dim);
  for (std::size_t k = 0; k < cfg.dim; ++k) {
    v[k] = cfg.v_norm * s;
    ug[k] = cfg.shared_norm * s * (k % 2 == 0 ? 1.0 : -1.0);
  }
  return gen_example2(cfg.clients, v, cfg.noise, cfg.rounds, seed, ug, cfg.test_size);
}

/// Fraction of test samples whose label sign the final pair predicts.
inline double test_accuracy(const FederatedDataset& data, const std::vector<ModelPair>& pairs) {
  std::size_t hit = 0, n = 0;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    for (const auto& s : data.test[i]) {
      const double p = predict_joint(pairs.at(i).global, pairs.at(i).local, s);
      hit += (p > 0.0) == (s.y > 0.0) ? 1 : 0;
      ++n;
    }
  }
  return n == 0 ? std::nan("") : static_cast<double>(hit) / static_cast<double>(n);
}

struct RolloutOutcome {
  RunResult run;
  FederatedDataset data;  // the dataset in the global/local layout
};

/// One learner on one dataset with the config's delays and step sizes.
inline RunResult run_algo(const ExperimentConfig& cfg, const FederatedDataset& data, std::uint64_t seed) {
  const DelayConfig delays = cfg.delays();
  const HyperParams hyper = cfg.hyper();
  auto sgd = [&](const FederatedDataset& d, const DelayConfig& dl, SgdVariant variant) {
    return run_batched(d, dl, hyper, cfg.rounds, cfg.batch, seed, variant);
  };
  switch (cfg.algo) {
    case Algo::independent:
      return sgd(independent_view(data), DelayConfig::uniform(data.clients(), 0, 0), SgdVariant::aligned);
    case Algo::central: return sgd(central_view(data), delays, SgdVariant::aligned);
    case Algo::fedres_sgd: return sgd(data, delays, SgdVariant::aligned);
    case Algo::fedres_sgd_misaligned: return sgd(data, delays, SgdVariant::misaligned);
    case Algo::fedres_sgd_asymmetric: return sgd(data, delays, SgdVariant::asymmetric);
    case Algo::fedres_erm: return run_fedres_erm(data, delays, hyper, cfg.rounds, seed);
    case Algo::fictitious: return run_fictitious_play(data, delays, hyper, cfg.rounds, seed);
  }
  throw ConfigError("unknown algorithm");
}

inline FederatedDataset view_for(Algo a, const FederatedDataset& data) {
  if (a == Algo::independent) return independent_view(data);
  if (a == Algo::central) return central_view(data);
  return data;
}

/// One seeded rollout. Regret is measured against the joint global+local
/// comparator on the original feature split, whatever layout the learner used.
inline CsvRow run_rollout(const ExperimentConfig& cfg, std::size_t rollout, const MulticlassCorpus* corpus,
                          double axis_value = 0.0) {
  const std::uint64_t seed = cfg.seed + rollout;
  const FederatedDataset data = cfg.source == DataSource::libsvm
                                    ? partition_federated(*corpus, cfg.clients, cfg.n0, seed, cfg.holdout)
                                    : synthetic_dataset(cfg, seed);
  const RunResult run = run_algo(cfg, data, seed);

  CsvRow row;
  row.rollout = rollout;
  row.algo = to_string(cfg.algo);
  row.clients = cfg.clients;
  const DelayConfig d = cfg.delays();
  row.delay_up = d.max_alpha();
  row.delay_down = d.max_beta();
  row.batch = cfg.batch;
  row.rounds = cfg.rounds;
  row.axis_value = axis_value;
  row.train_loss = run.mean_loss();
  row.test_accuracy = test_accuracy(view_for(cfg.algo, data), run.final_pairs);
  row.avg_regret = std::nan("");
  if (cfg.with_regret) {
    SampleStream stream(data, seed);
    std::vector<std::vector<Sample>> observed(data.clients());
    for (ClientId i = 0; i < data.clients(); ++i) {
      for (Round t = 1; t <= cfg.rounds; ++t) observed[i].push_back(stream.at(i, t));
    }
    row.avg_regret = compute_regret(run.trace, observed, data.global_dim, data.local_dims, cfg.radius);
  }
  return row;
}

inline std::vector<CsvRow> run_experiment(const ExperimentConfig& cfg, const MulticlassCorpus* corpus = nullptr,
                                          double axis_value = 0.0) {
  cfg.validate();
  std::optional<MulticlassCorpus> loaded;
  if (cfg.source == DataSource::libsvm && !corpus) {
    loaded = load_libsvm(cfg.data_path);
    corpus = &*loaded;
  }
  return parallel_map<CsvRow>(cfg.rollouts, cfg.threads, [&](std::size_t r) {
    return run_rollout(cfg, r, corpus, axis_value);
  });
}

enum class SweepAxis { clients, delay, rounds, batch };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "clients") return SweepAxis::clients;
  if (s == "delay") return SweepAxis::delay;
  if (s == "rounds") return SweepAxis::rounds;
  if (s == "batch") return SweepAxis::batch;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

/// The config with one axis set. A delay value is the round trip tau, split
/// as uplink ceil(tau/2) and downlink floor(tau/2).
inline ExperimentConfig with_axis(ExperimentConfig cfg, SweepAxis axis, long value) {
  if (value < 0) throw ConfigError("sweep values must be nonnegative");
  switch (axis) {
    case SweepAxis::clients: cfg.clients = static_cast<std::size_t>(value); break;
    case SweepAxis::delay:
      cfg.delay_up = {static_cast<int>((value + 1) / 2)};
      cfg.delay_down = {static_cast<int>(value / 2)};
      break;
    case SweepAxis::rounds: cfg.rounds = value; break;
    case SweepAxis::batch: cfg.batch = static_cast<std::size_t>(value); break;
  }
  return cfg;
}

inline std::vector<CsvRow> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<long>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::optional<MulticlassCorpus> corpus;
  if (cfg.source == DataSource::libsvm) corpus = load_libsvm(cfg.data_path);
  std::vector<CsvRow> rows;
  for (long v : values) {
    const ExperimentConfig c = with_axis(cfg, axis, v);
    auto part = run_experiment(c, corpus ? &*corpus : nullptr, static_cast<double>(v));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

/// Single-client two-dimensional stream where frozen-counterpart ERM stalls.
struct AppendixCRow {
  std::size_t rollout = 0;
  std::string algo;
  double mean_loss = 0.0;
  double distance = 0.0;  // |w^g_T - (0, 1)|
};

struct AppendixCConfig {
  Round rounds = 20000;
  std::size_t rollouts = 50;
  std::uint64_t seed = 1;
  double eta = 1.0;
  double radius = 100.0;
  std::size_t threads = 1;
};

inline std::vector<AppendixCRow> run_appendix_c(const AppendixCConfig& cfg) {
  if (cfg.rollouts < 1) throw ConfigError("rollouts must be >= 1");
  const HyperParams hyper{cfg.radius, cfg.eta, {cfg.eta}};
  hyper.validate(1);
  const DelayConfig none = DelayConfig::uniform(1, 0, 0);
  const Vector init{1.0, 0.0};
  const std::vector<Vector> init_local{{1.0, 0.0}};
  const Vector target{0.0, 1.0};
  auto per_rollout = parallel_map<std::vector<AppendixCRow>>(cfg.rollouts, cfg.threads, [&](std::size_t r) {
    const std::uint64_t seed = cfg.seed + r;
    const FederatedDataset data = gen_appendix_c(cfg.rounds, seed);
    std::vector<AppendixCRow> rows;
    auto add = [&](const char* name, const RunResult& run) {
      rows.push_back(AppendixCRow{r, name, run.mean_loss(), distance(run.final_pairs.at(0).global.w, target)});
    };
    add("fedres-sgd", run_fedres_sgd(data, none, hyper, cfg.rounds, seed, SgdVariant::aligned, init, init_local));
    add("fedres-erm", run_fedres_erm(data, none, hyper, cfg.rounds, seed, init, init_local));
    add("fictitious", run_fictitious_play(data, none, hyper, cfg.rounds, seed, init, init_local));
    return rows;
  });
  std::vector<AppendixCRow> out;
  for (auto& v : per_rollout) out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline std::string to_csv(const std::vector<AppendixCRow>& rows) {
  std::string out = "rollout,algo,mean_loss,distance\n";
  for (const auto& r : rows) {
    out += std::to_string(r.rollout) + ',' + r.algo + ',' + format_number(r.mean_loss) + ',' +
           format_number(r.distance) + '\n';
  }
  return out;
}

struct BanditConfig {
  std::size_t actions = 4;
  std::size_t clients = 5;
  std::size_t global_dim = 3;
  std::size_t local_dim = 3;
  double noise = 0.1;
  Round rounds = 5000;
  Round period = 10;
  int delay_up = 0;
  int delay_down = 0;
  std::optional<double> eta;  // default 0.5 / sqrt(number of exploration rounds)
  double radius = 100.0;
  std::size_t rollouts = 20;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  HyperParams hyper() const {
    const double explored = std::max<double>(1.0, static_cast<double>(rounds / period));
    const double e = eta.value_or(0.5 / std::sqrt(explored));
    return HyperParams{radius, e, {e}};
  }
};

struct BanditRow {
  std::size_t rollout = 0;
  std::string policy;
  double regret = 0.0;
  std::size_t exploration_rounds = 0;
};

inline std::vector<BanditRow> run_bandit_experiment(const BanditConfig& cfg) {
  if (cfg.rollouts < 1) throw ConfigError("rollouts must be >= 1");
  if (cfg.period < 1) throw ConfigError("period must be >= 1");
  const DelayConfig delays = DelayConfig::uniform(cfg.clients, cfg.delay_up, cfg.delay_down);
  auto per_rollout = parallel_map<std::vector<BanditRow>>(cfg.rollouts, cfg.threads, [&](std::size_t r) {
    const std::uint64_t seed = cfg.seed + r;
    const BanditEnv env =
        BanditEnv::linear(cfg.actions, cfg.clients, cfg.global_dim, cfg.local_dim, cfg.noise, seed);
    std::vector<BanditRow> rows;
    for (auto policy : {BanditPolicy::epsilon_greedy, BanditPolicy::uniform}) {
      const BanditRun run = run_bandit(env, cfg.hyper(), delays, cfg.rounds, cfg.period, seed, policy);
      rows.push_back(BanditRow{r, policy == BanditPolicy::uniform ? "uniform" : "epsilon-greedy", run.regret,
                               run.exploration_rounds});
    }
    return rows;
  });
  std::vector<BanditRow> out;
  for (auto& v : per_rollout) out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline std::string to_csv(const std::vector<BanditRow>& rows) {
  std::string out = "rollout,policy,regret,exploration_rounds\n";
  for (const auto& r : rows) {
    out += std::to_string(r.rollout) + ',' + r.policy + ',' + format_number(r.regret) + ',' +
           std::to_string(r.exploration_rounds) + '\n';
  }
  return out;
}

}  // namespace fedres
