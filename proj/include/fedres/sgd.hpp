#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedres/data.hpp"
#include "fedres/delay.hpp"
#include "fedres/model.hpp"

namespace fedres {

/// Update rule family. `aligned` is the residual-learning rule; the other two
/// are the naive rules it replaces, kept for A/B comparison only.
///  - misaligned: client steps on its own fresh gradient, server evaluates
///    the incoming residual at its current global model.
///  - asymmetric: client as in misaligned, server evaluates at the snapshot
///    the client actually used (round trip delayed).
enum class SgdVariant { aligned, misaligned, asymmetric };

inline const char* to_string(SgdVariant v) {
  switch (v) {
    case SgdVariant::aligned: return "aligned";
    case SgdVariant::misaligned: return "misaligned";
    case SgdVariant::asymmetric: return "asymmetric";
  }
  return "?";
}

template <ResidualLoss Loss = SquaredLoss>
Vector mean_grad_local(const GlobalParams& wg, const LocalParams& wl, std::span<const Sample> batch) {
  if (batch.empty()) throw InvariantError("mean_grad_local: empty batch");
  Vector g = grad_local<Loss>(wg, wl, batch[0]);
  for (std::size_t k = 1; k < batch.size(); ++k) add_to(g, grad_local<Loss>(wg, wl, batch[k]));
  if (batch.size() > 1) {
    for (double& v : g) v /= static_cast<double>(batch.size());
  }
  return g;
}

template <ResidualLoss Loss = SquaredLoss>
Vector mean_grad_global(const GlobalParams& wg, std::span<const ResidualMessage> batch) {
  if (batch.empty()) throw InvariantError("mean_grad_global: empty batch");
  Vector g = grad_global_from_message<Loss>(wg, batch[0]);
  for (std::size_t k = 1; k < batch.size(); ++k) add_to(g, grad_global_from_message<Loss>(wg, batch[k]));
  if (batch.size() > 1) {
    for (double& v : g) v /= static_cast<double>(batch.size());
  }
  return g;
}

/// Client-side state. Histories hold the last tau_i + 2 rounds, enough to
/// evaluate the gradient of round t - 1 - tau_i at its own prediction pair.
struct SgdClientState {
  SgdClientState(LocalParams initial, int uplink_delay, int downlink_delay)
      : wl(std::move(initial)),
        alpha(uplink_delay),
        beta(downlink_delay),
        sample_history(static_cast<std::size_t>(alpha + beta + 2)),
        global_history(static_cast<std::size_t>(alpha + beta + 2)),
        local_history(static_cast<std::size_t>(alpha + beta + 2)) {}

  LocalParams wl;
  int alpha;
  int beta;
  RoundRing<std::vector<Sample>> sample_history;
  RoundRing<GlobalParams> global_history;  // the snapshot fetched at each round
  RoundRing<LocalParams> local_history;
  std::optional<ModelPair> current;
  Round prepared_round = 0;
};

/// Fetch-and-update half of a client round. Returns the pair the client
/// predicts with at round t.
///
/// With the aligned rule the local step applies the gradient of round
/// s = t - 1 - tau_i, evaluated at that round's own pair. The extra one-round
/// offset is the sample's observation: a sample seen at the end of round s can
/// first influence the model used at round s + 1.
template <ResidualLoss Loss = SquaredLoss>
ModelPair sgd_client_prepare(SgdClientState& st, Round t, GlobalParams fetched, double eta,
                             double radius, SgdVariant variant = SgdVariant::aligned,
                             std::vector<GradientTag>* tags = nullptr) {
  if (t <= st.prepared_round) throw InvariantError("sgd_client_prepare: rounds must increase");
  const Round lag = variant == SgdVariant::aligned ? 1 + st.alpha + st.beta : 1;
  const Round s = t - lag;
  if (s >= 1) {
    const auto& wg_s = st.global_history.at(s);
    const auto& wl_s = st.local_history.at(s);
    const auto& batch = st.sample_history.at(s);
    const Vector g = mean_grad_local<Loss>(wg_s, wl_s, batch);
    st.wl.w = project_ball(step(st.wl.w, eta, g), radius);
    if (tags) tags->push_back(GradientTag{st.wl.client_id, s - st.beta, s, false});
  }
  st.current = ModelPair{std::move(fetched), st.wl};
  st.prepared_round = t;
  return *st.current;
}

/// Observe-and-send half: archives round t and returns the residual messages.
inline std::vector<ResidualMessage> sgd_client_commit(SgdClientState& st, Round t,
                                                      std::vector<Sample> batch) {
  if (!st.current || st.prepared_round != t) {
    throw InvariantError("sgd_client_commit: round " + std::to_string(t) + " was not prepared");
  }
  std::vector<ResidualMessage> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(message_of(st.current->local, s, t));
  st.global_history.put(t, st.current->global);
  st.local_history.put(t, st.current->local);
  st.sample_history.put(t, std::move(batch));
  return out;
}

struct ClientRoundOutput {
  ModelPair pair;
  std::vector<ResidualMessage> messages;
};

template <ResidualLoss Loss = SquaredLoss>
ClientRoundOutput sgd_client_round(SgdClientState& st, Round t, GlobalParams fetched,
                                   std::vector<Sample> batch, double eta, double radius,
                                   SgdVariant variant = SgdVariant::aligned,
                                   std::vector<GradientTag>* tags = nullptr) {
  ModelPair pair = sgd_client_prepare<Loss>(st, t, std::move(fetched), eta, radius, variant, tags);
  auto messages = sgd_client_commit(st, t, std::move(batch));
  return ClientRoundOutput{std::move(pair), std::move(messages)};
}

/// Server-side state. `history` maps round r to the model in effect at r.
struct SgdServerState {
  SgdServerState(GlobalParams init, DelayConfig d)
      : wg(init),
        initial(std::move(init)),
        delays(std::move(d)),
        history(static_cast<std::size_t>(delays.max_round_trip() + 2)) {
    history.put(1, wg);
  }

  const GlobalParams& snapshot(Round r) const { return r <= 0 ? initial : history.at(r); }

  GlobalParams wg;
  GlobalParams initial;
  DelayConfig delays;
  RoundRing<GlobalParams> history;
};

/// Everything one client sent at one round.
struct ClientBatch {
  ClientId client = 0;
  Round sent_at = 0;
  std::vector<ResidualMessage> messages;
};

/// One aggregated projected step: w <- P_D(w - eta * sum_i grad_i), where
/// grad_i is client i's (batch-mean) global gradient evaluated at the snapshot
/// that client predicted with. Produces the model in effect at round t + 1.
template <ResidualLoss Loss = SquaredLoss>
GlobalParams sgd_server_round(SgdServerState& st, Round t, std::span<const ClientBatch> arrived,
                              double eta, double radius, SgdVariant variant = SgdVariant::aligned,
                              std::vector<GradientTag>* tags = nullptr) {
  if (st.history.latest_round() != t) {
    throw InvariantError("sgd_server_round: expected round " +
                         std::to_string(st.history.latest_round().value_or(0)) + ", got " +
                         std::to_string(t));
  }
  std::optional<Vector> sum;
  for (const auto& cb : arrived) {
    if (cb.client >= st.delays.clients()) {
      throw InvariantError("sgd_server_round: unknown client " + std::to_string(cb.client));
    }
    const int alpha = st.delays.alpha[cb.client];
    const int beta = st.delays.beta[cb.client];
    if (cb.sent_at != t - alpha) {
      throw InvariantError("sgd_server_round: message from client " + std::to_string(cb.client) +
                           " sent at " + std::to_string(cb.sent_at) + " arrived at " +
                           std::to_string(t));
    }
    for (const auto& m : cb.messages) {
      if (m.client_id != cb.client || m.sent_at != cb.sent_at) {
        throw InvariantError("sgd_server_round: message header does not match its batch");
      }
    }
    const Round eval_round = variant == SgdVariant::misaligned ? t : cb.sent_at - beta;
    const Vector g = mean_grad_global<Loss>(st.snapshot(eval_round), cb.messages);
    if (tags) tags->push_back(GradientTag{cb.client, eval_round, cb.sent_at, true});
    if (!sum) {
      sum = g;
    } else {
      add_to(*sum, g);
    }
  }
  if (sum) st.wg.w = project_ball(step(st.wg.w, eta, *sum), radius);
  st.history.put(t + 1, st.wg);
  return st.wg;
}

/// Clients, server and channel wired together; drive it one phase at a time.
template <ResidualLoss Loss = SquaredLoss>
class FedResSgd {
 public:
  FedResSgd(std::size_t global_dim, const std::vector<std::size_t>& local_dims, HyperParams hyper,
            DelayConfig delays, SgdVariant variant = SgdVariant::aligned,
            std::optional<Vector> init_global = std::nullopt,
            std::optional<std::vector<Vector>> init_local = std::nullopt,
            bool record_provenance = false)
      : hyper_(std::move(hyper)),
        variant_(variant),
        record_(record_provenance),
        server_(GlobalParams{init_global.value_or(Vector(global_dim, 0.0))}, delays),
        channel_(delays, server_.initial) {
    const std::size_t p = local_dims.size();
    hyper_.validate(p);
    delays.validate(p);
    if (server_.initial.w.size() != global_dim) throw ConfigError("initial global model has wrong dimension");
    if (init_local && init_local->size() != p) throw ConfigError("initial local models must match clients");
    for (ClientId i = 0; i < p; ++i) {
      Vector w = init_local ? (*init_local)[i] : Vector(local_dims[i], 0.0);
      if (w.size() != local_dims[i]) throw ConfigError("initial local model has wrong dimension");
      clients_.emplace_back(LocalParams{std::move(w), i}, delays.alpha[i], delays.beta[i]);
    }
    channel_.publish_global(1, server_.wg);
  }

  std::size_t clients() const { return clients_.size(); }

  ModelPair begin_client_round(ClientId i, Round t) {
    GlobalParams fetched = channel_.fetch_global(i, t);
    return sgd_client_prepare<Loss>(clients_.at(i), t, std::move(fetched), hyper_.eta_for(i),
                                    hyper_.radius, variant_, record_ ? &tags_ : nullptr);
  }

  void end_client_round(ClientId i, Round t, std::vector<Sample> batch) {
    auto messages = sgd_client_commit(clients_.at(i), t, std::move(batch));
    channel_.uplink_send(i, t, std::move(messages));
  }

  void server_round(Round t) {
    std::vector<ClientBatch> arrived;
    for (auto& d : channel_.uplink_receive(t)) {
      arrived.push_back(ClientBatch{d.client, d.sent_at, std::move(d.payload)});
    }
    GlobalParams next = sgd_server_round<Loss>(server_, t, arrived, hyper_.eta_global,
                                               hyper_.radius, variant_, record_ ? &tags_ : nullptr);
    channel_.publish_global(t + 1, std::move(next));
  }

  /// Pair the client most recently predicted with (initial models before round 1).
  ModelPair current_pair(ClientId i) const {
    const auto& c = clients_.at(i);
    if (c.current) return *c.current;
    return ModelPair{server_.initial, c.wl};
  }

  const GlobalParams& server_model() const { return server_.wg; }
  const LocalParams& local_model(ClientId i) const { return clients_.at(i).wl; }
  std::size_t fetch_count(ClientId i) const { return channel_.fetch_count(i); }
  const std::vector<GradientTag>& provenance() const { return tags_; }

 private:
  HyperParams hyper_;
  SgdVariant variant_;
  bool record_;
  SgdServerState server_;
  DelayedChannel<std::vector<ResidualMessage>> channel_;
  std::vector<SgdClientState> clients_;
  std::vector<GradientTag> tags_;
};

struct SgdRunConfig {
  HyperParams hyper;
  DelayConfig delays;  // in sample rounds
  Round rounds = 1;
  std::size_t batch = 1;
  SgdVariant variant = SgdVariant::aligned;
  std::optional<Vector> init_global;
  std::optional<std::vector<Vector>> init_local;
  bool record_provenance = false;
};

inline int batch_delay(int delay, std::size_t batch) {
  const int b = static_cast<int>(batch);
  return (delay + b - 1) / b;
}

/// Runs the composed client/server loop over T sample rounds in T/b batch
/// rounds. Each batch is predicted with the pair fetched at the batch start;
/// the trace still has one record per sample round.
template <ResidualLoss Loss = SquaredLoss>
RunResult run_sgd_engine(const SampleStream& stream, const SgdRunConfig& cfg) {
  const auto& data = stream.dataset();
  data.validate();
  const std::size_t p = data.clients();
  if (cfg.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (cfg.batch < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.rounds % static_cast<Round>(cfg.batch) != 0) {
    throw ConfigError("batch size " + std::to_string(cfg.batch) + " does not divide rounds " +
                      std::to_string(cfg.rounds));
  }
  cfg.delays.validate(p);
  DelayConfig batched = cfg.delays;
  for (std::size_t i = 0; i < p; ++i) {
    batched.alpha[i] = batch_delay(cfg.delays.alpha[i], cfg.batch);
    batched.beta[i] = batch_delay(cfg.delays.beta[i], cfg.batch);
  }

  FedResSgd<Loss> sys(data.global_dim, data.local_dims, cfg.hyper, batched, cfg.variant,
                      cfg.init_global, cfg.init_local, cfg.record_provenance);
  RunResult out;
  out.observed.resize(p);
  out.trace.reserve(static_cast<std::size_t>(cfg.rounds) * p);
  const Round batches = cfg.rounds / static_cast<Round>(cfg.batch);
  const auto b = static_cast<Round>(cfg.batch);

  std::vector<std::vector<RoundTrace>> pending(p);
  for (Round n = 1; n <= batches; ++n) {
    for (ClientId i = 0; i < p; ++i) {
      const ModelPair pair = sys.begin_client_round(i, n);
      std::vector<Sample> batch;
      batch.reserve(cfg.batch);
      pending[i].clear();
      for (Round k = 0; k < b; ++k) {
        const Round t = (n - 1) * b + k + 1;
        const Sample& s = stream.at(i, t);
        const double pred = predict_joint(pair.global, pair.local, s);
        pending[i].push_back(RoundTrace{t, i, Loss::value(s.y, pred), pred, s.y});
        out.observed[i].push_back(s);
        batch.push_back(s);
      }
      sys.end_client_round(i, n, std::move(batch));
    }
    for (Round k = 0; k < b; ++k) {
      for (ClientId i = 0; i < p; ++i) out.trace.push_back(pending[i][static_cast<std::size_t>(k)]);
    }
    sys.server_round(n);
  }

  for (ClientId i = 0; i < p; ++i) {
    out.final_pairs.push_back(sys.current_pair(i));
    out.fetches.push_back(sys.fetch_count(i));
  }
  out.final_global = sys.server_model();
  out.provenance = sys.provenance();
  return out;
}

/// FedRes.SGD over a dataset with per-client delays.
template <ResidualLoss Loss = SquaredLoss>
RunResult run_fedres_sgd(const FederatedDataset& data, const DelayConfig& delays,
                         const HyperParams& hyper, Round rounds, std::uint64_t seed,
                         SgdVariant variant = SgdVariant::aligned,
                         std::optional<Vector> init_global = std::nullopt,
                         std::optional<std::vector<Vector>> init_local = std::nullopt,
                         bool record_provenance = false) {
  SampleStream stream(data, seed);
  SgdRunConfig cfg{hyper, delays, rounds, 1, variant, std::move(init_global), std::move(init_local),
                   record_provenance};
  return run_sgd_engine<Loss>(stream, cfg);
}

}  // namespace fedres
