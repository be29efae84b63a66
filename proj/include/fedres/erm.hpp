#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedres/constrained_ls.hpp"
#include "fedres/data.hpp"
#include "fedres/delay.hpp"
#include "fedres/model.hpp"

namespace fedres {

/// How archived samples see the other side's model.
///  - refit: every archived sample is re-evaluated with the newest counterpart
///    model (FedRes.ERM).
///  - frozen: each sample keeps the counterpart model of the round it was
///    observed (fictitious play); only the local residual has to travel.
enum class ErmRule { refit, frozen };

/// Client archive kept as sufficient statistics:
///   gram  = sum x_l x_l^T,  cross = sum x_l x_g^T,
///   label = sum x_l y,      frozen = sum x_l (y - w^g_{s-beta} . x_g).
/// Refit targets are label - cross * w^g, so no pass over the archive is needed.
struct ErmClientState {
  ErmClientState(LocalParams init, std::size_t global_dim, ErmRule r)
      : wl(std::move(init)),
        rule(r),
        gram(Eigen::MatrixXd::Zero(Eigen::Index(wl.w.size()), Eigen::Index(wl.w.size()))),
        cross(Eigen::MatrixXd::Zero(Eigen::Index(wl.w.size()), Eigen::Index(global_dim))),
        label_rhs(Eigen::VectorXd::Zero(Eigen::Index(wl.w.size()))),
        frozen_rhs(Eigen::VectorXd::Zero(Eigen::Index(wl.w.size()))) {}

  LocalParams wl;
  ErmRule rule;
  std::vector<Sample> archive;
  Eigen::MatrixXd gram;
  Eigen::MatrixXd cross;
  Eigen::VectorXd label_rhs;
  Eigen::VectorXd frozen_rhs;
  std::optional<GlobalParams> fetched;
  Round prepared_round = 0;
};

/// w_{i,t} = argmin_{|w|<=D} sum_{s<t} loss_{i,s}(counterpart, w). With an empty
/// archive the client keeps its initial model (zero unless overridden).
inline LocalParams erm_client_round(ErmClientState& st, Round t, GlobalParams fetched,
                                    double radius, double tol = 1e-10) {
  if (t <= st.prepared_round) throw InvariantError("erm_client_round: rounds must increase");
  require_same_dim(fetched.w.size(), static_cast<std::size_t>(st.cross.cols()), "erm_client_round");
  if (!st.archive.empty()) {
    Eigen::VectorXd rhs = st.rule == ErmRule::refit
                              ? Eigen::VectorXd(st.label_rhs - st.cross * as_eigen(fetched.w))
                              : st.frozen_rhs;
    st.wl.w = solve_constrained_ls(st.gram, rhs, radius, tol);
  }
  st.fetched = std::move(fetched);
  st.prepared_round = t;
  return st.wl;
}

/// Archives the sample observed at the prepared round.
inline void erm_client_observe(ErmClientState& st, Round t, const Sample& s) {
  if (!st.fetched || st.prepared_round != t) {
    throw InvariantError("erm_client_observe: round " + std::to_string(t) + " was not prepared");
  }
  require_same_dim(s.x_local.size(), st.wl.w.size(), "erm_client_observe");
  const auto xl = as_eigen(s.x_local);
  const auto xg = as_eigen(s.x_global);
  st.gram.noalias() += xl * xl.transpose();
  st.cross.noalias() += xl * xg.transpose();
  st.label_rhs.noalias() += s.y * xl;
  st.frozen_rhs.noalias() += (s.y - dot(st.fetched->w, s.x_global)) * xl;
  st.archive.push_back(s);
}

/// What an ERM client uploads each round. The refit server needs the sample
/// and the local model; the frozen server only reads the local residual.
struct ErmUpload {
  Sample sample;
  LocalParams local;
  double local_prediction = 0.0;
};

struct ErmDelivery {
  ClientId client = 0;
  Round sent_at = 0;
  ErmUpload upload;
};

struct ErmServerState {
  ErmServerState(GlobalParams init, const std::vector<std::size_t>& local_dims, int uplink_delay,
                 ErmRule r)
      : wg(std::move(init)), rule(r), alpha(uplink_delay) {
    const auto dg = Eigen::Index(wg.w.size());
    total_gram = Eigen::MatrixXd::Zero(dg, dg);
    for (std::size_t i = 0; i < local_dims.size(); ++i) {
      const auto dl = Eigen::Index(local_dims[i]);
      cross.push_back(Eigen::MatrixXd::Zero(dg, dl));
      label_rhs.push_back(Eigen::VectorXd::Zero(dg));
      frozen_rhs.push_back(Eigen::VectorXd::Zero(dg));
      latest_local.push_back(LocalParams{Vector(local_dims[i], 0.0), i});
      archive.emplace_back();
    }
  }

  std::size_t clients() const { return latest_local.size(); }

  GlobalParams wg;
  ErmRule rule;
  int alpha;
  Eigen::MatrixXd total_gram;                 // sum_i sum_s x_g x_g^T
  std::vector<Eigen::MatrixXd> cross;         // per client: sum_s x_g x_l^T
  std::vector<Eigen::VectorXd> label_rhs;     // per client: sum_s x_g y
  std::vector<Eigen::VectorXd> frozen_rhs;    // per client: sum_s x_g (y - residual_s)
  std::vector<LocalParams> latest_local;      // w_{i,t-alpha}
  std::vector<std::vector<Sample>> archive;
  bool has_data = false;
};

/// Absorbs round t's uploads (sent at t - alpha) and solves for the global
/// model in effect at round t + 1. Before any data arrives the model is kept.
inline GlobalParams erm_server_round(ErmServerState& st, Round t, std::span<const ErmDelivery> received,
                                     double radius, double tol = 1e-10) {
  const Round sent = t - st.alpha;
  if (sent >= 1 && received.size() != st.clients()) {
    throw InvariantError("erm_server_round: expected one upload per client at round " +
                         std::to_string(t) + ", got " + std::to_string(received.size()));
  }
  if (sent < 1 && !received.empty()) throw InvariantError("erm_server_round: upload arrived during warmup");
  std::vector<bool> seen(st.clients(), false);
  for (const auto& d : received) {
    if (d.client >= st.clients()) throw InvariantError("erm_server_round: unknown client");
    if (seen[d.client]) throw InvariantError("erm_server_round: duplicate upload");
    if (d.sent_at != sent) throw InvariantError("erm_server_round: upload sent at wrong round");
    seen[d.client] = true;
    const Sample& s = d.upload.sample;
    const auto xg = as_eigen(s.x_global);
    const auto xl = as_eigen(s.x_local);
    st.total_gram.noalias() += xg * xg.transpose();
    st.cross[d.client].noalias() += xg * xl.transpose();
    st.label_rhs[d.client].noalias() += s.y * xg;
    st.frozen_rhs[d.client].noalias() += (s.y - d.upload.local_prediction) * xg;
    st.latest_local[d.client] = d.upload.local;
    st.archive[d.client].push_back(s);
    st.has_data = true;
  }
  if (!st.has_data) return st.wg;

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(Eigen::Index(st.wg.w.size()));
  for (std::size_t i = 0; i < st.clients(); ++i) {
    if (st.rule == ErmRule::refit) {
      rhs += st.label_rhs[i] - st.cross[i] * as_eigen(st.latest_local[i].w);
    } else {
      rhs += st.frozen_rhs[i];
    }
  }
  st.wg.w = solve_constrained_ls(st.total_gram, rhs, radius, tol);
  return st.wg;
}

/// FedRes.ERM (refit) or fictitious play (frozen) over uniform delays.
inline RunResult run_erm(const FederatedDataset& data, const DelayConfig& delays, const HyperParams& hyper,
                         Round rounds, std::uint64_t seed, ErmRule rule,
                         std::optional<Vector> init_global = std::nullopt,
                         std::optional<std::vector<Vector>> init_local = std::nullopt) {
  data.validate();
  const std::size_t p = data.clients();
  delays.validate(p);
  if (!delays.is_uniform()) throw ConfigError("ERM learners require the same delays for every client");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(hyper.radius > 0.0)) throw ConfigError("radius must be positive");
  if (init_local && init_local->size() != p) throw ConfigError("initial local models must match clients");

  GlobalParams g0{init_global.value_or(Vector(data.global_dim, 0.0))};
  if (g0.w.size() != data.global_dim) throw ConfigError("initial global model has wrong dimension");
  std::vector<ErmClientState> clients;
  for (ClientId i = 0; i < p; ++i) {
    Vector w = init_local ? (*init_local)[i] : Vector(data.local_dims[i], 0.0);
    if (w.size() != data.local_dims[i]) throw ConfigError("initial local model has wrong dimension");
    clients.emplace_back(LocalParams{std::move(w), i}, data.global_dim, rule);
  }
  ErmServerState server(g0, data.local_dims, delays.alpha.front(), rule);
  DelayedChannel<ErmUpload> channel(delays, g0);
  channel.publish_global(1, g0);
  SampleStream stream(data, seed);

  RunResult out;
  out.observed.resize(p);
  out.trace.reserve(static_cast<std::size_t>(rounds) * p);
  std::vector<ModelPair> pairs(p);
  for (Round t = 1; t <= rounds; ++t) {
    for (ClientId i = 0; i < p; ++i) {
      GlobalParams fetched = channel.fetch_global(i, t);
      LocalParams wl = erm_client_round(clients[i], t, fetched, hyper.radius);
      const Sample& s = stream.at(i, t);
      const double pred = predict_joint(fetched, wl, s);
      out.trace.push_back(RoundTrace{t, i, SquaredLoss::value(s.y, pred), pred, s.y});
      out.observed[i].push_back(s);
      erm_client_observe(clients[i], t, s);
      const double residual = dot(wl.w, s.x_local);
      pairs[i] = ModelPair{std::move(fetched), wl};
      channel.uplink_send(i, t, ErmUpload{s, std::move(wl), residual});
    }
    std::vector<ErmDelivery> received;
    for (auto& d : channel.uplink_receive(t)) {
      received.push_back(ErmDelivery{d.client, d.sent_at, std::move(d.payload)});
    }
    channel.publish_global(t + 1, erm_server_round(server, t, received, hyper.radius));
  }
  out.final_pairs = std::move(pairs);
  out.final_global = server.wg;
  for (ClientId i = 0; i < p; ++i) out.fetches.push_back(channel.fetch_count(i));
  return out;
}

inline RunResult run_fedres_erm(const FederatedDataset& data, const DelayConfig& delays,
                                const HyperParams& hyper, Round rounds, std::uint64_t seed,
                                std::optional<Vector> init_global = std::nullopt,
                                std::optional<std::vector<Vector>> init_local = std::nullopt) {
  return run_erm(data, delays, hyper, rounds, seed, ErmRule::refit, std::move(init_global),
                 std::move(init_local));
}

inline RunResult run_fictitious_play(const FederatedDataset& data, const DelayConfig& delays,
                                     const HyperParams& hyper, Round rounds, std::uint64_t seed,
                                     std::optional<Vector> init_global = std::nullopt,
                                     std::optional<std::vector<Vector>> init_local = std::nullopt) {
  return run_erm(data, delays, hyper, rounds, seed, ErmRule::frozen, std::move(init_global),
                 std::move(init_local));
}

}  // namespace fedres
