#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <vector>

#include "fedres/linalg.hpp"

namespace fedres {

using Round = std::int64_t;
using ClientId = std::size_t;

/// One observation for one client at one round.
struct Sample {
  Vector x_global;
  Vector x_local;
  double y = 0.0;

  bool operator==(const Sample&) const = default;
};

struct GlobalParams {
  Vector w;
  bool operator==(const GlobalParams&) const = default;
};

struct LocalParams {
  Vector w;
  ClientId client_id = 0;
  bool operator==(const LocalParams&) const = default;
};

/// The pair a client predicts with and that every gradient is evaluated at.
struct ModelPair {
  GlobalParams global;
  LocalParams local;
};

/// What a residual-learning client uploads: global features, the local
/// model's contribution to the prediction, and the label.
struct ResidualMessage {
  Vector x_global;
  double local_prediction = 0.0;
  double y = 0.0;
  ClientId client_id = 0;
  Round sent_at = 0;
};

struct HyperParams {
  double radius = 100.0;
  double eta_global = 0.1;
  std::vector<double> eta_local;  // one per client, or a single shared value

  double eta_for(ClientId i) const {
    if (eta_local.empty()) throw ConfigError("eta_local is empty");
    return eta_local.size() == 1 ? eta_local.front() : eta_local.at(i);
  }

  void validate(std::size_t clients) const {
    auto ok = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!ok(radius)) throw ConfigError("radius must be positive and finite");
    if (!ok(eta_global)) throw ConfigError("eta_global must be positive and finite");
    if (eta_local.size() != 1 && eta_local.size() != clients) {
      throw ConfigError("eta_local must have 1 or P entries");
    }
    for (double e : eta_local) {
      if (!ok(e)) throw ConfigError("eta_local entries must be positive and finite");
    }
  }
};

/// A loss of the joint prediction y_hat = f_global + f_local. Learners only
/// need its value and its derivative in the prediction; gradients with respect
/// to either block are that slope times the block's features.
template <class L>
concept ResidualLoss = requires(double y, double prediction) {
  { L::value(y, prediction) } -> std::convertible_to<double>;
  { L::slope(y, prediction) } -> std::convertible_to<double>;
};

struct SquaredLoss {
  static double value(double y, double prediction) {
    const double r = y - prediction;
    return r * r;
  }
  static double slope(double y, double prediction) { return 2.0 * (prediction - y); }
};

inline double predict_joint(const GlobalParams& wg, const LocalParams& wl, const Sample& s) {
  return dot(wg.w, s.x_global) + dot(wl.w, s.x_local);
}

template <ResidualLoss Loss = SquaredLoss>
double loss(const GlobalParams& wg, const LocalParams& wl, const Sample& s) {
  return Loss::value(s.y, predict_joint(wg, wl, s));
}

template <ResidualLoss Loss = SquaredLoss>
Vector grad_global(const GlobalParams& wg, const LocalParams& wl, const Sample& s) {
  return scaled(s.x_global, Loss::slope(s.y, predict_joint(wg, wl, s)));
}

template <ResidualLoss Loss = SquaredLoss>
Vector grad_local(const GlobalParams& wg, const LocalParams& wl, const Sample& s) {
  return scaled(s.x_local, Loss::slope(s.y, predict_joint(wg, wl, s)));
}

inline ResidualMessage message_of(const LocalParams& wl, const Sample& s, Round sent_at) {
  return ResidualMessage{s.x_global, dot(wl.w, s.x_local), s.y, wl.client_id, sent_at};
}

/// Server-side gradient: the residual alone determines it.
template <ResidualLoss Loss = SquaredLoss>
Vector grad_global_from_message(const GlobalParams& wg, const ResidualMessage& m) {
  const double prediction = dot(wg.w, m.x_global) + m.local_prediction;
  return scaled(m.x_global, Loss::slope(m.y, prediction));
}

/// Step size min{ sqrt(S / (T P sigma2)), cbrt(S / (gamma P^3 G^2 tau^2 T)) }
/// with S = |w_g*|^2 + sum_i |w_i*|^2. Both norm arguments are already squared.
inline double suggested_step_size(double sq_norm_global_star, double sum_sq_norm_local_star,
                                  int clients, long rounds, double sigma2, double gamma,
                                  double grad_bound, int tau) {
  if (!(sq_norm_global_star > 0) || !(sum_sq_norm_local_star > 0) || clients <= 0 ||
      rounds <= 0 || !(sigma2 > 0) || !(gamma > 0) || !(grad_bound > 0) || tau <= 0) {
    throw ConfigError("suggested_step_size: all inputs must be positive");
  }
  const double s = sq_norm_global_star + sum_sq_norm_local_star;
  const double p = clients;
  const double t = static_cast<double>(rounds);
  const double variance_branch = std::sqrt(s / (t * p * sigma2));
  const double delay_branch =
      std::cbrt(s / (gamma * p * p * p * grad_bound * grad_bound * double(tau) * tau * t));
  return std::min(variance_branch, delay_branch);
}

}  // namespace fedres
