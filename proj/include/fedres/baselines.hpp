#pragma once

#include "fedres/sgd.hpp"

namespace fedres {

/// Same clients, global features only (every local block empty).
inline FederatedDataset central_view(const FederatedDataset& data) {
  FederatedDataset out;
  out.global_dim = data.global_dim;
  out.local_dims.assign(data.clients(), 0);
  auto strip = [](std::vector<Sample> v) {
    for (auto& s : v) s.x_local.clear();
    return v;
  };
  for (const auto& c : data.train) out.train.push_back(strip(c));
  for (const auto& c : data.test) out.test.push_back(strip(c));
  return out;
}

/// Same clients, empty global block, local block = [x_g ; x_l].
inline FederatedDataset independent_view(const FederatedDataset& data) {
  FederatedDataset out;
  out.global_dim = 0;
  for (auto d : data.local_dims) out.local_dims.push_back(data.global_dim + d);
  auto merge = [](std::vector<Sample> v) {
    for (auto& s : v) {
      s.x_local = concat(s.x_global, s.x_local);
      s.x_global.clear();
    }
    return v;
  };
  for (const auto& c : data.train) out.train.push_back(merge(c));
  for (const auto& c : data.test) out.test.push_back(merge(c));
  return out;
}

/// Server-only SGD on global features over the delayed uplink; clients predict
/// with their beta-delayed copy of the global model.
inline RunResult run_central(const FederatedDataset& data, const DelayConfig& delays,
                             const HyperParams& hyper, Round rounds, std::uint64_t seed) {
  return run_fedres_sgd(central_view(data), delays, hyper, rounds, seed);
}

/// Per-client projected SGD on the full feature vector; no communication.
inline RunResult run_independent(const FederatedDataset& data, const HyperParams& hyper, Round rounds,
                                 std::uint64_t seed) {
  return run_fedres_sgd(independent_view(data), DelayConfig::uniform(data.clients(), 0, 0), hyper,
                        rounds, seed);
}

}  // namespace fedres
