#pragma once

#include <span>
#include <utility>

#include "fedres/sgd.hpp"

namespace fedres {

/// Mean loss of one batch at a fixed pair.
template <ResidualLoss Loss = SquaredLoss>
double aggregate_loss(std::span<const Sample> samples, std::size_t batch, const GlobalParams& wg,
                      const LocalParams& wl) {
  if (samples.size() != batch || batch == 0) {
    throw InvariantError("aggregate_loss: expected " + std::to_string(batch) + " samples, got " +
                         std::to_string(samples.size()));
  }
  double s = 0.0;
  for (const auto& x : samples) s += loss<Loss>(wg, wl, x);
  return s / static_cast<double>(batch);
}

/// Mean (global, local) gradients of one batch at a fixed pair.
template <ResidualLoss Loss = SquaredLoss>
std::pair<Vector, Vector> aggregate_grads(std::span<const Sample> samples, std::size_t batch,
                                          const GlobalParams& wg, const LocalParams& wl) {
  if (samples.size() != batch || batch == 0) {
    throw InvariantError("aggregate_grads: expected " + std::to_string(batch) + " samples, got " +
                         std::to_string(samples.size()));
  }
  Vector g = grad_global<Loss>(wg, wl, samples[0]);
  for (std::size_t k = 1; k < batch; ++k) add_to(g, grad_global<Loss>(wg, wl, samples[k]));
  if (batch > 1) {
    for (double& v : g) v /= static_cast<double>(batch);
  }
  return {std::move(g), mean_grad_local<Loss>(wg, wl, samples)};
}

/// FedRes.SGD on the aggregated loss sequence: one fetch and one update per
/// batch of b rounds; delays are converted to whole batches (rounded up).
template <ResidualLoss Loss = SquaredLoss>
RunResult run_batched(const FederatedDataset& data, const DelayConfig& delays, const HyperParams& hyper,
                      Round rounds, std::size_t batch, std::uint64_t seed,
                      SgdVariant variant = SgdVariant::aligned) {
  SampleStream stream(data, seed);
  SgdRunConfig cfg{hyper, delays, rounds, batch, variant, std::nullopt, std::nullopt, false};
  return run_sgd_engine<Loss>(stream, cfg);
}

}  // namespace fedres
