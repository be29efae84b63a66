#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "fedres/constrained_ls.hpp"
#include "fedres/data.hpp"

namespace fedres {

/// A fixed (global, per-client local) pair to measure regret against.
struct Comparator {
  GlobalParams global;
  std::vector<LocalParams> locals;
};

/// Joint constrained ERM over all observed data by alternating exact block
/// solves (global given locals, then every local given the global) until the
/// mean objective improves by at most `tol`.
inline Comparator offline_joint_erm(const std::vector<std::vector<Sample>>& observed, std::size_t global_dim,
                                    const std::vector<std::size_t>& local_dims, double radius,
                                    double tol = 1e-8, int max_passes = 10000) {
  const std::size_t p = observed.size();
  require_same_dim(local_dims.size(), p, "offline_joint_erm");
  const auto dg = Eigen::Index(global_dim);
  struct Stats {
    Eigen::MatrixXd gg, ll, gl;  // sum xg xg^T, sum xl xl^T, sum xg xl^T
    Eigen::VectorXd gy, ly;
    double yy = 0.0;
  };
  std::vector<Stats> st(p);
  Eigen::MatrixXd total_gg = Eigen::MatrixXd::Zero(dg, dg);
  std::size_t count = 0;
  for (std::size_t i = 0; i < p; ++i) {
    const auto dl = Eigen::Index(local_dims[i]);
    st[i] = Stats{Eigen::MatrixXd::Zero(dg, dg), Eigen::MatrixXd::Zero(dl, dl), Eigen::MatrixXd::Zero(dg, dl),
                  Eigen::VectorXd::Zero(dg), Eigen::VectorXd::Zero(dl), 0.0};
    for (const auto& s : observed[i]) {
      const auto xg = as_eigen(s.x_global);
      const auto xl = as_eigen(s.x_local);
      st[i].gg.noalias() += xg * xg.transpose();
      st[i].ll.noalias() += xl * xl.transpose();
      st[i].gl.noalias() += xg * xl.transpose();
      st[i].gy.noalias() += s.y * xg;
      st[i].ly.noalias() += s.y * xl;
      st[i].yy += s.y * s.y;
    }
    total_gg += st[i].gg;
    count += observed[i].size();
  }
  if (count == 0) throw ConfigError("offline_joint_erm: no data");

  Eigen::VectorXd wg = Eigen::VectorXd::Zero(dg);
  std::vector<Eigen::VectorXd> wl;
  for (std::size_t i = 0; i < p; ++i) wl.push_back(Eigen::VectorXd::Zero(Eigen::Index(local_dims[i])));

  auto objective = [&] {
    double f = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      f += st[i].yy - 2.0 * wg.dot(st[i].gy) - 2.0 * wl[i].dot(st[i].ly) + wg.dot(st[i].gg * wg) +
           2.0 * wg.dot(st[i].gl * wl[i]) + wl[i].dot(st[i].ll * wl[i]);
    }
    return f / static_cast<double>(count);
  };

  double prev = objective();
  for (int pass = 0; pass < max_passes; ++pass) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dg);
    for (std::size_t i = 0; i < p; ++i) rhs += st[i].gy - st[i].gl * wl[i];
    wg = as_eigen(solve_constrained_ls(total_gg, rhs, radius)).eval();
    for (std::size_t i = 0; i < p; ++i) {
      const Eigen::VectorXd r = st[i].ly - st[i].gl.transpose() * wg;
      wl[i] = as_eigen(solve_constrained_ls(st[i].ll, r, radius)).eval();
    }
    const double cur = objective();
    if (prev - cur <= tol) break;
    prev = cur;
  }

  Comparator c{GlobalParams{to_vector(wg)}, {}};
  for (std::size_t i = 0; i < p; ++i) c.locals.push_back(LocalParams{to_vector(wl[i]), i});
  return c;
}

/// Mean loss of a fixed comparator over every observed (client, round) sample.
inline double comparator_loss(const std::vector<std::vector<Sample>>& observed, const Comparator& c) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    for (const auto& x : observed[i]) {
      s += loss(c.global, c.locals.at(i), x);
      ++n;
    }
  }
  if (n == 0) throw ConfigError("comparator_loss: no data");
  return s / static_cast<double>(n);
}

/// Average regret (1/PT) sum_i sum_t [loss of played pair - loss of comparator].
/// `observed` must be the samples behind `trace` in the comparator's feature
/// layout; without a comparator the offline joint ERM is used.
inline double compute_regret(const std::vector<RoundTrace>& trace,
                             const std::vector<std::vector<Sample>>& observed, std::size_t global_dim,
                             const std::vector<std::size_t>& local_dims, double radius,
                             const std::optional<Comparator>& comparator = std::nullopt) {
  if (trace.empty()) throw ConfigError("compute_regret: empty trace");
  std::size_t n = 0;
  for (const auto& c : observed) n += c.size();
  if (n != trace.size()) throw InvariantError("compute_regret: trace and observed samples differ in size");
  double played = 0.0;
  for (const auto& r : trace) played += r.loss;
  played /= static_cast<double>(trace.size());
  const Comparator c = comparator ? *comparator : offline_joint_erm(observed, global_dim, local_dims, radius);
  return played - comparator_loss(observed, c);
}

inline double compute_regret(const RunResult& run, std::size_t global_dim,
                             const std::vector<std::size_t>& local_dims, double radius,
                             const std::optional<Comparator>& comparator = std::nullopt) {
  return compute_regret(run.trace, run.observed, global_dim, local_dims, radius, comparator);
}

}  // namespace fedres
