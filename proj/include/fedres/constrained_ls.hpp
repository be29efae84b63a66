#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "fedres/linalg.hpp"

namespace fedres {

/// min_{|w| <= radius} sum_s (target_s - w . row_s)^2
struct ConstrainedLsProblem {
  std::vector<Vector> rows;
  Vector targets;
  double radius = 1.0;
};

inline constexpr double kLsRidge = 1e-10;

/// Normal-equation statistics A^T A and A^T r of a least-squares problem.
struct LsStatistics {
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;

  explicit LsStatistics(std::size_t dim = 0)
      : gram(Eigen::MatrixXd::Zero(Eigen::Index(dim), Eigen::Index(dim))),
        rhs(Eigen::VectorXd::Zero(Eigen::Index(dim))) {}
};

inline Eigen::Map<const Eigen::VectorXd> as_eigen(const Vector& v) {
  return {v.data(), Eigen::Index(v.size())};
}

inline Vector to_vector(const Eigen::VectorXd& v) { return Vector(v.data(), v.data() + v.size()); }

/// Solves (G + (ridge + lambda) I) w = b and, if that leaves the ball, finds
/// lambda >= 0 with |w(lambda)| = radius by bisection on the eigenbasis of G.
/// Directions with eigenvalue below d * eps * max eigenvalue are treated as
/// null: their component is dropped, giving the minimum-norm minimizer.
inline Vector solve_constrained_ls(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                   double radius, double tol = 1e-10) {
  if (!(tol > 0.0)) throw ConfigError("solve_constrained_ls: tol must be positive");
  if (!(radius > 0.0)) throw ConfigError("solve_constrained_ls: radius must be positive");
  const Eigen::Index d = rhs.size();
  if (gram.rows() != d || gram.cols() != d) throw InvariantError("solve_constrained_ls: shape mismatch");
  if (d == 0) return {};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd evals = eig.eigenvalues().cwiseMax(0.0);
  Eigen::VectorXd c = eig.eigenvectors().transpose() * rhs;
  const double cutoff = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * evals.maxCoeff();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (evals[k] <= cutoff) c[k] = 0.0;
  }

  auto solution = [&](double lambda) {
    Eigen::VectorXd coef(d);
    for (Eigen::Index k = 0; k < d; ++k) coef[k] = c[k] / (evals[k] + kLsRidge + lambda);
    return Eigen::VectorXd(eig.eigenvectors() * coef);
  };
  auto norm_at = [&](double lambda) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const double v = c[k] / (evals[k] + kLsRidge + lambda);
      s += v * v;
    }
    return std::sqrt(s);
  };

  if (norm_at(0.0) <= radius) return to_vector(solution(0.0));

  double lo = 0.0;
  double hi = c.norm() / radius;  // |w(hi)| <= |c| / hi = radius
  while (hi - lo > tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (norm_at(mid) > radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return project_ball(to_vector(solution(hi)), radius);
}

inline LsStatistics statistics_of(const ConstrainedLsProblem& p) {
  if (p.rows.size() != p.targets.size()) throw ConfigError("constrained LS: rows and targets differ in count");
  const std::size_t d = p.rows.empty() ? 0 : p.rows.front().size();
  LsStatistics st(d);
  for (std::size_t s = 0; s < p.rows.size(); ++s) {
    require_same_dim(p.rows[s].size(), d, "constrained LS row");
    const auto x = as_eigen(p.rows[s]);
    st.gram.noalias() += x * x.transpose();
    st.rhs.noalias() += p.targets[s] * x;
  }
  return st;
}

/// Exact constrained least squares. An empty problem has no data and returns
/// the zero vector of the given dimension.
inline Vector solve_constrained_ls(const ConstrainedLsProblem& p, double tol = 1e-10,
                                   std::size_t dim_if_empty = 0) {
  if (p.rows.empty()) return Vector(dim_if_empty, 0.0);
  const LsStatistics st = statistics_of(p);
  return solve_constrained_ls(st.gram, st.rhs, p.radius, tol);
}

inline double ls_objective(const ConstrainedLsProblem& p, const Vector& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.rows.size(); ++k) {
    const double r = p.targets[k] - dot(w, p.rows[k]);
    s += r * r;
  }
  return s;
}

}  // namespace fedres
