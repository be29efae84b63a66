#include <gtest/gtest.h>

#include <random>

#include "fedres/constrained_ls.hpp"
#include "oracles.hpp"

using namespace fedres;

TEST(ConstrainedLs, InteriorOptimum) {
  const auto w = solve_constrained_ls(ConstrainedLsProblem{{{1.0}}, {1.0}, 10.0});
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NEAR(w[0], 1.0, 1e-8);
}

TEST(ConstrainedLs, ClampsToBall) {
  const auto w = solve_constrained_ls(ConstrainedLsProblem{{{1.0}}, {2.0}, 1.0});
  EXPECT_NEAR(w[0], 1.0, 1e-9);
  EXPECT_LE(norm(w), 1.0);
}

TEST(ConstrainedLs, TwoDimensionalAgainstProjectedGradient) {
  const ConstrainedLsProblem p{{{1.0, 0.0}, {1.0, 1.0}}, {2.0, 0.0}, 1.0};
  const auto w = solve_constrained_ls(p);
  const auto ref = oracle::projected_gd(p.rows, p.targets, 1.0, 2);
  EXPECT_LE(ls_objective(p, w), oracle::ls_value(p.rows, p.targets, ref) + 1e-8);
  EXPECT_LE(norm(w), 1.0 + 1e-10);
}

TEST(ConstrainedLs, EmptyProblemIsZero) {
  EXPECT_EQ(solve_constrained_ls(ConstrainedLsProblem{{}, {}, 1.0}, 1e-10, 3), (Vector{0.0, 0.0, 0.0}));
}

TEST(ConstrainedLs, Errors) {
  EXPECT_THROW(solve_constrained_ls(ConstrainedLsProblem{{{1.0}}, {1.0, 2.0}, 1.0}), ConfigError);
  EXPECT_THROW(solve_constrained_ls(ConstrainedLsProblem{{{1.0}}, {1.0}, 1.0}, 0.0), ConfigError);
  EXPECT_THROW(solve_constrained_ls(ConstrainedLsProblem{{{1.0}}, {1.0}, 0.0}), ConfigError);
}

TEST(ConstrainedLs, RankDeficientGivesMinimumNorm) {
  const ConstrainedLsProblem p{{{1.0, 1.0}}, {2.0}, 10.0};
  const auto w = solve_constrained_ls(p);
  EXPECT_NEAR(w[0], 1.0, 1e-8);
  EXPECT_NEAR(w[1], 1.0, 1e-8);
}

TEST(ConstrainedLs, RandomProblemsMatchOracle) {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> nd(1, 20), dd(1, 5);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = std::size_t(nd(gen)), d = std::size_t(dd(gen));
    ConstrainedLsProblem p;
    p.radius = 0.05 + 3.0 * u(gen);
    for (std::size_t s = 0; s < n; ++s) {
      Vector row(d);
      for (auto& x : row) x = z(gen);
      p.rows.push_back(row);
      p.targets.push_back(3.0 * z(gen));
    }
    const auto w = solve_constrained_ls(p);
    const auto ref = oracle::projected_gd(p.rows, p.targets, p.radius, d);
    ASSERT_LE(ls_objective(p, w), oracle::ls_value(p.rows, p.targets, ref) + 1e-8) << "trial " << trial;
    ASSERT_LE(norm(w), p.radius + 1e-10);
  }
}
