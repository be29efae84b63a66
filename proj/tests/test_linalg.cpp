#include <gtest/gtest.h>

#include <random>

#include "fedres/linalg.hpp"

using namespace fedres;

TEST(ProjectBall, InsideBallUnchanged) {
  EXPECT_EQ(project_ball({0.3, 0.4}, 1.0), (Vector{0.3, 0.4}));
}

TEST(ProjectBall, ScalesOntoSphere) {
  const Vector p = project_ball({3.0, 4.0}, 1.0);
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.8, 1e-15);
}

TEST(ProjectBall, ZeroVector) { EXPECT_EQ(project_ball({0.0, 0.0}, 2.0), (Vector{0.0, 0.0})); }

TEST(ProjectBall, RejectsNonpositiveRadius) {
  EXPECT_THROW(project_ball({1.0}, 0.0), ConfigError);
  EXPECT_THROW(project_ball({1.0}, -1.0), ConfigError);
}

TEST(ProjectBall, IdempotentAndInsideOnRandomVectors) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> r(0.01, 10.0);
  std::uniform_int_distribution<int> dim(1, 8);
  for (int n = 0; n < 5000; ++n) {
    Vector v(static_cast<std::size_t>(dim(gen)));
    const double scale = std::exp(3.0 * z(gen));
    for (auto& x : v) x = scale * z(gen);
    const double radius = r(gen);
    const Vector once = project_ball(v, radius);
    const Vector twice = project_ball(once, radius);
    ASSERT_EQ(once, twice);
    ASSERT_LE(norm(once), radius * (1.0 + 1e-12));
  }
}

TEST(Linalg, DotRejectsMismatchedDims) {
  EXPECT_THROW(dot(Vector{1.0}, Vector{1.0, 2.0}), InvariantError);
}

TEST(Linalg, StepAndConcat) {
  EXPECT_EQ(step(Vector{1.0, 2.0}, 0.5, Vector{2.0, 2.0}), (Vector{0.0, 1.0}));
  EXPECT_EQ(concat(Vector{1.0}, Vector{2.0, 3.0}), (Vector{1.0, 2.0, 3.0}));
  EXPECT_DOUBLE_EQ(distance(Vector{0.0, 0.0}, Vector{3.0, 4.0}), 5.0);
}
