#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "polyamix/hbeta.hpp"

using namespace polyamix;

namespace {

PointSet points_1d(std::initializer_list<double> xs) {
  PointSet p(1);
  for (double x : xs) p.push_back(std::span<const double>(&x, 1));
  return p;
}

// Mean and standard error of a sample.
struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
Moments monte_carlo(std::size_t n, F&& draw) {
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = draw();
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean) / n)};
}

}  // namespace

TEST_CASE("counts of four 1D points") {
  const auto pts = points_1d({0.1, 0.2, 0.6, 0.9});
  const auto c = CountsTree::accumulate(pts, Segmentation({0, 0}, 1));
  CHECK(c.total() == 4);
  CHECK(c.at(1, 0) == 2);
  CHECK(c.at(1, 1) == 2);
  const auto leaves = c.level(2);
  CHECK(std::vector<std::uint32_t>(leaves.begin(), leaves.end()) == std::vector<std::uint32_t>{2, 0, 1, 1});
  CHECK(c.consistent());
}

TEST_CASE("empty data gives an all-zero tree") {
  const auto c = CountsTree::accumulate(PointSet(2), Segmentation({0, 1, 1}, 2));
  CHECK(c.total() == 0);
  for (int l = 0; l <= 3; ++l)
    for (auto n : c.level(l)) CHECK(n == 0);
}

TEST_CASE("counts tree construction and edits") {
  const std::uint32_t leaves[] = {0, 0, 2, 2};
  auto c = CountsTree::from_leaves(leaves);
  CHECK(c.at(1, 0) == 0);
  CHECK(c.at(1, 1) == 4);
  CHECK(CountsTree::from_levels({{4}, {0, 4}, {0, 0, 2, 2}}) == c);
  CHECK_THROWS_AS(CountsTree::from_levels({{4}, {1, 4}, {0, 1, 2, 2}}), std::invalid_argument);
  c.add_leaf(0);
  CHECK(c.total() == 5);
  CHECK(c.at(1, 0) == 1);
  c.remove_leaf(0);
  CHECK_THROWS_AS(c.remove_leaf(0), std::logic_error);
  CHECK(c.consistent());
}

TEST_CASE("pi_from_phi") {
  BetaTree half(2);
  for (int l = 1; l <= 2; ++l)
    for (std::size_t j = 0; j < (1u << (l - 1)); ++j) half.at(l, j) = 0.5;
  for (double p : pi_from_phi(half).leaf) CHECK(p == 0.25);

  BetaTree left(2);
  left.at(1, 0) = 1.0;
  left.at(2, 0) = 0.3;
  left.at(2, 1) = 0.8;
  const auto pi = pi_from_phi(left);
  CHECK(pi[0] == doctest::Approx(0.3));
  CHECK(pi[1] == doctest::Approx(0.7));
  CHECK(pi[2] == 0.0);
  CHECK(pi[3] == 0.0);
}

TEST_CASE("pi_from_phi matches a per-leaf path product") {
  auto rng = make_rng(17);
  for (int L = 1; L <= 9; ++L) {
    const auto phi = sample_phi_prior(L, 0.7, rng);
    const auto pi = pi_from_phi(phi);
    double total = 0.0;
    for (std::size_t leaf = 0; leaf < pi.size(); ++leaf) {
      double p = 1.0;
      for (int l = 1; l <= L; ++l) {
        const std::size_t node = leaf >> (L - l + 1);
        const bool right = (leaf >> (L - l)) & 1u;
        p *= right ? 1.0 - phi.at(l, node) : phi.at(l, node);
      }
      CHECK(std::abs(pi[leaf] - p) <= 1e-14);
      total += pi[leaf];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("step density") {
  Segmentation s({0, 0}, 1);
  ProbVector uniform{{0.25, 0.25, 0.25, 0.25}};
  const double u[] = {0.77};
  CHECK(step_density(u, s, uniform) == 1.0);
  ProbVector front{{0.5, 0.5, 0.0, 0.0}};
  const double v[] = {0.1};
  CHECK(step_density(v, s, front) == 2.0);
}

TEST_CASE("step density integrates to one over the leaf boxes") {
  auto rng = make_rng(23);
  Segmentation s({1, 0, 2, 1, 0, 0}, 3);
  for (int t = 0; t < 20; ++t) {
    const auto pi = pi_from_phi(sample_phi_prior(s.depth(), 0.3, rng));
    double integral = 0.0;
    for (std::size_t j = 0; j < s.leaf_count(); ++j) {
      const Box b = s.leaf_box(j);
      integral += step_density(b.center(), s, pi) * b.volume();
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("prior leaf probabilities have mean 2^-L") {
  auto rng = make_rng(29);
  for (double a0 : {0.1, 1.0, 10.0}) {
    const auto mc = monte_carlo(100000, [&] { return pi_from_phi(sample_phi_prior(3, a0, rng))[5]; });
    CHECK(std::abs(mc.mean - 0.125) <= 3.0 * mc.se);
  }
}

TEST_CASE("large a0 concentrates phi at one half") {
  auto rng = make_rng(31);
  const auto pi = pi_from_phi(sample_phi_prior(4, 1e8, rng));
  for (double p : pi.leaf) CHECK(p == doctest::Approx(1.0 / 16).epsilon(1e-3));
}

TEST_CASE("sample_beta handles tiny shapes") {
  auto rng = make_rng(37);
  for (int i = 0; i < 1000; ++i) {
    const double b = sample_beta(1e-3, 1e-3, rng);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
  }
  CHECK_THROWS_AS(sample_beta(0.0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("posterior node draw is Beta(3,1)") {
  const std::uint32_t leaves[] = {2, 0};
  const auto c = CountsTree::from_leaves(leaves);
  auto rng = make_rng(41);
  const auto mc = monte_carlo(100000, [&] { return sample_phi_posterior(c, 1.0, rng).at(1, 0); });
  CHECK(std::abs(mc.mean - 0.75) <= 3.0 * mc.se);
}

TEST_CASE("posterior draws with m = 0 follow the prior") {
  const auto c = CountsTree::accumulate(PointSet(1), Segmentation({0, 0, 0}, 1));
  auto rng = make_rng(43);
  const auto mc = monte_carlo(50000, [&] { return sample_phi_posterior(c, 2.0, rng).at(3, 2); });
  CHECK(std::abs(mc.mean - 0.5) <= 3.0 * mc.se);
  // Var Beta(2,2) = 1/20
  CHECK(mc.se * mc.se * 50000 == doctest::Approx(0.05).epsilon(0.03));
}

TEST_CASE("conditional predictive density of four 1D points") {
  Segmentation s({0, 0}, 1);
  const auto c = CountsTree::accumulate(points_1d({0.1, 0.2, 0.6, 0.9}), s);
  const double u[] = {0.1};
  CHECK(conditional_predictive_density(u, c, s, 1.0) == doctest::Approx(1.5).epsilon(1e-14));
  // the empty leaf [1/4, 1/2): 4 * 3/6 * 1/4
  const double v[] = {0.3};
  CHECK(conditional_predictive_density(v, c, s, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(conditional_predictive_density(u, c, s, 1e-9) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(conditional_predictive_density(u, c, s, 1e9) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("conditional predictive density equals the posterior mean of the step density") {
  Segmentation s({0, 0}, 1);
  const auto c = CountsTree::accumulate(points_1d({0.1, 0.2, 0.6, 0.9}), s);
  auto rng = make_rng(47);
  for (double x : {0.1, 0.3, 0.7}) {
    const double u[] = {x};
    const auto mc = monte_carlo(100000, [&] { return step_density(u, s, pi_from_phi(sample_phi_posterior(c, 1.0, rng))); });
    CHECK(std::abs(mc.mean - conditional_predictive_density(u, c, s, 1.0)) <= 3.0 * mc.se);
  }
}

TEST_CASE("conditional predictive density integrates to one and is 1 with no data") {
  auto rng = make_rng(53);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Segmentation s({0, 1, 1, 0, 1}, 2);
  PointSet pts(2);
  for (int i = 0; i < 7; ++i) {
    const double u[] = {unif(rng) * unif(rng), unif(rng)};
    pts.push_back(u);
  }
  const auto c = CountsTree::accumulate(pts, s);
  const auto empty = CountsTree::accumulate(PointSet(2), s);
  double integral = 0.0;
  for (std::size_t j = 0; j < s.leaf_count(); ++j) {
    const Box b = s.leaf_box(j);
    integral += conditional_predictive_density(b.center(), c, s, 0.4) * b.volume();
    CHECK(conditional_predictive_density(b.center(), empty, s, 0.4) == 1.0);
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("refining below the deepest occupied level leaves the density unchanged") {
  auto rng = make_rng(59);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Segmentation coarse({0, 1, 0}, 2);
  PointSet pts(2);
  for (int i = 0; i < 3; ++i) {
    const double u[] = {unif(rng), unif(rng)};
    pts.push_back(u);
  }
  const auto cc = CountsTree::accumulate(pts, coarse);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    const double u[] = {unif(rng), unif(rng)};
    if (cc.at(3, coarse.leaf_index(u)) != 0) continue;  // L' must be below L
    std::vector<int> dims = coarse.dims();
    for (int k = 0; k < 1 + t % 4; ++k) dims.push_back(t % 2);
    Segmentation fine(dims, 2);
    const auto cf = CountsTree::accumulate(pts, fine);
    CHECK(conditional_predictive_density(u, cf, fine, 0.8) ==
          doctest::Approx(conditional_predictive_density(u, cc, coarse, 0.8)).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("invalid hyperparameters") {
  auto rng = make_rng(1);
  CHECK_THROWS_AS(sample_phi_prior(3, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_phi_prior(3, -1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_phi_prior(0, 1.0, rng), std::invalid_argument);
}
