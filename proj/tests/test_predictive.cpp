#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polyamix/predictive.hpp"
#include "polyamix/simharness.hpp"

using namespace polyamix;

namespace {

PointSet skewed_points(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointSet pts(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = unif(rng);
    const double u[] = {x, std::clamp(0.3 + 0.5 * x + 0.1 * (unif(rng) - 0.5), 0.0, 1.0)};
    pts.push_back(u);
  }
  return pts;
}

SegmentationFamily small_family() { return enumerate_balanced_family(2, {{0, 2}, {1, 2}}); }

}  // namespace

TEST_CASE("component counts") {
  auto rng = make_rng(101);
  const auto pts = skewed_points(30, rng);
  const auto single = PosteriorModel::fit(pts, SegmentationFamily({Segmentation({0, 1, 1}, 2)}), 1.0);
  CHECK(build_mixture(single, 1, rng).components() == 1);
  const auto model = PosteriorModel::fit(pts, quantreg_family(), 1.0);
  const auto mix = build_mixture(model, 50, rng);
  CHECK(mix.members() == 70);
  CHECK(mix.components() == 3500);
  const auto exact = build_mixture(model, 0, rng);
  CHECK(exact.exact());
  CHECK(exact.components() == 70);
  const double u[] = {0.3, 0.45};
  CHECK(exact.density(u) == doctest::Approx(model.density(u)).epsilon(1e-12));
  CHECK_THROWS_AS(build_mixture(model, -1, rng), std::invalid_argument);
}

TEST_CASE("mixture density averages to the exact predictive density") {
  auto rng = make_rng(103);
  const auto model = PosteriorModel::fit(skewed_points(25, rng), small_family(), 1.0);
  const double u[] = {0.6, 0.55};
  double s = 0.0, s2 = 0.0;
  const int rebuilds = 200;
  for (int r = 0; r < rebuilds; ++r) {
    const double f = build_mixture(model, 3, rng).density(u);
    s += f;
    s2 += f * f;
  }
  const double mean = s / rebuilds;
  const double se = std::sqrt((s2 / rebuilds - mean * mean) / rebuilds);
  CHECK(std::abs(mean - mixture_predictive_density(u, model)) <= 3.0 * se);
}

TEST_CASE("prior predictive samples are uniform") {
  const auto model = PosteriorModel::fit(PointSet(2), small_family(), 1.0);
  auto rng = make_rng(107);
  const auto mix = build_mixture(model, 0, rng);
  const std::size_t n = 32000;
  const auto sample = sample_predictive(mix, n, 5);
  Segmentation grid({0, 0, 1, 1}, 2);
  std::vector<std::size_t> hits(16, 0);
  for (std::size_t i = 0; i < n; ++i) ++hits[grid.leaf_index(sample.points[i])];
  const double expect = n / 16.0, se = std::sqrt(n * (1.0 / 16) * (15.0 / 16));
  for (auto h : hits) CHECK(std::abs(h - expect) <= 3.0 * se);
}

TEST_CASE("point-mass data with tiny a0 keeps samples in the occupied leaf") {
  PointSet pts(2);
  for (int i = 0; i < 10; ++i) {
    const double u[] = {0.1, 0.8};
    pts.push_back(u);
  }
  const auto model = PosteriorModel::fit(pts, small_family(), 1e-9);
  const auto exact = sample_posterior_predictive(model, 5000, 3);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < exact.points.size(); ++i) {
    const auto u = exact.points[i];
    inside += u[0] < 0.25 && u[1] >= 0.75;
  }
  CHECK(inside >= 0.99 * 5000);
}

TEST_CASE("sampled leaf frequencies match analytic box masses") {
  auto rng = make_rng(109);
  const auto model = PosteriorModel::fit(skewed_points(40, rng), small_family(), 0.5);
  const auto mix = build_mixture(model, 20, rng);
  Segmentation grid({0, 0, 1, 1}, 2);
  std::vector<double> probs;
  for (std::size_t j = 0; j < 16; ++j) probs.push_back(mix.box_mass(grid.leaf_box(j)));
  const auto sample = sample_predictive(mix, 100000, 11);
  std::vector<std::size_t> hits(16, 0);
  for (std::size_t i = 0; i < sample.points.size(); ++i) ++hits[grid.leaf_index(sample.points[i])];
  CHECK(chi_square_gof(hits, probs).p_value > 0.001);

  // exact sampler against the exact posterior predictive masses
  const auto exact = sample_posterior_predictive(model, 100000, 13);
  std::fill(hits.begin(), hits.end(), 0);
  for (std::size_t i = 0; i < exact.points.size(); ++i) ++hits[grid.leaf_index(exact.points[i])];
  for (std::size_t j = 0; j < 16; ++j) probs[j] = model.density(grid.leaf_box(j).center()) / 16.0;
  CHECK(chi_square_gof(hits, probs).p_value > 0.001);
}

TEST_CASE("region probabilities") {
  auto rng = make_rng(113);
  const auto model = PosteriorModel::fit(skewed_points(40, rng), small_family(), 1.0);
  const auto mix = build_mixture(model, 5, rng);
  Region cube{{Box::unit(2)}};
  CHECK(predictive_probability(cube, mix).value == doctest::Approx(1.0).epsilon(1e-12));

  const auto prior = build_mixture(PosteriorModel::fit(PointSet(2), small_family(), 1.0), 0, rng);
  Region cell{{Box{{0.25, 0.5}, {0.5, 0.75}}}};
  CHECK(predictive_probability(cell, prior).value == doctest::Approx(1.0 / 16).epsilon(1e-12));

  // disjoint boxes: analytic; compare with a direct sample count
  Region two{{Box{{0.1, 0.2}, {0.45, 0.7}}, Box{{0.6, 0.0}, {0.95, 0.33}}}};
  const auto analytic = predictive_probability(two, mix);
  CHECK(analytic.analytic);
  const auto sample = sample_predictive(mix, 100000, 17);
  std::size_t in = 0;
  for (std::size_t i = 0; i < sample.points.size(); ++i)
    in += two.boxes[0].contains(sample.points[i]) || two.boxes[1].contains(sample.points[i]);
  const double p = in / 1e5;
  CHECK(std::abs(p - analytic.value) <= 3.0 * std::sqrt(analytic.value * (1 - analytic.value) / 1e5));

  // overlapping boxes fall back to Monte Carlo
  Region overlap{{Box{{0.1, 0.1}, {0.6, 0.6}}, Box{{0.4, 0.4}, {0.9, 0.9}}}};
  const auto mc = predictive_probability(overlap, mix, 3, 100000);
  CHECK_FALSE(mc.analytic);
  const double exact = mix.box_mass(overlap.boxes[0]) + mix.box_mass(overlap.boxes[1]) -
                       mix.box_mass(Box{{0.4, 0.4}, {0.6, 0.6}});
  CHECK(std::abs(mc.value - exact) <= 3.0 * mc.standard_error);
}

TEST_CASE("conditional quantiles with no data are the identity") {
  auto rng = make_rng(127);
  const auto mix = build_mixture(PosteriorModel::fit(PointSet(2), quantreg_family(), 1.0), 0, rng);
  const auto grid = ConditionalGrid::from_mixture(mix);
  for (double x : {0.0, 0.3, 0.99}) {
    for (double q : {0.05, 0.5, 0.95}) {
      CHECK(conditional_quantile(x, q, mix) == doctest::Approx(q).epsilon(1e-9));
    }
  }
  CHECK(grid.x_bins() == 16);
  CHECK(grid.y_bins() == 16);
}

TEST_CASE("mirrored data has median one half") {
  auto rng = make_rng(131);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointSet pts(2);
  for (int i = 0; i < 30; ++i) {
    const double x = unif(rng), y = unif(rng) * 0.4;
    const double a[] = {x, y}, b[] = {x, 1.0 - y};
    pts.push_back(a);
    pts.push_back(b);
  }
  const auto grid = ConditionalGrid::from_posterior(PosteriorModel::fit(pts, quantreg_family(), 1.0));
  for (int ix = 0; ix < grid.x_bins(); ++ix) CHECK(grid.quantile(ix, 0.5) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("quantiles are monotone and calibrated against samples") {
  auto rng = make_rng(137);
  const auto model = PosteriorModel::fit(skewed_points(80, rng), quantreg_family(), 1.0);
  const auto mix = build_mixture(model, 10, rng);
  const auto grid = ConditionalGrid::from_mixture(mix);
  for (int ix = 0; ix < grid.x_bins(); ++ix) {
    double prev = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double y = grid.quantile(ix, k / 100.0);
      CHECK(y >= prev);
      prev = y;
    }
  }
  const double q = 0.3;
  const auto sample = sample_predictive(mix, 100000, 19);
  std::vector<std::size_t> below(16, 0), total(16, 0);
  for (std::size_t i = 0; i < sample.points.size(); ++i) {
    const auto u = sample.points[i];
    const int ix = grid.column_of(u[0]);
    ++total[ix];
    below[ix] += u[1] <= grid.quantile(ix, q);
  }
  for (int ix = 0; ix < 16; ++ix) {
    const double n = total[ix];
    CHECK(std::abs(below[ix] / n - q) <= 3.0 * std::sqrt(q * (1 - q) / n));
  }
}

TEST_CASE("credible band with no data") {
  auto rng = make_rng(139);
  const auto mix = build_mixture(PosteriorModel::fit(PointSet(2), quantreg_family(), 1.0), 0, rng);
  const auto band = credible_prediction_set(mix, 0.10);
  CHECK(band.mass == doctest::Approx(0.90).epsilon(1e-9));
  for (const auto& c : band.columns) {
    CHECK(c.y_lower == doctest::Approx(0.05));
    CHECK(c.y_upper == doctest::Approx(0.95));
  }
  const auto full = credible_prediction_set(mix, 0.0);
  CHECK(full.mass == doctest::Approx(1.0));
  for (const auto& c : full.columns) {
    CHECK(c.y_lower == 0.0);
    CHECK(c.y_upper == 1.0);
  }
}

TEST_CASE("credible band mass and sample coverage") {
  auto rng = make_rng(149);
  const auto model = PosteriorModel::fit(skewed_points(100, rng), quantreg_family(), 1.0);
  const auto mix = build_mixture(model, 50, rng);
  const auto band = credible_prediction_set(mix, 0.10);
  CHECK(band.mass == doctest::Approx(0.90).epsilon(1e-9));
  CHECK(mix.box_mass(Box::unit(2)) == doctest::Approx(1.0));
  double region_mass = 0.0;
  for (const auto& b : band.region().boxes) region_mass += mix.box_mass(b);
  CHECK(region_mass == doctest::Approx(0.90).epsilon(1e-9));
  const auto sample = sample_predictive(mix, 2000, 23);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < sample.points.size(); ++i) inside += band.contains(sample.points[i]);
  CHECK(std::abs(inside - 1800.0) <= 3.0 * std::sqrt(2000 * 0.9 * 0.1));
}
