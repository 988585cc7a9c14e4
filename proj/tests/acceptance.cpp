// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "polyamix/conformal.hpp"
#include "polyamix/hbeta.hpp"
#include "polyamix/posterior.hpp"
#include "polyamix/predictive.hpp"
#include "polyamix/simharness.hpp"

using namespace polyamix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Random configuration for the single-segmentation checks: P in 1..3, depth
// 1..8, 1..40 points drawn from a lopsided density so that empty leaves occur.
struct RandomConfig {
  Segmentation seg;
  PointSet points;
  CountsTree counts;
};

RandomConfig random_config(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int P = 1 + static_cast<int>(rng() % 3);
  const int L = 1 + static_cast<int>(rng() % 8);
  std::vector<int> dims(static_cast<std::size_t>(L));
  for (auto& d : dims) d = static_cast<int>(rng() % static_cast<std::uint64_t>(P));
  Segmentation seg(dims, P);
  const std::size_t m = 1 + rng() % 40;
  PointSet pts(P);
  std::vector<double> u(static_cast<std::size_t>(P));
  for (std::size_t i = 0; i < m; ++i) {
    for (auto& x : u) x = std::pow(unif(rng), 2.5);
    pts.push_back(u);
  }
  auto counts = CountsTree::accumulate(pts, seg);
  return {std::move(seg), std::move(pts), std::move(counts)};
}

Outcome table1() {
  const std::vector<std::vector<std::uint32_t>> leaves = {{1, 1, 1, 1}, {0, 2, 0, 2}, {0, 0, 2, 2}, {0, 0, 0, 4}, {0, 0, 4, 0}};
  const double printed[3][5] = {{0.00, 0.00, 0.01, 0.49, 0.49}, {0.01, 0.04, 0.07, 0.44, 0.44}, {0.13, 0.16, 0.19, 0.26, 0.26}};
  const double a0s[3] = {0.1, 1.0, 10.0};
  std::vector<Segmentation> members = {Segmentation({0, 1}, 3), Segmentation({0, 2}, 3), Segmentation({1, 0}, 3),
                                       Segmentation({1, 2}, 3), Segmentation({2, 0}, 3)};
  double worst = 0.0;
  for (int a = 0; a < 3; ++a) {
    std::vector<CountsTree> counts;
    for (const auto& l : leaves) counts.push_back(CountsTree::from_leaves(l));
    const auto w = PosteriorModel::from_counts(SegmentationFamily(members), counts, a0s[a]).weights();
    for (int i = 0; i < 5; ++i) worst = std::max(worst, std::abs(w[i] - printed[a][i]));
  }
  return {worst <= 0.005, fmt("max |weight - table| = %.4f (tolerance 0.005)", worst)};
}

Outcome prior_uniformity() {
  const auto model = PosteriorModel::fit(PointSet(2), quantreg_family(), 1.0);
  const std::size_t n = 100000;
  const auto sample = sample_posterior_predictive(model, n, 2024);
  std::vector<std::size_t> hits(256, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = sample.points[i];
    const int ix = std::min(static_cast<int>(u[0] * 16), 15), iy = std::min(static_cast<int>(u[1] * 16), 15);
    ++hits[static_cast<std::size_t>(ix * 16 + iy)];
  }
  const std::vector<double> probs(256, 1.0 / 256);
  const auto gof = chi_square_gof(hits, probs);
  return {gof.p_value > 0.001, fmt("X2 = %.1f on %g df, p = %.3f (need > 0.001)", gof.statistic, gof.dof, gof.p_value)};
}

Outcome limit_identities() {
  auto rng = make_rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst_small = 0.0, worst_large = 0.0, worst_empty = 0.0;
  std::size_t occupied_checks = 0, empty_checks = 0;
  for (int t = 0; t < 100; ++t) {
    const auto cfg = random_config(rng);
    const int L = cfg.seg.depth();
    const double m = cfg.points.size();
    // occupied leaves: every data point, L' = L
    for (std::size_t i = 0; i < cfg.points.size(); ++i) {
      const auto u = cfg.points[i];
      const double want = std::ldexp(cfg.counts.at(L, cfg.seg.leaf_index(u)), L) / m;
      const double got = conditional_predictive_density(u, cfg.counts, cfg.seg, 1e-9);
      worst_small = std::max(worst_small, std::abs(got - want) / std::max(1.0, want));
      ++occupied_checks;
    }
    for (int k = 0; k < 50; ++k) {
      std::vector<double> u(static_cast<std::size_t>(cfg.seg.dimension()));
      for (auto& x : u) x = unif(rng);
      worst_large = std::max(worst_large, std::abs(conditional_predictive_density(u, cfg.counts, cfg.seg, 1e9) - 1.0));
      if (cfg.counts.at(L, cfg.seg.leaf_index(u)) == 0) {
        worst_empty = std::max(worst_empty, conditional_predictive_density(u, cfg.counts, cfg.seg, 1e-9));
        ++empty_checks;
      }
    }
  }
  const bool pass = worst_small <= 1e-6 && worst_large <= 1e-6 && worst_empty <= 1e-6;
  return {pass, fmt("a0=1e-9 at %zu occupied points: max rel err %.2e; a0=1e9: max err %.2e; "
                    "empty leaves (%zu points) tend to 0: max %.2e",
                    occupied_checks, worst_small, worst_large, empty_checks, worst_empty)};
}

Outcome conjugacy() {
  auto rng = make_rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int failures = 0;
  double worst_z = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto cfg = random_config(rng);
    const double a0 = std::exp(std::log(0.1) + unif(rng) * std::log(100.0));
    std::vector<double> u(static_cast<std::size_t>(cfg.seg.dimension()));
    if (t % 2 == 0) {
      const auto p = cfg.points[rng() % cfg.points.size()];
      u.assign(p.begin(), p.end());
    } else {
      for (auto& x : u) x = unif(rng);
    }
    const std::size_t leaf = cfg.seg.leaf_index(u);
    const int draws = 10000;
    double s = 0.0, s2 = 0.0;
    for (int d = 0; d < draws; ++d) {
      const auto phi = sample_phi_posterior(cfg.counts, a0, rng);
      // leaf probability along the path only
      double pi = 1.0;
      const int L = cfg.seg.depth();
      for (int l = 1; l <= L; ++l) {
        const std::size_t node = leaf >> (L - l + 1);
        pi *= ((leaf >> (L - l)) & 1U) ? 1.0 - phi.at(l, node) : phi.at(l, node);
      }
      const double f = std::ldexp(pi, L);
      s += f;
      s2 += f * f;
    }
    const double mean = s / draws, se = std::sqrt(std::max(0.0, s2 / draws - mean * mean) / draws);
    const double z = std::abs(mean - conditional_predictive_density(u, cfg.counts, cfg.seg, a0)) / se;
    worst_z = std::max(worst_z, z);
    failures += z > 3.0;
  }
  return {failures == 0, fmt("%d of 100 configurations outside 3 s.e.; max |z| = %.2f", failures, worst_z)};
}

Outcome approximation_errors() {
  const LogisticDensity2D truth;
  const std::vector<std::pair<std::vector<int>, double>> cases = {
      {{0, 0, 0, 0}, 0.066}, {{1, 1, 1, 1}, 0.894}, {{0, 0, 1, 1}, 0.199}, {{1, 1, 0, 0}, 0.199}};
  std::string detail;
  bool pass = true;
  for (const auto& [dims, want] : cases) {
    const Segmentation seg(dims, 2);
    const double got = approximation_rmse(truth, seg);
    pass = pass && std::abs(got - want) <= 0.002;
    detail += fmt("%s %.4f ", seg.label().c_str(), got);
  }
  return {pass, detail + "(targets 0.066/0.894/0.199/0.199 +- 0.002)"};
}

Outcome weight_ordering() {
  Study2DConfig cfg;
  cfg.m = 50;
  cfg.runs = 500;
  const auto s = run_2d_study(cfg);
  const auto& w = s.median_weight;  // XXXX, YYYY, XXYY, YYXX
  const bool largest = w[0] > w[1] && w[0] > w[2] && w[0] > w[3];
  const bool pass = largest && w[1] < 0.01 && w[2] > w[3];
  return {pass, fmt("median weights XXXX %.3f, YYYY %.2e, XXYY %.3f, YYXX %.3f", w[0], w[1], w[2], w[3])};
}

Outcome shrinkage() {
  Study1DConfig cfg;
  cfg.m = 50;
  cfg.a0 = 1.0;
  cfg.runs = 500;
  cfg.levels = {10};
  const double r = run_1d_study(cfg).curves[0].mean_ratio;
  return {r >= 2.0, fmt("grid-averaged sqrt-MSE ratio counts/hBeta = %.2f (need >= 2)", r)};
}

Outcome credible_calibration() {
  QuantregConfig cfg;
  cfg.m = 100;
  cfg.conformal = false;
  const auto s = run_quantreg_study(cfg);
  const double n = static_cast<double>(cfg.predictive_samples), se = std::sqrt(n * 0.9 * 0.1);
  const double dev = std::abs(static_cast<double>(s.inside_credible) - 0.9 * n);
  return {dev <= 3.0 * se, fmt("%zu of 2000 inside the 0.90 band (1800 +- %.1f)", s.inside_credible, 3.0 * se)};
}

Outcome conformal_validity() {
  const RegressionDensity2D truth;
  const auto family = quantreg_family();
  const int trials = 500;
  const std::size_t m = 100;
  std::vector<int> one_sided(trials), two_sided(trials), lattice(trials);
  // trials are independent; each writes its own slot
  std::vector<std::size_t> idx(trials);
  std::iota(idx.begin(), idx.end(), 0);
  auto run = [&](std::size_t t) {
    Rng rng = make_rng(9, t);
    const auto train = truth.TrueDensity::sample(m, rng);
    const auto test = truth.TrueDensity::sample(1, rng);
    const ConformalPredictor cp(train, ConformalConfig(family));
    const double below = cp.pvalue(test[0], ScoreSide::below);
    const double above = cp.pvalue(test[0], ScoreSide::above);
    one_sided[t] = below > 0.10;
    two_sided[t] = below > 0.05 && above > 0.05;
    auto on_lattice = [&](double p) {
      const double k = p * static_cast<double>(m + 1);
      return std::abs(k - std::round(k)) < 1e-9;
    };
    lattice[t] = on_lattice(below) && on_lattice(above);
  };
  for (auto t : idx) run(t);
  const double c1 = std::accumulate(one_sided.begin(), one_sided.end(), 0.0) / trials;
  const double c2 = std::accumulate(two_sided.begin(), two_sided.end(), 0.0) / trials;
  const bool on = std::all_of(lattice.begin(), lattice.end(), [](int v) { return v == 1; });
  const double floor = 0.90 - 3.0 * std::sqrt(0.9 * 0.1 / trials);
  return {c1 >= floor && c2 >= floor && on,
          fmt("%d trials, m=100: coverage one-sided %.3f, two-sided %.3f (need >= %.3f); p-values on k/101: %s", trials, c1,
              c2, floor, on ? "yes" : "no")};
}

Outcome asymptotic_agreement() {
  QuantregConfig cfg;
  cfg.m = 1000;
  const auto s = run_quantreg_study(cfg);
  double worst = 0.0;
  bool any_empty = false;
  for (std::size_t k = 0; k < s.column_x.size(); ++k) {
    if (s.conformal.empty[k]) {
      any_empty = true;
      continue;
    }
    worst = std::max({worst, std::abs(s.conformal.lower[k] - s.posterior_quantiles[0][k]),
                      std::abs(s.conformal.upper[k] - s.posterior_quantiles[2][k])});
  }
  cfg.endpoints = EndpointMode::interpolated;
  cfg.predictive_samples = 1;
  const auto si = run_quantreg_study(cfg);
  double worst_interp = 0.0;
  for (std::size_t k = 0; k < si.column_x.size(); ++k) {
    if (si.conformal.empty[k]) continue;
    worst_interp = std::max({worst_interp, std::abs(si.conformal.lower[k] - si.posterior_quantiles[0][k]),
                             std::abs(si.conformal.upper[k] - si.posterior_quantiles[2][k])});
  }
  const double cell = 1.0 / 16;
  const bool pass = s.loo_ks.p_value > 0.01 && !any_empty && worst <= cell;
  return {pass, fmt("LOO score KS p = %.3f (need > 0.01); max |band end - mixture quantile| = %.4f grid-point, %.4f "
                    "interpolated (one Y cell = %.4f)",
                    s.loo_ks.p_value, worst, worst_interp, cell)};
}

Outcome structure_recovery() {
  const auto s = run_highdim_study(HighdimConfig{});
  const auto pair = s.pairs[s.best_member];
  const bool best = pair == std::pair<int, int>{0, 1};
  double min_drop = 1e300;
  for (std::size_t d = 0; d < s.log_numerators.size(); ++d)
    min_drop = std::min(min_drop, s.log_numerators[d] - s.swapped_log_numerators[d]);
  const double n = static_cast<double>(s.predictive.rows.size());
  bool levels = true;
  double worst_z = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double p = s.training_levels[k];
    const double z = std::abs(s.predictive_levels[k] - p) / std::sqrt(p * (1 - p) / n);
    worst_z = std::max(worst_z, z);
    levels = levels && z <= 3.0;
  }
  // the swap drop depends on the sample; report its spread over further seeds
  std::string spread;
  int seeds_over = 0;
  for (std::uint64_t seed = 2; seed <= 12; ++seed) {
    HighdimConfig c;
    c.seed = seed;
    c.n = 1;
    const auto r = run_highdim_study(c);
    double mn = 1e300;
    for (std::size_t d = 0; d < r.log_numerators.size(); ++d) mn = std::min(mn, r.log_numerators[d] - r.swapped_log_numerators[d]);
    seeds_over += mn > 100.0;
    spread += fmt("%.0f ", mn);
  }
  return {best && min_drop > 100.0 && levels,
          fmt("best group (Y%d,Y%d): %s; min prefix-swap drop %.2f (need > 100; seeds 2-12: %s-> %d of 11 above 100); "
              "X proportions %.3f/%.3f/%.3f vs training %.3f/%.3f/%.3f, max |z| %.2f",
              pair.first + 1, pair.second + 1, best ? "ok" : "wrong", min_drop, spread.c_str(), seeds_over,
              s.predictive_levels[0], s.predictive_levels[1], s.predictive_levels[2], s.training_levels[0],
              s.training_levels[1], s.training_levels[2], worst_z)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Table 1 weights", table1},
      {"prior predictive uniformity", prior_uniformity},
      {"limit identities", limit_identities},
      {"conjugacy oracle", conjugacy},
      {"approximation errors", approximation_errors},
      {"posterior weight ordering", weight_ordering},
      {"shrinkage benefit", shrinkage},
      {"credible set calibration", credible_calibration},
      {"conformal validity", conformal_validity},
      {"asymptotic agreement", asymptotic_agreement},
      {"structure recovery", structure_recovery},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s #%zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
