#include "polyamix/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "polyamix/hbeta.hpp"
#include "polyamix/parallel.hpp"

namespace polyamix {

namespace {

constexpr std::size_t kRunBlock = 25;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t tag) { return mix_seed(seed ^ mix_seed(tag + 0x51ed)); }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logit(double u) { return std::log(u) - std::log1p(-u); }

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Runs body(run, accumulator) over [0, runs) in fixed blocks and merges the
// block accumulators in order, so the floating-point result is the same on
// any number of threads.
template <class Acc, class Body, class Merge>
Acc blocked_runs(std::size_t runs, const Acc& zero, Body&& body, Merge&& merge) {
  const std::size_t blocks = (runs + kRunBlock - 1) / kRunBlock;
  std::vector<Acc> partial(blocks, zero);
  parallel_for(
      blocks,
      [&](std::size_t b) {
        const std::size_t hi = std::min(runs, (b + 1) * kRunBlock);
        for (std::size_t r = b * kRunBlock; r < hi; ++r) body(r, partial[b]);
      },
      1);
  Acc total = zero;
  for (const Acc& p : partial) merge(total, p);
  return total;
}

}  // namespace

PointSet TrueDensity::sample(std::size_t n, Rng& rng) const {
  PointSet out(dimension());
  out.reserve(n);
  std::vector<double> u(static_cast<std::size_t>(dimension()));
  for (std::size_t i = 0; i < n; ++i) {
    sample(rng, u);
    out.push_back(u);
  }
  return out;
}

// ---------------------------------------------------------------------------

PiecewiseDensity1D::PiecewiseDensity1D(std::vector<LinearPiece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw std::invalid_argument("piecewise density needs at least one piece");
  double edge = 0.0;
  double mass = 0.0;
  for (const auto& p : pieces_) {
    if (std::abs(p.lo - edge) > 1e-12 || !(p.hi > p.lo)) throw std::invalid_argument("pieces must tile [0,1] in order");
    if (p.start < 0.0 || p.end < 0.0) throw std::invalid_argument("density pieces must be non-negative");
    cum_.push_back(mass);
    mass += 0.5 * (p.start + p.end) * (p.hi - p.lo);
    edge = p.hi;
  }
  if (std::abs(edge - 1.0) > 1e-12) throw std::invalid_argument("pieces must end at 1");
  if (std::abs(mass - 1.0) > 1e-9) throw std::invalid_argument("piecewise density must integrate to 1");
}

PiecewiseDensity1D PiecewiseDensity1D::standard() {
  return PiecewiseDensity1D({{0.0, 0.25, 0.4, 0.4}, {0.25, 0.5, 1.6, 1.6}, {0.5, 1.0, 0.4, 1.6}});
}

double PiecewiseDensity1D::at(double x) const {
  for (const auto& p : pieces_) {
    if (x < p.hi || &p == &pieces_.back()) return p.start + (p.end - p.start) * (x - p.lo) / (p.hi - p.lo);
  }
  return 0.0;
}

double PiecewiseDensity1D::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const auto& p = pieces_[k];
    if (x < p.hi || k + 1 == pieces_.size()) {
      const double t = x - p.lo;
      const double slope = (p.end - p.start) / (p.hi - p.lo);
      return cum_[k] + t * (p.start + 0.5 * slope * t);
    }
  }
  return 1.0;
}

double PiecewiseDensity1D::quantile(double q) const {
  q = std::clamp(q, 0.0, 1.0);
  std::size_t k = pieces_.size() - 1;
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
    if (q < cum_[i + 1]) {
      k = i;
      break;
    }
  }
  const auto& p = pieces_[k];
  const double r = q - cum_[k];
  const double slope = (p.end - p.start) / (p.hi - p.lo);
  double t;
  if (std::abs(slope) < 1e-14) {
    t = p.start > 0.0 ? r / p.start : 0.0;
  } else {
    t = (-p.start + std::sqrt(std::max(0.0, p.start * p.start + 2.0 * slope * r))) / slope;
  }
  return std::clamp(p.lo + t, p.lo, p.hi);
}

void PiecewiseDensity1D::sample(Rng& rng, std::span<double> out) const {
  out[0] = quantile(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
}

double LogisticDensity2D::density(std::span<const double> u) const { return 2.0 * logistic(20.0 * (u[0] - 0.5)); }

void LogisticDensity2D::sample(Rng& rng, std::span<double> out) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // the x-marginal is bounded by 2: accept x with probability f(x) / 2
  for (;;) {
    const double x = unif(rng);
    if (unif(rng) < logistic(20.0 * (x - 0.5))) {
      out[0] = x;
      break;
    }
  }
  out[1] = unif(rng);
}

double LogisticDensity2D::x_cdf(double x) const {
  x = std::clamp(x, 0.0, 1.0);
  return (softplus(20.0 * (x - 0.5)) - softplus(-10.0)) / 10.0;
}

double LogisticDensity2D::box_mass(const Box& box) const {
  return (x_cdf(box.upper[0]) - x_cdf(box.lower[0])) * (box.upper[1] - box.lower[1]);
}

double RegressionDensity2D::density(std::span<const double> u) const {
  if (u[0] <= 0.0 || u[0] >= 1.0 || u[1] <= 0.0 || u[1] >= 1.0) return 0.0;
  const double x = logit(u[0]);
  const double y = logit(u[1]);
  return normal_pdf(x, 0.0, kXSd) / (u[0] * (1.0 - u[0])) * normal_pdf(y, conditional_mean(x), kYSd) /
         (u[1] * (1.0 - u[1]));
}

void RegressionDensity2D::sample(Rng& rng, std::span<double> out) const {
  std::normal_distribution<double> z(0.0, 1.0);
  const double x = kXSd * z(rng);
  const double y = conditional_mean(x) + kYSd * z(rng);
  out[0] = logistic(x);
  out[1] = logistic(y);
}

double RegressionDensity2D::conditional_cdf(double ux, double uy) const {
  if (uy <= 0.0) return 0.0;
  if (uy >= 1.0) return 1.0;
  const double x = ux <= 0.0 ? -1e300 : ux >= 1.0 ? 1e300 : logit(ux);
  return normal_cdf((logit(uy) - conditional_mean(x)) / kYSd);
}

double RegressionDensity2D::conditional_quantile(double ux, double q) const {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
  const double x = logit(std::clamp(ux, 1e-300, 1.0 - 1e-16));
  const boost::math::normal_distribution<double> n01;
  return logistic(conditional_mean(x) + kYSd * boost::math::quantile(n01, q));
}

double RegressionDensity2D::box_mass(const Box& box) const {
  const double inf = std::numeric_limits<double>::infinity();
  auto to_x = [&](double u) { return u <= 0.0 ? -inf : u >= 1.0 ? inf : logit(u); };
  const double x0 = to_x(box.lower[0]);
  const double x1 = to_x(box.upper[0]);
  const double y0 = to_x(box.lower[1]);
  const double y1 = to_x(box.upper[1]);
  if (!(x1 > x0) || !(y1 > y0)) return 0.0;
  auto integrand = [&](double x) {
    const double mu = conditional_mean(x);
    const double hi = std::isinf(y1) ? 1.0 : normal_cdf((y1 - mu) / kYSd);
    const double lo = std::isinf(y0) ? 0.0 : normal_cdf((y0 - mu) / kYSd);
    return normal_pdf(x, 0.0, kXSd) * (hi - lo);
  };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  // the conditional mean has a kink at x = -1
  if (x0 < -1.0 && x1 > -1.0) {
    return Quad::integrate(integrand, x0, -1.0, 15, 1e-12) + Quad::integrate(integrand, -1.0, x1, 15, 1e-12);
  }
  return Quad::integrate(integrand, x0, x1, 15, 1e-12);
}

Schema MixedGenerator::schema(int bins) const {
  Schema s;
  s.bins = bins;
  for (int j = 1; j <= kContinuous; ++j) s.columns.push_back({"Y" + std::to_string(j), ColumnType::continuous, {}});
  s.columns.push_back({"X", ColumnType::categorical, {"a", "b", "c"}});
  return s;
}

RawTable MixedGenerator::sample(std::size_t n, Rng& rng) const {
  static const char* kLevels[3] = {"a", "b", "c"};
  RawTable t;
  for (const auto& c : schema().columns) t.names.push_back(c.name);
  std::discrete_distribution<int> level({kLevelProb[0], kLevelProb[1], kLevelProb[2]});
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int x = level(rng);
    RawRow row;
    std::vector<double> y(kContinuous);
    for (double& v : y) v = z(rng);
    if (x == 0) y[1] = 0.8 * y[0] + 0.6 * y[1];
    for (double v : y) row.emplace_back(v);
    row.emplace_back(std::string(kLevels[x]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

double MixedGenerator::density(const RawRow& row) const {
  if (row.size() != kContinuous + 1) throw std::invalid_argument("mixed rows have nine columns");
  const std::string& x = std::get<std::string>(row[kContinuous]);
  const int level = x == "a" ? 0 : x == "b" ? 1 : x == "c" ? 2 : -1;
  if (level < 0) return 0.0;
  double p = kLevelProb[level];
  const double y1 = std::get<double>(row[0]);
  const double y2 = std::get<double>(row[1]);
  if (level == 0) {
    const double rho = 0.8;
    const double q = (y1 * y1 - 2.0 * rho * y1 * y2 + y2 * y2) / (1.0 - rho * rho);
    p *= std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(1.0 - rho * rho));
  } else {
    p *= normal_pdf(y1, 0.0, 1.0) * normal_pdf(y2, 0.0, 1.0);
  }
  for (int j = 2; j < kContinuous; ++j) p *= normal_pdf(std::get<double>(row[static_cast<std::size_t>(j)]), 0.0, 1.0);
  return p;
}

// ---------------------------------------------------------------------------

double chi_square_sf(double statistic, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("chi-square needs positive degrees of freedom");
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

ChiSquareResult chi_square_gof(std::span<const std::size_t> observed, std::span<const double> probabilities) {
  if (observed.size() != probabilities.size()) throw std::invalid_argument("observed and expected sizes differ");
  const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::size_t{0}));
  ChiSquareResult r;
  int cells = 0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = n * probabilities[k];
    if (e <= 0.0) {
      if (observed[k] > 0) r.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    ++cells;
    const double d = static_cast<double>(observed[k]) - e;
    r.statistic += d * d / e;
  }
  r.dof = cells - 1;
  r.p_value = std::isinf(r.statistic) ? 0.0 : chi_square_sf(r.statistic, r.dof);
  return r;
}

double kolmogorov_sf(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_uniform(std::vector<double> samples) {
  if (samples.empty()) return {};
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = std::clamp(samples[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) return {};
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d)};
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

ChiSquareResult sampler_gof(const TrueDensity& density, std::size_t n, std::uint64_t seed) {
  const int P = density.dimension();
  if (P != 1 && P != 2) throw std::invalid_argument("sampler check supports one or two dimensions");
  const int nx = P == 1 ? 32 : 8;
  const int ny = P == 1 ? 1 : 4;
  std::vector<double> probs;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      Box b;
      b.lower = {static_cast<double>(ix) / nx};
      b.upper = {static_cast<double>(ix + 1) / nx};
      if (P == 2) {
        b.lower.push_back(static_cast<double>(iy) / ny);
        b.upper.push_back(static_cast<double>(iy + 1) / ny);
      }
      probs.push_back(density.box_mass(b));
    }
  }
  Rng rng = make_rng(seed);
  std::vector<std::size_t> counts(probs.size(), 0);
  std::vector<double> u(static_cast<std::size_t>(P));
  for (std::size_t i = 0; i < n; ++i) {
    density.sample(rng, u);
    const int ix = std::min(static_cast<int>(u[0] * nx), nx - 1);
    const int iy = P == 1 ? 0 : std::min(static_cast<int>(u[1] * ny), ny - 1);
    ++counts[static_cast<std::size_t>(ix * ny + iy)];
  }
  return chi_square_gof(counts, probs);
}

double approximation_rmse(const TrueDensity& density, const Segmentation& seg, int grid) {
  const int P = density.dimension();
  if (seg.dimension() != P || (P != 1 && P != 2)) throw std::invalid_argument("approximation error needs P = 1 or 2");
  if (grid < 1) throw std::invalid_argument("grid must be positive");
  std::vector<double> leaf_density(seg.leaf_count());
  const double leaf_volume = std::ldexp(1.0, -seg.depth());
  for (std::size_t j = 0; j < seg.leaf_count(); ++j) leaf_density[j] = density.box_mass(seg.leaf_box(j)) / leaf_volume;
  const int gy = P == 2 ? grid : 1;
  std::vector<double> row(static_cast<std::size_t>(grid));
  parallel_for(
      static_cast<std::size_t>(grid),
      [&](std::size_t ix) {
        double acc = 0.0;
        double u[2] = {(static_cast<double>(ix) + 0.5) / grid, 0.5};
        for (int iy = 0; iy < gy; ++iy) {
          u[1] = (iy + 0.5) / gy;
          const std::span<const double> point(u, static_cast<std::size_t>(P));
          const double d = density.density(point) - leaf_density[seg.leaf_index_unchecked(point)];
          acc += d * d;
        }
        row[ix] = acc;
      },
      64);
  double total = 0.0;
  for (double v : row) total += v;
  return std::sqrt(total / (static_cast<double>(grid) * gy));
}

// ---------------------------------------------------------------------------

PriorCdfStudy run_prior_cdf_study(const PriorCdfConfig& config) {
  if (config.draws < 1 || config.levels < 1 || config.levels > 20) throw std::invalid_argument("prior CDF study needs draws >= 1 and 1 <= L <= 20");
  PriorCdfStudy study;
  study.config = config;
  const std::size_t leaves = std::size_t{1} << config.levels;
  const double uniform = 1.0 / static_cast<double>(leaves);
  for (std::size_t a = 0; a < config.a0.size(); ++a) {
    std::vector<std::vector<double>> curves;
    double dev = 0.0;
    for (int d = 0; d < config.draws; ++d) {
      Rng rng = make_rng(config.seed, a * static_cast<std::size_t>(config.draws) + static_cast<std::size_t>(d));
      const ProbVector pi = pi_from_phi(sample_phi_prior(config.levels, config.a0[a], rng));
      std::vector<double> cdf(leaves + 1, 0.0);
      for (std::size_t k = 0; k < leaves; ++k) {
        cdf[k + 1] = cdf[k] + pi[k];
        dev += std::abs(pi[k] - uniform);
      }
      curves.push_back(std::move(cdf));
    }
    study.cdf.push_back(std::move(curves));
    study.dispersion.push_back(dev / (static_cast<double>(config.draws) * static_cast<double>(leaves)));
  }
  return study;
}

Study1D run_1d_study(const Study1DConfig& config, const PiecewiseDensity1D& density) {
  if (config.runs < 1 || config.m < 1 || config.grid < 1) throw std::invalid_argument("1D study needs runs, m and grid >= 1");
  Study1D study;
  study.config = config;
  const auto G = static_cast<std::size_t>(config.grid);
  for (std::size_t g = 0; g < G; ++g) {
    study.u.push_back((static_cast<double>(g) + 0.5) / static_cast<double>(G));
    study.truth.push_back(density.at(study.u.back()));
  }
  const std::size_t nl = config.levels.size();
  std::vector<Segmentation> segs;
  for (int L : config.levels) segs.emplace_back(std::vector<int>(static_cast<std::size_t>(L), 0), 1);

  // per level: sums of estimate and squared error for hBeta and counts
  using Acc = std::vector<std::vector<double>>;
  const Acc zero(nl * 4, std::vector<double>(G, 0.0));
  const double m = static_cast<double>(config.m);
  Acc acc = blocked_runs(
      config.runs, zero,
      [&](std::size_t run, Acc& a) {
        Rng rng = make_rng(config.seed, run);
        const PointSet data = density.TrueDensity::sample(config.m, rng);
        for (std::size_t k = 0; k < nl; ++k) {
          const Segmentation& seg = segs[k];
          const CountsTree counts = CountsTree::accumulate(data, seg);
          const int L = seg.depth();
          std::vector<double> hbeta(seg.leaf_count());
          for (std::size_t leaf = 0; leaf < seg.leaf_count(); ++leaf) {
            hbeta[leaf] = std::exp(log_conditional_predictive_density(leaf, counts, config.a0));
          }
          for (std::size_t g = 0; g < G; ++g) {
            const double ug = study.u[g];
            const std::size_t leaf = seg.leaf_index_unchecked(std::span<const double>(&ug, 1));
            const double h = hbeta[leaf];
            const double c = std::ldexp(counts.at(L, leaf) / m, L);
            a[4 * k][g] += h;
            a[4 * k + 1][g] += (h - study.truth[g]) * (h - study.truth[g]);
            a[4 * k + 2][g] += c;
            a[4 * k + 3][g] += (c - study.truth[g]) * (c - study.truth[g]);
          }
        }
      },
      [](Acc& total, const Acc& part) {
        for (std::size_t r = 0; r < total.size(); ++r) {
          for (std::size_t g = 0; g < total[r].size(); ++g) total[r][g] += part[r][g];
        }
      });

  const double runs = static_cast<double>(config.runs);
  for (std::size_t k = 0; k < nl; ++k) {
    Curve1D c;
    c.level = segs[k].depth();
    double ratio_sum = 0.0;
    std::size_t ratio_n = 0;
    for (std::size_t g = 0; g < G; ++g) {
      c.mean_hbeta.push_back(acc[4 * k][g] / runs);
      c.rmse_hbeta.push_back(std::sqrt(acc[4 * k + 1][g] / runs));
      c.mean_counts.push_back(acc[4 * k + 2][g] / runs);
      c.rmse_counts.push_back(std::sqrt(acc[4 * k + 3][g] / runs));
      const double ug = study.u[g];
      const std::size_t leaf = segs[k].leaf_index_unchecked(std::span<const double>(&ug, 1));
      const double p = density.box_mass(segs[k].leaf_box(leaf));
      c.rmse_counts_analytic.push_back(std::ldexp(std::sqrt(p * (1.0 - p) / m), c.level));
      c.approximation_error.push_back(study.truth[g] - std::ldexp(p, c.level));
      if (c.rmse_hbeta.back() > 0.0) {
        ratio_sum += c.rmse_counts.back() / c.rmse_hbeta.back();
        ++ratio_n;
      }
    }
    c.mean_ratio = ratio_n ? ratio_sum / static_cast<double>(ratio_n) : 0.0;
    study.curves.push_back(std::move(c));
  }
  return study;
}

std::vector<double> pearson_residuals(std::span<const double> estimate, std::span<const double> truth, std::size_t m) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("estimate and truth sizes differ");
  std::vector<double> r(estimate.size());
  const double sm = std::sqrt(static_cast<double>(m));
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (!(truth[j] > 0.0)) throw std::invalid_argument("Pearson residuals need positive true probabilities");
    r[j] = sm * (estimate[j] - truth[j]) / std::sqrt(truth[j]);
  }
  return r;
}

Study2D run_2d_study(const Study2DConfig& config) {
  if (config.runs < 1 || config.m < 1) throw std::invalid_argument("2D study needs runs and m >= 1");
  Study2D study;
  study.config = config;
  const LogisticDensity2D truth;
  study.segmentations = {Segmentation({0, 0, 0, 0}, 2), Segmentation({1, 1, 1, 1}, 2), Segmentation({0, 0, 1, 1}, 2),
                         Segmentation({1, 1, 0, 0}, 2)};
  const SegmentationFamily family(study.segmentations);
  const std::size_t S = study.segmentations.size();
  std::vector<std::vector<double>> leaf_truth(S);
  for (std::size_t s = 0; s < S; ++s) {
    study.approximation_rmse.push_back(approximation_rmse(truth, study.segmentations[s], config.grid));
    for (std::size_t j = 0; j < study.segmentations[s].leaf_count(); ++j) {
      leaf_truth[s].push_back(truth.box_mass(study.segmentations[s].leaf_box(j)));
    }
  }

  const std::size_t R = config.runs;
  study.chi_square.assign(R, std::vector<double>(S));
  study.mean_abs_residual.assign(R, std::vector<double>(S));
  study.weights.assign(R, std::vector<double>(S));
  study.counts_chi_square.assign(R, std::vector<double>(S));
  parallel_for(
      R,
      [&](std::size_t run) {
        Rng rng = make_rng(config.seed, run);
        const PointSet data = truth.TrueDensity::sample(config.m, rng);
        const PosteriorModel model = PosteriorModel::fit(data, family, config.a0);
        study.weights[run] = model.weights();
        for (std::size_t s = 0; s < S; ++s) {
          const CountsTree& counts = model.counts()[s];
          const int L = counts.depth();
          std::vector<double> hbeta(leaf_truth[s].size());
          std::vector<double> raw(leaf_truth[s].size());
          for (std::size_t j = 0; j < hbeta.size(); ++j) {
            hbeta[j] = std::ldexp(std::exp(log_conditional_predictive_density(j, counts, config.a0)), -L);
            raw[j] = counts.at(L, j) / static_cast<double>(config.m);
          }
          const auto r = pearson_residuals(hbeta, leaf_truth[s], config.m);
          const auto rc = pearson_residuals(raw, leaf_truth[s], config.m);
          double x2 = 0.0;
          double abs_sum = 0.0;
          double xc = 0.0;
          for (std::size_t j = 0; j < r.size(); ++j) {
            x2 += r[j] * r[j];
            abs_sum += std::abs(r[j]);
            xc += rc[j] * rc[j];
          }
          study.chi_square[run][s] = x2;
          study.mean_abs_residual[run][s] = abs_sum / static_cast<double>(r.size());
          study.counts_chi_square[run][s] = xc;
        }
      },
      8);

  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> w;
    std::vector<double> x2;
    for (std::size_t run = 0; run < R; ++run) {
      w.push_back(study.weights[run][s]);
      x2.push_back(study.chi_square[run][s]);
    }
    study.median_weight.push_back(median(w));
    study.median_chi_square.push_back(median(x2));
  }
  return study;
}

SegmentationFamily quantreg_family() { return enumerate_balanced_family(2, {{0, 4}, {1, 4}}); }

QuantregStudy run_quantreg_study(const QuantregConfig& config) {
  if (config.draws_per_segmentation < 0) throw std::invalid_argument("quantreg study needs draws per segmentation >= 0");
  if (config.predictive_samples < 1) throw std::invalid_argument("quantreg study needs predictive samples >= 1");
  QuantregStudy study;
  study.config = config;
  const RegressionDensity2D truth;
  Rng data_rng = make_rng(config.seed, 0);
  study.observations = truth.TrueDensity::sample(config.m, data_rng);
  const SegmentationFamily family = quantreg_family();
  const PosteriorModel model = PosteriorModel::fit(study.observations, family, config.a0);
  Rng mix_rng = make_rng(config.seed, 1);
  const MixtureApproximation mix = build_mixture(model, config.draws_per_segmentation, mix_rng);
  study.predictive = sample_predictive(mix, config.predictive_samples, derived_seed(config.seed, 2));

  const ConditionalGrid grid = ConditionalGrid::from_mixture(mix);
  const double levels[3] = {0.05, 0.5, 0.95};
  study.true_quantiles.assign(3, {});
  study.posterior_quantiles.assign(3, {});
  for (int ix = 0; ix < grid.x_bins(); ++ix) {
    const double x = (ix + 0.5) / grid.x_bins();
    study.column_x.push_back(x);
    for (int q = 0; q < 3; ++q) {
      study.true_quantiles[static_cast<std::size_t>(q)].push_back(truth.conditional_quantile(x, levels[q]));
      study.posterior_quantiles[static_cast<std::size_t>(q)].push_back(grid.quantile(ix, levels[q]));
    }
  }
  study.credible = credible_prediction_set(grid, config.alpha);
  for (std::size_t i = 0; i < study.predictive.points.size(); ++i) {
    if (study.credible.contains(study.predictive.points[i])) ++study.inside_credible;
  }

  if (config.conformal) {
    ConformalConfig cc(family);
    cc.a0 = config.a0;
    cc.draws_per_segmentation = config.conformal_draws;
    cc.seed = derived_seed(config.seed, 3);
    const ConformalPredictor predictor(study.observations, cc);
    study.loo_scores = predictor.leave_one_out_scores(ScoreSide::below);
    study.loo_ks = ks_uniform(study.loo_scores);
    study.conformal = predictor.band(study.column_x, config.conformal_alpha, config.y_grid, config.endpoints);
  }
  return study;
}

SegmentationFamily highdim_family() { return enumerate_subset_family(10, {0, 1, 2, 3, 4, 5, 6, 7}, 2, 4, {9, 8}); }

HighdimStudy run_highdim_study(const HighdimConfig& config) {
  if (config.m < 16 || config.n < 1) throw std::invalid_argument("highdim study needs m >= 16 and n >= 1");
  const MixedGenerator generator;
  Rng data_rng = make_rng(config.seed, 0);
  RawTable training = generator.sample(config.m, data_rng);
  EncodingSpec encoding = EncodingSpec::fit(training, generator.schema());
  const PointSet points = encoding.encode_table(training);
  HighdimStudy study{config, std::move(training), std::move(encoding), highdim_family(), {}, {}, {}, 0, {}, 0, {}, {}};
  const PosteriorModel model = PosteriorModel::fit(points, study.family, config.a0);
  study.log_numerators = model.log_numerators();
  study.best_member = static_cast<std::size_t>(
      std::max_element(study.log_numerators.begin(), study.log_numerators.end()) - study.log_numerators.begin());

  const std::size_t F = study.family.size();
  study.pairs.resize(F);
  study.swapped_log_numerators.resize(F);
  const LogGammaTable table(config.a0, config.m);
  parallel_for(
      F,
      [&](std::size_t i) {
        const auto& dims = study.family[i].dims();
        std::vector<int> rest(dims.begin() + 2, dims.end());
        std::vector<int> chosen(rest);
        std::sort(chosen.begin(), chosen.end());
        chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
        study.pairs[i] = {chosen.front(), chosen.back()};
        rest.push_back(dims[0]);
        rest.push_back(dims[1]);
        const Segmentation swapped(rest, 10);
        study.swapped_log_numerators[i] = log_unnormalized_weight(CountsTree::accumulate(points, swapped), table);
      },
      32);

  // Exact predictive draws; points whose dummies decode to two levels at once
  // are rejected and redrawn.
  Rng decode_rng = make_rng(config.seed, 3);
  study.predictive.names = study.training.names;
  for (std::uint64_t round = 0; study.predictive.rows.size() < config.n; ++round) {
    if (round > 1000) throw std::runtime_error("predictive rejection rate too high");
    const PredictiveSample batch = sample_posterior_predictive(model, config.n, derived_seed(config.seed, 100 + round));
    for (std::size_t i = 0; i < batch.points.size() && study.predictive.rows.size() < config.n; ++i) {
      try {
        study.predictive.rows.push_back(study.encoding.decode(batch.points[i], decode_rng));
      } catch (const InvalidDummyError&) {
        ++study.rejected;
      }
    }
  }

  auto proportions = [](const RawTable& t) {
    std::vector<double> p(3, 0.0);
    for (const auto& row : t.rows) {
      const std::string& x = std::get<std::string>(row.back());
      p[x == "a" ? 0 : x == "b" ? 1 : 2] += 1.0;
    }
    for (double& v : p) v /= static_cast<double>(t.rows.size());
    return p;
  };
  study.training_levels = proportions(study.training);
  study.predictive_levels = proportions(study.predictive);
  return study;
}

}  // namespace polyamix
