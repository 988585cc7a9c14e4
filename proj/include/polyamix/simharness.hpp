#pragma once

// Ground-truth densities, goodness-of-fit statistics and the scripted
// simulation studies. Every study is a pure function of its config (seed
// included): runs draw from make_rng(seed, run) and are reduced in fixed
// blocks, so results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polyamix/common.hpp"
#include "polyamix/conformal.hpp"
#include "polyamix/encoding.hpp"
#include "polyamix/posterior.hpp"
#include "polyamix/predictive.hpp"
#include "polyamix/segmentation.hpp"

namespace polyamix {

// ---------------------------------------------------------------------------
// True densities

class TrueDensity {
 public:
  virtual ~TrueDensity() = default;
  virtual std::string name() const = 0;
  virtual int dimension() const = 0;
  virtual double density(std::span<const double> u) const = 0;
  virtual void sample(Rng& rng, std::span<double> out) const = 0;
  /// Probability of an axis-aligned box.
  virtual double box_mass(const Box& box) const = 0;

  PointSet sample(std::size_t n, Rng& rng) const;
};

/// Density linear from `start` at `lo` to `end` at `hi`.
struct LinearPiece {
  double lo = 0.0;
  double hi = 1.0;
  double start = 1.0;
  double end = 1.0;
};

/// Piecewise-linear density on [0,1] (constant pieces have start == end).
class PiecewiseDensity1D final : public TrueDensity {
 public:
  explicit PiecewiseDensity1D(std::vector<LinearPiece> pieces);
  /// 0.4 on [0, 1/4), 1.6 on [1/4, 1/2), rising linearly from 0.4 to 1.6 on [1/2, 1].
  static PiecewiseDensity1D standard();

  std::string name() const override { return "piecewise1d"; }
  int dimension() const override { return 1; }
  double density(std::span<const double> u) const override { return at(u[0]); }
  void sample(Rng& rng, std::span<double> out) const override;
  double box_mass(const Box& box) const override { return cdf(box.upper[0]) - cdf(box.lower[0]); }

  double at(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;
  const std::vector<LinearPiece>& pieces() const { return pieces_; }

 private:
  std::vector<LinearPiece> pieces_;
  std::vector<double> cum_;  // mass before each piece
};

/// 2 * logistic(20 (u_x - 1/2)), uniform in u_y.
class LogisticDensity2D final : public TrueDensity {
 public:
  std::string name() const override { return "logistic2d"; }
  int dimension() const override { return 2; }
  double density(std::span<const double> u) const override;
  void sample(Rng& rng, std::span<double> out) const override;
  double box_mass(const Box& box) const override;
  /// Marginal CDF of u_x.
  double x_cdf(double x) const;
};

/// U_x = logistic(X), X ~ N(0, sd 2); U_y = logistic(Y) with
/// Y | X = x ~ N(-0.9, sd 0.5) for x < -1 and N(0.9 x, sd 0.5) otherwise.
class RegressionDensity2D final : public TrueDensity {
 public:
  static constexpr double kXSd = 2.0;
  static constexpr double kYSd = 0.5;

  std::string name() const override { return "regression2d"; }
  int dimension() const override { return 2; }
  double density(std::span<const double> u) const override;
  void sample(Rng& rng, std::span<double> out) const override;
  double box_mass(const Box& box) const override;

  static double conditional_mean(double x) { return x < -1.0 ? -0.9 : 0.9 * x; }
  /// Pr(U_y <= y | U_x = x).
  double conditional_cdf(double ux, double uy) const;
  double conditional_quantile(double ux, double q) const;
};

/// Raw mixed data: X in {a, b, c} with probabilities 0.5, 0.3, 0.2 and
/// Y_1..Y_8 ~ N(0, I) given X, except cov(Y_1, Y_2) = 0.8 when X = a.
class MixedGenerator {
 public:
  static constexpr int kContinuous = 8;

  Schema schema(int bins = 16) const;
  RawTable sample(std::size_t n, Rng& rng) const;
  /// Joint density of a raw row (Y_1..Y_8, X).
  double density(const RawRow& row) const;
  static constexpr double kLevelProb[3] = {0.5, 0.3, 0.2};
};

// ---------------------------------------------------------------------------
// Statistics

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double dof);
/// Pearson goodness of fit of `observed` counts against cell probabilities.
ChiSquareResult chi_square_gof(std::span<const std::size_t> observed, std::span<const double> probabilities);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);
/// One-sample KS test against U[0,1] (Stephens' small-sample correction).
KsResult ks_uniform(std::vector<double> samples);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

double median(std::vector<double> values);

/// Sampler/evaluator consistency: chi-square of n draws on a 32-cell grid
/// (32 bins in 1D, 8 x 4 in 2D) against the density's exact cell masses.
ChiSquareResult sampler_gof(const TrueDensity& density, std::size_t n, std::uint64_t seed);

/// sqrt of int (pi(u) - f(u; d, pi_L))^2 du on a `grid`^2 midpoint grid,
/// where f is the leaf-average step approximation of pi on d.
double approximation_rmse(const TrueDensity& density, const Segmentation& seg, int grid = 1024);

// ---------------------------------------------------------------------------
// Studies

struct PriorCdfConfig {
  std::vector<double> a0 = {0.1, 1.0, 10.0};
  int draws = 50;
  int levels = 10;
  std::uint64_t seed = 1;
};

struct PriorCdfStudy {
  PriorCdfConfig config;
  /// cdf[a][draw][k] = F(k / 2^L), k = 0..2^L.
  std::vector<std::vector<std::vector<double>>> cdf;
  /// Mean |pi_L - 2^-L| per a0.
  std::vector<double> dispersion;
};

PriorCdfStudy run_prior_cdf_study(const PriorCdfConfig& config);

struct Study1DConfig {
  std::size_t m = 50;
  double a0 = 1.0;
  std::size_t runs = 500;
  std::vector<int> levels = {10, 5, 3};
  int grid = 1024;
  std::uint64_t seed = 1;
};

struct Curve1D {
  int level = 0;
  std::vector<double> mean_hbeta;
  std::vector<double> rmse_hbeta;
  std::vector<double> mean_counts;
  std::vector<double> rmse_counts;
  /// 2^L sqrt(pi_bin (1 - pi_bin) / m), the analytic interval-counts error.
  std::vector<double> rmse_counts_analytic;
  /// pi(u) minus its bin average.
  std::vector<double> approximation_error;
  /// Grid average of rmse_counts / rmse_hbeta.
  double mean_ratio = 0.0;
};

struct Study1D {
  Study1DConfig config;
  std::vector<double> u;
  std::vector<double> truth;
  std::vector<Curve1D> curves;
};

Study1D run_1d_study(const Study1DConfig& config, const PiecewiseDensity1D& density = PiecewiseDensity1D::standard());

struct Study2DConfig {
  std::size_t m = 50;
  double a0 = 1.0;
  std::size_t runs = 500;
  int grid = 1024;
  std::uint64_t seed = 1;
};

struct Study2D {
  Study2DConfig config;
  /// The four depth-4 segmentations (X,X,X,X), (Y,Y,Y,Y), (X,X,Y,Y), (Y,Y,X,X).
  std::vector<Segmentation> segmentations;
  std::vector<double> approximation_rmse;
  /// [run][segmentation]
  std::vector<std::vector<double>> chi_square;
  std::vector<std::vector<double>> mean_abs_residual;
  std::vector<std::vector<double>> weights;
  /// Interval-counts baseline per run (same segmentation order).
  std::vector<std::vector<double>> counts_chi_square;
  std::vector<double> median_weight;
  std::vector<double> median_chi_square;
};

/// Pearson residuals sqrt(m) (p_hat - p) / sqrt(p) of the leaf probabilities.
std::vector<double> pearson_residuals(std::span<const double> estimate, std::span<const double> truth, std::size_t m);

Study2D run_2d_study(const Study2DConfig& config);

struct QuantregConfig {
  std::size_t m = 100;
  double a0 = 1.0;
  /// Beta vectors per segmentation in the mixture; 0 = exact posterior mean.
  int draws_per_segmentation = 50;
  std::size_t predictive_samples = 2000;
  /// Credible band level (equal tails).
  double alpha = 0.10;
  /// Per-side level of the conformal band.
  double conformal_alpha = 0.05;
  /// Beta draws per segmentation inside conformal scores; 0 = exact.
  int conformal_draws = 0;
  std::size_t y_grid = 0;
  EndpointMode endpoints = EndpointMode::grid_point;
  bool conformal = true;
  std::uint64_t seed = 1;
};

struct QuantregStudy {
  QuantregConfig config;
  PointSet observations;
  PredictiveSample predictive;
  std::vector<double> column_x;  // column midpoints
  std::vector<std::vector<double>> true_quantiles;       // [q][column], q = .05, .5, .95
  std::vector<std::vector<double>> posterior_quantiles;  // [q][column]
  CredibleBand credible;
  std::size_t inside_credible = 0;
  std::vector<double> loo_scores;
  KsResult loo_ks;
  ConformalBand conformal;
};

/// The 70-member family of depth-8 orderings with four X and four Y splits.
SegmentationFamily quantreg_family();

QuantregStudy run_quantreg_study(const QuantregConfig& config);

struct HighdimConfig {
  std::size_t m = 400;
  std::size_t n = 1000;
  double a0 = 1.0;
  std::uint64_t seed = 1;
};

struct HighdimStudy {
  HighdimConfig config;
  RawTable training;
  EncodingSpec encoding;
  SegmentationFamily family;
  std::vector<double> log_numerators;
  /// Chosen continuous pair (0-based) of each member.
  std::vector<std::pair<int, int>> pairs;
  /// log numerator of the ordering with the two dummy splits moved to the end.
  std::vector<double> swapped_log_numerators;
  std::size_t best_member = 0;
  RawTable predictive;
  std::size_t rejected = 0;
  std::vector<double> training_levels;    // proportions of a, b, c
  std::vector<double> predictive_levels;  // proportions of a, b, c
};

/// 1960 members: prefix (U_10, U_9), then 4 splits each of two of U_1..U_8.
SegmentationFamily highdim_family();

HighdimStudy run_highdim_study(const HighdimConfig& config);

}  // namespace polyamix
