#pragma once

// Posterior predictive sampling, region probabilities, conditional quantiles
// and credible prediction sets.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "polyamix/common.hpp"
#include "polyamix/hbeta.hpp"
#include "polyamix/posterior.hpp"
#include "polyamix/segmentation.hpp"

namespace polyamix {

/// Finite mixture approximating the posterior predictive density: for every
/// member d_j, H conjugate-posterior probability vectors, each with weight
/// Pr(d_j | data) / H. H = 0 gives the exact posterior predictive: one
/// component per member holding the posterior mean of pi.
class MixtureApproximation {
 public:
  static MixtureApproximation build(const PosteriorModel& model, int draws_per_segmentation, Rng& rng);

  const SegmentationFamily& family() const { return *family_; }
  int dimension() const { return family_->dimension(); }
  std::size_t members() const { return weights_.size(); }
  int draws_per_segmentation() const { return exact_ ? 0 : draws_; }
  bool exact() const { return exact_; }
  std::size_t components() const { return weights_.size() * static_cast<std::size_t>(draws_); }

  double member_weight(std::size_t j) const { return weights_[j]; }
  const ProbVector& draw(std::size_t j, int h) const { return draws_pi_[j * static_cast<std::size_t>(draws_) + static_cast<std::size_t>(h)]; }
  /// Average of the H draws of member j.
  const std::vector<double>& member_mean(std::size_t j) const { return means_[j]; }

  double density(std::span<const double> u) const;
  /// Exact mass of an axis-aligned box (the density is uniform inside leaves).
  double box_mass(const Box& box) const;

  /// Draws component index (j * H + h), leaf and a uniform point inside the leaf.
  void sample_into(Rng& rng, std::span<double> out, std::size_t& component) const;

 private:
  std::shared_ptr<const SegmentationFamily> family_;
  std::vector<double> weights_;
  int draws_ = 0;
  bool exact_ = false;
  std::vector<ProbVector> draws_pi_;
  std::vector<std::vector<double>> cumulative_;
  std::vector<std::vector<double>> means_;
  std::vector<double> member_cumulative_;
};

MixtureApproximation build_mixture(const PosteriorModel& model, int draws_per_segmentation, Rng& rng);

struct PredictiveSample {
  PointSet points;
  std::uint64_t seed = 0;
  /// Mixture component that produced each point (member * H + draw), or the
  /// member index for exact sampling.
  std::vector<std::size_t> components;
};

PredictiveSample sample_predictive(const MixtureApproximation& mix, std::size_t n, std::uint64_t seed);

/// Exact posterior predictive draws (no Beta-vector approximation): the member
/// is chosen by its weight and each level is descended with probability
/// (N_child + a0) / (N_parent + 2 a0).
PredictiveSample sample_posterior_predictive(const PosteriorModel& model, std::size_t n, std::uint64_t seed);

/// Union of axis-aligned boxes inside the cube.
struct Region {
  std::vector<Box> boxes;
};

struct ProbabilityEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  bool analytic = true;
};

/// Analytic when the boxes are pairwise disjoint, Monte Carlo over
/// `mc_samples` predictive draws otherwise.
ProbabilityEstimate predictive_probability(const Region& region, const MixtureApproximation& mix,
                                           std::uint64_t seed = 0, std::size_t mc_samples = 100000);

/// Piecewise-constant bivariate predictive mass on the common refinement grid
/// of a two-dimensional family (dimension 1 = X, dimension 2 = Y).
class ConditionalGrid {
 public:
  static ConditionalGrid from_mixture(const MixtureApproximation& mix);
  /// Exact posterior predictive masses.
  static ConditionalGrid from_posterior(const PosteriorModel& model);

  int x_bins() const { return nx_; }
  int y_bins() const { return ny_; }
  double mass(int ix, int iy) const { return mass_[static_cast<std::size_t>(ix) * static_cast<std::size_t>(ny_) + static_cast<std::size_t>(iy)]; }
  double column_mass(int ix) const;
  int column_of(double x) const;

  /// Pr(Y <= y | X in column ix), linear inside Y-bins.
  double cdf(int ix, double y) const;
  /// inf { y : cdf(ix, y) >= q }; 0 for q <= 0 and 1 for q >= 1.
  double quantile(int ix, double q) const;

 private:
  ConditionalGrid(int nx, int ny) : nx_(nx), ny_(ny), mass_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0.0) {}
  template <class LeafMass>
  static ConditionalGrid accumulate(const SegmentationFamily& family, LeafMass&& leaf_mass);

  int nx_;
  int ny_;
  std::vector<double> mass_;
};

/// q-quantile of Y given the X-column containing x.
double conditional_quantile(double x, double q, const MixtureApproximation& mix);

struct ColumnInterval {
  double x_lower = 0.0;
  double x_upper = 1.0;
  double y_lower = 0.0;
  double y_upper = 1.0;
};

/// Equal-tail band: in each X-column, Y between the alpha/2 and 1-alpha/2
/// conditional quantiles.
struct CredibleBand {
  double alpha = 0.1;
  std::vector<ColumnInterval> columns;
  /// Predictive mass of the band under the grid it was built from.
  double mass = 0.0;

  Region region() const;
  bool contains(std::span<const double> u) const;
};

CredibleBand credible_prediction_set(const MixtureApproximation& mix, double alpha);
CredibleBand credible_prediction_set(const ConditionalGrid& grid, double alpha);

}  // namespace polyamix
