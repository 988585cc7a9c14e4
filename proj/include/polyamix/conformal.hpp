#pragma once

// Full conformal prediction sets for bivariate data (X = dimension 1,
// Y = dimension 2) with the posterior predictive conditional CDF as
// conformity score.
//
// The score of a point depends on a training set only through the family's
// count trees, and those depend on each point only through its cell of the
// common refinement grid. Swapped training sets are therefore evaluated once
// per (candidate cell, training cell) pair with O(L) incremental count
// updates, and reused for every candidate y inside the same cell.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "polyamix/common.hpp"
#include "polyamix/posterior.hpp"
#include "polyamix/segmentation.hpp"

namespace polyamix {

enum class ScoreSide {
  below,  ///< Pr(U_y <= y | U_x column, data)
  above,  ///< Pr(U_y >= y | U_x column, data)
};

enum class EndpointMode {
  grid_point,    ///< extreme y-grid point with p(y) > alpha
  interpolated,  ///< exact crossing inside the cell of that grid point
};

struct ConformalConfig {
  explicit ConformalConfig(SegmentationFamily family) : family(std::move(family)) {}

  SegmentationFamily family;
  double a0 = 1.0;
  /// Beta vectors per segmentation in the mixture; 0 uses the exact posterior
  /// predictive (the limit of infinitely many draws).
  int draws_per_segmentation = 0;
  /// Mixture draws for every training set use this seed, so scores are
  /// deterministic functions of the count trees.
  std::uint64_t seed = 0;
  ScoreSide side = ScoreSide::below;
};

struct ConformalBand {
  double alpha = 0.1;
  std::vector<double> x_values;
  std::vector<double> y_grid;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> empty;
  /// p-values on y_grid for each x value.
  std::vector<std::vector<double>> pvalues_below;
  std::vector<std::vector<double>> pvalues_above;
};

class ConformalPredictor {
 public:
  ConformalPredictor(const PointSet& train, ConformalConfig config);

  std::size_t sample_size() const { return train_.size(); }
  const ConformalConfig& config() const { return config_; }
  int x_bins() const { return nx_; }
  int y_bins() const { return ny_; }

  /// Conformity score of u against the whole training set.
  double score(std::span<const double> u, ScoreSide side) const;

  /// |{i : a_i <= a_{m+1}}| / (m + 1), with a_i scored on the training set
  /// where point i is replaced by the candidate. Returns 1 when m = 0.
  double pvalue(std::span<const double> candidate, ScoreSide side) const;

  /// Score of each training point against the other m - 1 points.
  std::vector<double> leave_one_out_scores(ScoreSide side) const;

  /// Two-sided band: lower end from the below-score, upper end from the
  /// above-score, each keeping {y : p(y) > alpha}. `y_grid_size` evenly spaced
  /// points on [0,1]; 0 selects the Y-bin boundaries and midpoints.
  ConformalBand band(std::span<const double> x_values, double alpha, std::size_t y_grid_size = 0,
                     EndpointMode mode = EndpointMode::grid_point) const;

 private:
  struct SwappedScores {
    std::vector<double> below;  // sorted
    std::vector<double> above;  // sorted
  };
  struct Group {
    std::size_t cell;
    std::vector<std::size_t> points;
  };

  std::size_t cell_of(std::span<const double> u) const;
  std::span<const std::size_t> cell_leaves(std::size_t cell) const;
  std::vector<double> column_masses(const IncrementalPosterior& state, int ix) const;
  SwappedScores swapped_scores(std::size_t candidate_cell) const;
  double candidate_score(std::span<const double> u, ScoreSide side) const;
  double count_pvalue(const std::vector<double>& sorted, double a) const;

  PointSet train_;
  ConformalConfig config_;
  PosteriorModel base_;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<int> grid_splits_;
  std::vector<std::size_t> leaves_;  // [cell * members + member]
  std::vector<Group> groups_;
  std::vector<std::vector<double>> base_columns_;
};

/// Pr(U_y <= y) for a column with per-Y-bin masses, linear inside bins.
double column_cdf(std::span<const double> masses, double y);

double conformity_score(const PointSet& train, std::span<const double> u, const ConformalConfig& config);
double conformal_pvalue(const PointSet& train, std::span<const double> candidate, const ConformalConfig& config);
ConformalBand conformal_band(const PointSet& train, std::span<const double> x_values, double alpha,
                             std::size_t y_grid_size, const ConformalConfig& config,
                             EndpointMode mode = EndpointMode::grid_point);
std::vector<double> leave_one_out_scores(const PointSet& train, const ConformalConfig& config);

}  // namespace polyamix
