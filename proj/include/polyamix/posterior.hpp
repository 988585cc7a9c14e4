#pragma once

// Posterior over a segmentation family: exact weights Pr(d | data) and the
// mixture posterior predictive density.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "polyamix/common.hpp"
#include "polyamix/hbeta.hpp"
#include "polyamix/segmentation.hpp"

namespace polyamix {

/// Cached lgamma(n + a0) and lgamma(n + 2 a0) for integer counts n.
class LogGammaTable {
 public:
  LogGammaTable(double a0, std::size_t max_count);

  double a0() const { return a0_; }
  std::size_t max_count() const { return shifted_.size() - 1; }
  void reserve(std::size_t max_count);

  /// log B(n_left + a0, n_right + a0) - log B(a0, a0); zero when both counts are zero.
  double node_term(std::uint32_t n_left, std::uint32_t n_right) const {
    return shifted_[n_left] + shifted_[n_right] - doubled_[n_left + n_right] - base_;
  }

 private:
  double a0_;
  double base_;
  std::vector<double> shifted_;
  std::vector<double> doubled_;
};

/// log of the unnormalized segmentation posterior: the reciprocal multinomial
/// coefficient of the leaf counts times the beta-binomial chain of the tree.
double log_unnormalized_weight(const CountsTree& counts, double a0);
double log_unnormalized_weight(const CountsTree& counts, const LogGammaTable& table);

class PosteriorModel {
 public:
  static PosteriorModel fit(const PointSet& data, SegmentationFamily family, double a0);
  static PosteriorModel from_counts(SegmentationFamily family, std::vector<CountsTree> counts, double a0);

  const SegmentationFamily& family() const { return *family_; }
  std::shared_ptr<const SegmentationFamily> shared_family() const { return family_; }
  double a0() const { return a0_; }
  std::size_t sample_size() const { return m_; }
  int dimension() const { return family_->dimension(); }

  const std::vector<CountsTree>& counts() const { return counts_; }
  /// log of the unnormalized weights (the numerators of Pr(d | data)).
  const std::vector<double>& log_numerators() const { return log_numerators_; }
  /// Normalized log Pr(d | data).
  const std::vector<double>& log_weights() const { return log_weights_; }
  std::vector<double> weights() const;

  /// Mixture posterior predictive density at u.
  double density(std::span<const double> u) const;

 private:
  PosteriorModel() = default;
  void normalize();

  std::shared_ptr<const SegmentationFamily> family_;
  std::vector<CountsTree> counts_;
  double a0_ = 1.0;
  std::size_t m_ = 0;
  std::vector<double> log_numerators_;
  std::vector<double> log_weights_;
};

/// sum_d Pr(d | data) * conditional_predictive_density(u, N(d), d, a0)
double mixture_predictive_density(std::span<const double> u, const PosteriorModel& model);

/// Mutable copy of a fitted model supporting O(L) per-member point insertion
/// and removal, with the log numerators kept up to date incrementally.
class IncrementalPosterior {
 public:
  explicit IncrementalPosterior(const PosteriorModel& model);

  std::size_t members() const { return counts_.size(); }
  std::size_t sample_size() const { return m_; }
  double a0() const { return table_.a0(); }
  const SegmentationFamily& family() const { return *family_; }
  const CountsTree& counts(std::size_t member) const { return counts_[member]; }

  /// Leaf of u in every member, the unit of add/remove.
  std::vector<std::size_t> leaves(std::span<const double> u) const;

  void add(std::span<const std::size_t> leaves);
  void remove(std::span<const std::size_t> leaves);
  void add_point(std::span<const double> u) { add(leaves(u)); }
  void remove_point(std::span<const double> u) { remove(leaves(u)); }

  const std::vector<double>& log_numerators() const { return log_numerators_; }
  void set_log_numerators(std::vector<double> values);
  std::vector<double> weights() const;

  PosteriorModel snapshot() const;

 private:
  double path_terms(std::size_t member, std::size_t leaf) const;

  std::shared_ptr<const SegmentationFamily> family_;
  std::vector<CountsTree> counts_;
  std::vector<double> log_numerators_;
  std::size_t m_ = 0;
  LogGammaTable table_;
};

}  // namespace polyamix
