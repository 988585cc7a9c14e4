#pragma once

// Hierarchical Beta (finite Polya tree) model on one segmentation.
//
// Node (l, j), l = 1..L, j < 2^(l-1), carries phi = Pr(left child | parent)
// and splits subinterval (l-1, j) into (l, 2j) and (l, 2j+1). Every phi has
// the symmetric prior Beta(a0, a0).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "polyamix/common.hpp"
#include "polyamix/segmentation.hpp"

namespace polyamix {

/// Observation counts N_{l,j} for l = 0..L, j < 2^l, stored level by level.
class CountsTree {
 public:
  explicit CountsTree(int depth);

  static CountsTree accumulate(const PointSet& points, const Segmentation& seg);
  /// Rebuilds a tree from explicit per-level counts; validates the parent-sum law.
  static CountsTree from_levels(const std::vector<std::vector<std::uint32_t>>& levels);
  /// Tree whose leaf counts are `leaves` (size 2^L); inner levels are summed.
  static CountsTree from_leaves(std::span<const std::uint32_t> leaves);

  int depth() const { return depth_; }
  std::uint32_t total() const { return counts_[0]; }

  std::uint32_t at(int level, std::size_t index) const { return counts_[offset(level) + index]; }
  std::span<const std::uint32_t> level(int l) const {
    return {counts_.data() + offset(l), std::size_t{1} << l};
  }

  void add_leaf(std::size_t leaf);
  /// Throws std::logic_error if the leaf is empty.
  void remove_leaf(std::size_t leaf);

  /// True when N_{l-1,j} = N_{l,2j} + N_{l,2j+1} at every node.
  bool consistent() const;

  friend bool operator==(const CountsTree&, const CountsTree&) = default;

 private:
  static std::size_t offset(int level) { return (std::size_t{1} << level) - 1; }

  int depth_;
  std::vector<std::uint32_t> counts_;
};

/// Conditional left-child probabilities phi at every internal node.
class BetaTree {
 public:
  explicit BetaTree(int depth);

  int depth() const { return depth_; }
  /// phi of node j at level l (1..L); it splits subinterval (l-1, j).
  double at(int level, std::size_t j) const { return phi_[offset(level) + j]; }
  double& at(int level, std::size_t j) { return phi_[offset(level) + j]; }

 private:
  static std::size_t offset(int level) { return (std::size_t{1} << (level - 1)) - 1; }

  int depth_;
  std::vector<double> phi_;
};

/// Level-L subinterval probabilities pi_{L,j}.
struct ProbVector {
  std::vector<double> leaf;

  std::size_t size() const { return leaf.size(); }
  double operator[](std::size_t j) const { return leaf[j]; }
};

/// Beta(a, b) draw via two Gamma variates in log space, stable for shapes well below 1.
double sample_beta(double a, double b, Rng& rng);

BetaTree sample_phi_prior(int depth, double a0, Rng& rng);
/// phi_{l,j} ~ Beta(a0 + N_{l,2j}, a0 + N_{l,2j+1}) independently.
BetaTree sample_phi_posterior(const CountsTree& counts, double a0, Rng& rng);

ProbVector pi_from_phi(const BetaTree& phi);

/// 2^L * pi_{L, leaf(u)}.
double step_density(std::span<const double> u, const Segmentation& seg, const ProbVector& pi);

/// Posterior predictive density given one segmentation's counts:
///   2^L' * prod_{l=1..L'} (N_{l,j'(l)} + a0) / (N_{l-1,j'(l-1)} + 2 a0)
/// where L' is the deepest occupied level on the path of u. Equals 1 for m = 0.
double conditional_predictive_density(std::span<const double> u, const CountsTree& counts,
                                      const Segmentation& seg, double a0);

/// log of the above for a known leaf.
double log_conditional_predictive_density(std::size_t leaf, const CountsTree& counts, double a0);

}  // namespace polyamix
