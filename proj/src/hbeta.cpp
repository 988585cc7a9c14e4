#include "polyamix/hbeta.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace polyamix {

namespace {

void check_a0(double a0) {
  if (!(a0 > 0.0) || !std::isfinite(a0)) {
    throw std::invalid_argument("a0 must be a positive finite number, got " + std::to_string(a0));
  }
}

void check_depth(int depth) {
  if (depth < 1 || depth > Segmentation::kMaxDepth) {
    throw std::invalid_argument("tree depth must be in 1.." + std::to_string(Segmentation::kMaxDepth));
  }
}

// log of a Gamma(shape, 1) variate; Gamma(a) = Gamma(a + 1) * U^(1/a) for small shapes
double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    return std::log(gamma(rng));
  }
  std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double v = unif(rng);
  while (v <= 0.0) v = unif(rng);
  return std::log(gamma(rng)) + std::log(v) / shape;
}

}  // namespace

CountsTree::CountsTree(int depth) : depth_(depth) {
  check_depth(depth);
  counts_.assign((std::size_t{1} << (depth + 1)) - 1, 0);
}

CountsTree CountsTree::accumulate(const PointSet& points, const Segmentation& seg) {
  CountsTree tree(seg.depth());
  check_in_cube(points, seg.dimension());
  for (std::size_t i = 0; i < points.size(); ++i) tree.add_leaf(seg.leaf_index_unchecked(points[i]));
  return tree;
}

CountsTree CountsTree::from_levels(const std::vector<std::vector<std::uint32_t>>& levels) {
  if (levels.size() < 2) throw std::invalid_argument("counts tree needs levels 0..L with L >= 1");
  CountsTree tree(static_cast<int>(levels.size()) - 1);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (levels[l].size() != (std::size_t{1} << l)) {
      throw std::invalid_argument("counts tree level " + std::to_string(l) + " must have " +
                                  std::to_string(std::size_t{1} << l) + " entries");
    }
    std::copy(levels[l].begin(), levels[l].end(), tree.counts_.begin() + static_cast<std::ptrdiff_t>(offset(static_cast<int>(l))));
  }
  if (!tree.consistent()) throw std::invalid_argument("counts tree violates the parent-sum law");
  return tree;
}

CountsTree CountsTree::from_leaves(std::span<const std::uint32_t> leaves) {
  int depth = 0;
  while ((std::size_t{1} << depth) < leaves.size()) ++depth;
  if ((std::size_t{1} << depth) != leaves.size() || depth < 1) {
    throw std::invalid_argument("leaf count vector length must be a power of two >= 2");
  }
  CountsTree tree(depth);
  std::copy(leaves.begin(), leaves.end(), tree.counts_.begin() + static_cast<std::ptrdiff_t>(offset(depth)));
  for (int l = depth - 1; l >= 0; --l) {
    for (std::size_t j = 0; j < (std::size_t{1} << l); ++j) {
      tree.counts_[offset(l) + j] = tree.counts_[offset(l + 1) + 2 * j] + tree.counts_[offset(l + 1) + 2 * j + 1];
    }
  }
  return tree;
}

void CountsTree::add_leaf(std::size_t leaf) {
  for (int l = 0; l <= depth_; ++l) ++counts_[offset(l) + (leaf >> (depth_ - l))];
}

void CountsTree::remove_leaf(std::size_t leaf) {
  if (counts_[offset(depth_) + leaf] == 0) throw std::logic_error("counts tree: removing from an empty leaf");
  for (int l = 0; l <= depth_; ++l) --counts_[offset(l) + (leaf >> (depth_ - l))];
}

bool CountsTree::consistent() const {
  for (int l = 0; l < depth_; ++l) {
    for (std::size_t j = 0; j < (std::size_t{1} << l); ++j) {
      if (at(l, j) != at(l + 1, 2 * j) + at(l + 1, 2 * j + 1)) return false;
    }
  }
  return true;
}

BetaTree::BetaTree(int depth) : depth_(depth) {
  check_depth(depth);
  phi_.assign((std::size_t{1} << depth) - 1, 0.5);
}

double sample_beta(double a, double b, Rng& rng) {
  if (!(a > 0.0 && b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("Beta shapes must be positive and finite");
  }
  const double lx = log_gamma_variate(a, rng);
  const double ly = log_gamma_variate(b, rng);
  return 1.0 / (1.0 + std::exp(ly - lx));
}

BetaTree sample_phi_prior(int depth, double a0, Rng& rng) {
  check_a0(a0);
  BetaTree tree(depth);
  for (int l = 1; l <= depth; ++l) {
    for (std::size_t j = 0; j < (std::size_t{1} << (l - 1)); ++j) tree.at(l, j) = sample_beta(a0, a0, rng);
  }
  return tree;
}

BetaTree sample_phi_posterior(const CountsTree& counts, double a0, Rng& rng) {
  check_a0(a0);
  BetaTree tree(counts.depth());
  for (int l = 1; l <= counts.depth(); ++l) {
    for (std::size_t j = 0; j < (std::size_t{1} << (l - 1)); ++j) {
      tree.at(l, j) = sample_beta(a0 + counts.at(l, 2 * j), a0 + counts.at(l, 2 * j + 1), rng);
    }
  }
  return tree;
}

ProbVector pi_from_phi(const BetaTree& phi) {
  const int L = phi.depth();
  std::vector<double> current{1.0};
  for (int l = 1; l <= L; ++l) {
    std::vector<double> next(std::size_t{1} << l);
    for (std::size_t j = 0; j < current.size(); ++j) {
      const double p = phi.at(l, j);
      next[2 * j] = p * current[j];
      next[2 * j + 1] = (1.0 - p) * current[j];
    }
    current = std::move(next);
  }
  return ProbVector{std::move(current)};
}

double step_density(std::span<const double> u, const Segmentation& seg, const ProbVector& pi) {
  if (pi.size() != seg.leaf_count()) throw std::invalid_argument("probability vector does not match segmentation depth");
  return std::ldexp(pi[seg.leaf_index(u)], seg.depth());
}

double log_conditional_predictive_density(std::size_t leaf, const CountsTree& counts, double a0) {
  const int L = counts.depth();
  double acc = 0.0;
  for (int l = 1; l <= L; ++l) {
    const std::uint32_t parent = counts.at(l - 1, leaf >> (L - l + 1));
    // below an empty node every factor is 2 * a0 / (2 a0) = 1
    if (parent == 0) break;
    const std::uint32_t node = counts.at(l, leaf >> (L - l));
    acc += std::numbers::ln2 + std::log(node + a0) - std::log(parent + 2.0 * a0);
  }
  return acc;
}

double conditional_predictive_density(std::span<const double> u, const CountsTree& counts,
                                      const Segmentation& seg, double a0) {
  check_a0(a0);
  if (counts.depth() != seg.depth()) throw std::invalid_argument("counts tree does not match segmentation depth");
  return std::exp(log_conditional_predictive_density(seg.leaf_index(u), counts, a0));
}

}  // namespace polyamix
