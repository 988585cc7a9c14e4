#include "polyamix/posterior.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "polyamix/parallel.hpp"

namespace polyamix {

namespace {

void check_a0(double a0) {
  if (!(a0 > 0.0) || !std::isfinite(a0)) {
    throw std::invalid_argument("a0 must be a positive finite number, got " + std::to_string(a0));
  }
}

}  // namespace

LogGammaTable::LogGammaTable(double a0, std::size_t max_count) : a0_(a0) {
  check_a0(a0);
  base_ = 2.0 * std::lgamma(a0) - std::lgamma(2.0 * a0);
  reserve(max_count);
}

void LogGammaTable::reserve(std::size_t max_count) {
  const std::size_t old = shifted_.size();
  if (max_count + 1 <= old) return;
  shifted_.resize(max_count + 1);
  doubled_.resize(max_count + 1);
  for (std::size_t n = old; n <= max_count; ++n) {
    shifted_[n] = std::lgamma(static_cast<double>(n) + a0_);
    doubled_[n] = std::lgamma(static_cast<double>(n) + 2.0 * a0_);
  }
}

double log_unnormalized_weight(const CountsTree& counts, const LogGammaTable& table) {
  if (counts.total() > table.max_count()) throw std::invalid_argument("log-gamma table too small for counts");
  // The binomial coefficients of the beta-binomial chain telescope to
  // m! / prod_j N_{L,j}!, cancelling the reciprocal multinomial coefficient;
  // what remains is a Beta-function ratio per occupied internal node.
  const int L = counts.depth();
  double acc = 0.0;
  struct Node {
    int level;
    std::size_t index;
  };
  std::vector<Node> stack;
  stack.reserve(static_cast<std::size_t>(2 * L + 2));
  stack.push_back({0, 0});
  while (!stack.empty()) {
    const Node node = stack.back();
    stack.pop_back();
    if (node.level == L || counts.at(node.level, node.index) == 0) continue;
    const std::uint32_t left = counts.at(node.level + 1, 2 * node.index);
    const std::uint32_t right = counts.at(node.level + 1, 2 * node.index + 1);
    acc += table.node_term(left, right);
    if (left) stack.push_back({node.level + 1, 2 * node.index});
    if (right) stack.push_back({node.level + 1, 2 * node.index + 1});
  }
  return acc;
}

double log_unnormalized_weight(const CountsTree& counts, double a0) {
  return log_unnormalized_weight(counts, LogGammaTable(a0, counts.total()));
}

PosteriorModel PosteriorModel::fit(const PointSet& data, SegmentationFamily family, double a0) {
  check_a0(a0);
  check_in_cube(data, family.dimension());
  std::vector<CountsTree> counts(family.size(), CountsTree(family.depth()));
  parallel_for(family.size(), [&](std::size_t i) { counts[i] = CountsTree::accumulate(data, family[i]); }, 8);
  return from_counts(std::move(family), std::move(counts), a0);
}

PosteriorModel PosteriorModel::from_counts(SegmentationFamily family, std::vector<CountsTree> counts, double a0) {
  check_a0(a0);
  if (counts.size() != family.size()) throw std::invalid_argument("one counts tree per family member is required");
  PosteriorModel model;
  model.m_ = counts.front().total();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].depth() != family[i].depth()) throw std::invalid_argument("counts tree depth mismatch");
    if (counts[i].total() != model.m_) throw std::invalid_argument("counts trees disagree on the sample size");
  }
  model.family_ = std::make_shared<const SegmentationFamily>(std::move(family));
  model.counts_ = std::move(counts);
  model.a0_ = a0;
  const LogGammaTable table(a0, model.m_);
  model.log_numerators_.assign(model.counts_.size(), 0.0);
  parallel_for(model.counts_.size(),
               [&](std::size_t i) { model.log_numerators_[i] = log_unnormalized_weight(model.counts_[i], table); }, 8);
  model.normalize();
  return model;
}

void PosteriorModel::normalize() {
  const double total = log_sum_exp(log_numerators_);
  log_weights_.resize(log_numerators_.size());
  for (std::size_t i = 0; i < log_numerators_.size(); ++i) log_weights_[i] = log_numerators_[i] - total;
}

std::vector<double> PosteriorModel::weights() const {
  std::vector<double> w(log_weights_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights_[i]);
  return w;
}

double PosteriorModel::density(std::span<const double> u) const {
  check_in_cube(u, dimension());
  double acc = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const std::size_t leaf = (*family_)[i].leaf_index_unchecked(u);
    acc += std::exp(log_weights_[i] + log_conditional_predictive_density(leaf, counts_[i], a0_));
  }
  return acc;
}

double mixture_predictive_density(std::span<const double> u, const PosteriorModel& model) {
  return model.density(u);
}

IncrementalPosterior::IncrementalPosterior(const PosteriorModel& model)
    : family_(model.shared_family()),
      counts_(model.counts()),
      log_numerators_(model.log_numerators()),
      m_(model.sample_size()),
      table_(model.a0(), model.sample_size() + 1) {}

std::vector<std::size_t> IncrementalPosterior::leaves(std::span<const double> u) const {
  check_in_cube(u, family_->dimension());
  std::vector<std::size_t> out(family_->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*family_)[i].leaf_index_unchecked(u);
  return out;
}

double IncrementalPosterior::path_terms(std::size_t member, std::size_t leaf) const {
  const CountsTree& c = counts_[member];
  const int L = c.depth();
  double acc = 0.0;
  for (int l = 0; l < L; ++l) {
    const std::size_t node = leaf >> (L - l);
    acc += table_.node_term(c.at(l + 1, 2 * node), c.at(l + 1, 2 * node + 1));
  }
  return acc;
}

void IncrementalPosterior::add(std::span<const std::size_t> leaves) {
  if (leaves.size() != counts_.size()) throw std::invalid_argument("one leaf per family member is required");
  table_.reserve(m_ + 1);
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const double before = path_terms(i, leaves[i]);
    counts_[i].add_leaf(leaves[i]);
    log_numerators_[i] += path_terms(i, leaves[i]) - before;
  }
  ++m_;
}

void IncrementalPosterior::remove(std::span<const std::size_t> leaves) {
  if (leaves.size() != counts_.size()) throw std::invalid_argument("one leaf per family member is required");
  if (m_ == 0) throw std::logic_error("removing a point from an empty model");
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const double before = path_terms(i, leaves[i]);
    counts_[i].remove_leaf(leaves[i]);
    log_numerators_[i] += path_terms(i, leaves[i]) - before;
  }
  --m_;
}

void IncrementalPosterior::set_log_numerators(std::vector<double> values) {
  if (values.size() != log_numerators_.size()) throw std::invalid_argument("log numerator count mismatch");
  log_numerators_ = std::move(values);
}

std::vector<double> IncrementalPosterior::weights() const {
  const double total = log_sum_exp(log_numerators_);
  std::vector<double> w(log_numerators_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_numerators_[i] - total);
  return w;
}

PosteriorModel IncrementalPosterior::snapshot() const {
  return PosteriorModel::from_counts(*family_, counts_, table_.a0());
}

}  // namespace polyamix
