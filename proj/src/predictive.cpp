#include "polyamix/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace polyamix {

namespace {

std::size_t pick_cumulative(const std::vector<double>& cumulative, double r) {
  // first index whose cumulative mass exceeds r * total
  const double target = r * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) --it;
  // skip zero-mass entries reached through ties at the top
  while (it != cumulative.begin() && *it == *(it - 1)) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

void uniform_in_box(const Box& box, Rng& rng, std::span<double> out) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = box.lower[k] + unif(rng) * (box.upper[k] - box.lower[k]);
}

void check_box(const Box& box, int dim) {
  if (box.dim() != dim || static_cast<int>(box.upper.size()) != dim) {
    throw std::invalid_argument("region box has the wrong dimension");
  }
  for (int k = 0; k < dim; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    if (!(box.lower[kk] >= 0.0 && box.upper[kk] <= 1.0 && box.lower[kk] <= box.upper[kk])) {
      throw std::invalid_argument("region box must satisfy 0 <= lower <= upper <= 1");
    }
  }
}

}  // namespace

MixtureApproximation MixtureApproximation::build(const PosteriorModel& model, int draws_per_segmentation, Rng& rng) {
  if (draws_per_segmentation < 0) throw std::invalid_argument("draws per segmentation must be >= 0");
  MixtureApproximation mix;
  mix.family_ = model.shared_family();
  mix.weights_ = model.weights();
  mix.exact_ = draws_per_segmentation == 0;
  mix.draws_ = std::max(1, draws_per_segmentation);
  const std::size_t members = mix.weights_.size();
  mix.draws_pi_.reserve(members * static_cast<std::size_t>(mix.draws_));
  mix.cumulative_.reserve(mix.draws_pi_.capacity());
  mix.means_.reserve(members);
  for (std::size_t j = 0; j < members; ++j) {
    std::vector<double> mean(model.family()[j].leaf_count(), 0.0);
    for (int h = 0; h < mix.draws_; ++h) {
      ProbVector pi;
      if (mix.exact_) {
        // posterior mean of pi, the limit of infinitely many draws
        const CountsTree& counts = model.counts()[j];
        pi.leaf.resize(mean.size());
        for (std::size_t k = 0; k < mean.size(); ++k) {
          pi.leaf[k] = std::ldexp(std::exp(log_conditional_predictive_density(k, counts, model.a0())), -counts.depth());
        }
      } else {
        pi = pi_from_phi(sample_phi_posterior(model.counts()[j], model.a0(), rng));
      }
      std::vector<double> cum(pi.size());
      double acc = 0.0;
      for (std::size_t k = 0; k < pi.size(); ++k) {
        acc += pi[k];
        cum[k] = acc;
        mean[k] += pi[k];
      }
      mix.draws_pi_.push_back(std::move(pi));
      mix.cumulative_.push_back(std::move(cum));
    }
    for (double& v : mean) v /= mix.draws_;
    mix.means_.push_back(std::move(mean));
  }
  mix.member_cumulative_.resize(members);
  double acc = 0.0;
  for (std::size_t j = 0; j < members; ++j) mix.member_cumulative_[j] = (acc += mix.weights_[j]);
  return mix;
}

MixtureApproximation build_mixture(const PosteriorModel& model, int draws_per_segmentation, Rng& rng) {
  return MixtureApproximation::build(model, draws_per_segmentation, rng);
}

double MixtureApproximation::density(std::span<const double> u) const {
  check_in_cube(u, dimension());
  double acc = 0.0;
  for (std::size_t j = 0; j < members(); ++j) {
    const Segmentation& seg = (*family_)[j];
    acc += weights_[j] * std::ldexp(means_[j][seg.leaf_index_unchecked(u)], seg.depth());
  }
  return acc;
}

double MixtureApproximation::box_mass(const Box& box) const {
  check_box(box, dimension());
  double acc = 0.0;
  for (std::size_t j = 0; j < members(); ++j) {
    const Segmentation& seg = (*family_)[j];
    const double leaf_volume = std::ldexp(1.0, -seg.depth());
    double member = 0.0;
    for (std::size_t leaf = 0; leaf < seg.leaf_count(); ++leaf) {
      const double frac = seg.leaf_box(leaf).overlap(box) / leaf_volume;
      if (frac > 0.0) member += frac * means_[j][leaf];
    }
    acc += weights_[j] * member;
  }
  return acc;
}

void MixtureApproximation::sample_into(Rng& rng, std::span<double> out, std::size_t& component) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t j = pick_cumulative(member_cumulative_, unif(rng));
  std::uniform_int_distribution<int> pick_draw(0, draws_ - 1);
  const int h = pick_draw(rng);
  component = j * static_cast<std::size_t>(draws_) + static_cast<std::size_t>(h);
  const std::size_t leaf = pick_cumulative(cumulative_[component], unif(rng));
  uniform_in_box((*family_)[j].leaf_box(leaf), rng, out);
}

PredictiveSample sample_predictive(const MixtureApproximation& mix, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("predictive sample size must be >= 1");
  Rng rng = make_rng(seed);
  PredictiveSample sample{PointSet(mix.dimension()), seed, {}};
  sample.points.reserve(n);
  sample.components.reserve(n);
  std::vector<double> u(static_cast<std::size_t>(mix.dimension()));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t component = 0;
    mix.sample_into(rng, u, component);
    sample.points.push_back(u);
    sample.components.push_back(component);
  }
  return sample;
}

PredictiveSample sample_posterior_predictive(const PosteriorModel& model, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("predictive sample size must be >= 1");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto weights = model.weights();
  std::vector<double> cumulative(weights.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) cumulative[j] = (acc += weights[j]);

  PredictiveSample sample{PointSet(model.dimension()), seed, {}};
  sample.points.reserve(n);
  sample.components.reserve(n);
  std::vector<double> u(static_cast<std::size_t>(model.dimension()));
  const double a0 = model.a0();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = pick_cumulative(cumulative, unif(rng));
    const CountsTree& counts = model.counts()[j];
    std::size_t node = 0;
    for (int l = 1; l <= counts.depth(); ++l) {
      const double parent = counts.at(l - 1, node);
      const double left = counts.at(l, 2 * node);
      node = 2 * node + (unif(rng) < (left + a0) / (parent + 2.0 * a0) ? 0 : 1);
    }
    uniform_in_box(model.family()[j].leaf_box(node), rng, u);
    sample.points.push_back(u);
    sample.components.push_back(j);
  }
  return sample;
}

ProbabilityEstimate predictive_probability(const Region& region, const MixtureApproximation& mix, std::uint64_t seed,
                                           std::size_t mc_samples) {
  if (region.boxes.empty()) throw std::invalid_argument("region has no boxes");
  for (const Box& b : region.boxes) check_box(b, mix.dimension());
  bool disjoint = true;
  for (std::size_t a = 0; a < region.boxes.size() && disjoint; ++a) {
    for (std::size_t b = a + 1; b < region.boxes.size(); ++b) {
      if (region.boxes[a].overlap(region.boxes[b]) > 0.0) {
        disjoint = false;
        break;
      }
    }
  }
  if (disjoint) {
    double p = 0.0;
    for (const Box& b : region.boxes) p += mix.box_mass(b);
    return {std::min(1.0, p), 0.0, true};
  }
  if (mc_samples < 1) throw std::invalid_argument("Monte Carlo sample size must be >= 1");
  Rng rng = make_rng(seed);
  std::vector<double> u(static_cast<std::size_t>(mix.dimension()));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    std::size_t component = 0;
    mix.sample_into(rng, u, component);
    for (const Box& b : region.boxes) {
      if (b.contains(u)) {
        ++hits;
        break;
      }
    }
  }
  const double n = static_cast<double>(mc_samples);
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n), false};
}

template <class LeafMass>
ConditionalGrid ConditionalGrid::accumulate(const SegmentationFamily& family, LeafMass&& leaf_mass) {
  if (family.dimension() != 2) throw std::invalid_argument("conditional quantities need a two-dimensional family");
  const auto splits = family.common_splits();
  ConditionalGrid grid(1 << splits[0], 1 << splits[1]);
  for (std::size_t j = 0; j < family.size(); ++j) {
    const Segmentation& seg = family[j];
    const int sx = splits[0] - seg.splits(0);
    const int sy = splits[1] - seg.splits(1);
    const int wx = 1 << sx;
    const int wy = 1 << sy;
    const double share = 1.0 / (static_cast<double>(wx) * wy);
    for (std::size_t leaf = 0; leaf < seg.leaf_count(); ++leaf) {
      const auto cell = seg.leaf_cell(leaf);
      const double m = leaf_mass(j, leaf) * share;
      for (int ix = 0; ix < wx; ++ix) {
        for (int iy = 0; iy < wy; ++iy) {
          const auto gx = static_cast<std::size_t>((cell[0] << sx) + static_cast<std::uint64_t>(ix));
          const auto gy = static_cast<std::size_t>((cell[1] << sy) + static_cast<std::uint64_t>(iy));
          grid.mass_[gx * static_cast<std::size_t>(grid.ny_) + gy] += m;
        }
      }
    }
  }
  return grid;
}

ConditionalGrid ConditionalGrid::from_mixture(const MixtureApproximation& mix) {
  return accumulate(mix.family(), [&](std::size_t j, std::size_t leaf) {
    return mix.member_weight(j) * mix.member_mean(j)[leaf];
  });
}

ConditionalGrid ConditionalGrid::from_posterior(const PosteriorModel& model) {
  return accumulate(model.family(), [&](std::size_t j, std::size_t leaf) {
    const int L = model.family()[j].depth();
    return std::exp(model.log_weights()[j] + log_conditional_predictive_density(leaf, model.counts()[j], model.a0()) -
                    L * std::log(2.0));
  });
}

double ConditionalGrid::column_mass(int ix) const {
  double acc = 0.0;
  for (int iy = 0; iy < ny_; ++iy) acc += mass(ix, iy);
  return acc;
}

int ConditionalGrid::column_of(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range("x value outside [0,1]");
  return std::min(static_cast<int>(std::floor(x * nx_)), nx_ - 1);
}

double ConditionalGrid::cdf(int ix, double y) const {
  if (!(y >= 0.0 && y <= 1.0)) throw std::out_of_range("y value outside [0,1]");
  const double total = column_mass(ix);
  if (!(total > 0.0)) throw std::domain_error("conditional mass is zero in this X-column");
  const double scaled = y * ny_;
  const int by = std::min(static_cast<int>(std::floor(scaled)), ny_ - 1);
  double acc = 0.0;
  for (int iy = 0; iy < by; ++iy) acc += mass(ix, iy);
  acc += (scaled - by) * mass(ix, by);
  return std::min(1.0, acc / total);
}

double ConditionalGrid::quantile(int ix, double q) const {
  const double total = column_mass(ix);
  if (!(total > 0.0)) throw std::domain_error("conditional mass is zero in this X-column");
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return 1.0;
  const double target = q * total;
  double cum = 0.0;
  for (int iy = 0; iy < ny_; ++iy) {
    const double m = mass(ix, iy);
    if (m > 0.0 && cum + m >= target) {
      const double frac = std::clamp((target - cum) / m, 0.0, 1.0);
      return (iy + frac) / ny_;
    }
    cum += m;
  }
  return 1.0;
}

double conditional_quantile(double x, double q, const MixtureApproximation& mix) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
  const auto grid = ConditionalGrid::from_mixture(mix);
  return grid.quantile(grid.column_of(x), q);
}

Region CredibleBand::region() const {
  Region r;
  for (const auto& c : columns) {
    if (c.y_upper > c.y_lower) r.boxes.push_back(Box{{c.x_lower, c.y_lower}, {c.x_upper, c.y_upper}});
  }
  return r;
}

bool CredibleBand::contains(std::span<const double> u) const {
  if (u.size() != 2 || columns.empty()) return false;
  const int n = static_cast<int>(columns.size());
  const int ix = std::clamp(static_cast<int>(std::floor(u[0] * n)), 0, n - 1);
  const auto& c = columns[static_cast<std::size_t>(ix)];
  return u[1] >= c.y_lower && u[1] <= c.y_upper;
}

CredibleBand credible_prediction_set(const ConditionalGrid& grid, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0,1)");
  CredibleBand band;
  band.alpha = alpha;
  double total = 0.0;
  for (int ix = 0; ix < grid.x_bins(); ++ix) total += grid.column_mass(ix);
  for (int ix = 0; ix < grid.x_bins(); ++ix) {
    ColumnInterval c;
    c.x_lower = static_cast<double>(ix) / grid.x_bins();
    c.x_upper = static_cast<double>(ix + 1) / grid.x_bins();
    c.y_lower = grid.quantile(ix, 0.5 * alpha);
    c.y_upper = grid.quantile(ix, 1.0 - 0.5 * alpha);
    band.mass += grid.column_mass(ix) / total * (grid.cdf(ix, c.y_upper) - grid.cdf(ix, c.y_lower));
    band.columns.push_back(c);
  }
  return band;
}

CredibleBand credible_prediction_set(const MixtureApproximation& mix, double alpha) {
  return credible_prediction_set(ConditionalGrid::from_mixture(mix), alpha);
}

}  // namespace polyamix
