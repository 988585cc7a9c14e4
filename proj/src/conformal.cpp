#include "polyamix/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include "polyamix/parallel.hpp"

namespace polyamix {

namespace {

// Counter-based generator: every Beta node draw gets its own stream keyed by
// (seed, member, draw, node), so a node's value does not depend on which
// column asked for it first.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return mix_seed(state_ += 0x9e3779b97f4a7c15ULL); }

 private:
  std::uint64_t state_;
};

template <class Engine>
double log_gamma_variate(double shape, Engine& eng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(eng));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(eng);
  while (u <= 0.0) u = unif(eng);
  return std::log(std::gamma_distribution<double>(shape + 1.0, 1.0)(eng)) + std::log(u) / shape;
}

template <class Engine>
double beta_variate(double a, double b, Engine& eng) {
  const double la = log_gamma_variate(a, eng);
  const double lb = log_gamma_variate(b, eng);
  const double hi = std::max(la, lb);
  return std::exp(la - hi) / (std::exp(la - hi) + std::exp(lb - hi));
}

}  // namespace

double column_cdf(std::span<const double> masses, double y) {
  double total = 0.0;
  for (double m : masses) total += m;
  if (!(total > 0.0)) throw std::domain_error("conditional mass is zero in this X-column");
  const int ny = static_cast<int>(masses.size());
  const double scaled = std::clamp(y, 0.0, 1.0) * ny;
  const int by = std::min(static_cast<int>(std::floor(scaled)), ny - 1);
  double acc = 0.0;
  for (int iy = 0; iy < by; ++iy) acc += masses[static_cast<std::size_t>(iy)];
  acc += (scaled - by) * masses[static_cast<std::size_t>(by)];
  return std::min(1.0, acc / total);
}

ConformalPredictor::ConformalPredictor(const PointSet& train, ConformalConfig config)
    : train_(train),
      config_(std::move(config)),
      base_(PosteriorModel::fit(train.empty() ? PointSet(2) : train, config_.family, config_.a0)) {
  if (config_.family.dimension() != 2) throw std::invalid_argument("conformal sets need a two-dimensional family");
  if (!train.empty() && train.dim() != 2) throw std::invalid_argument("training points must be two-dimensional");
  if (config_.draws_per_segmentation < 0) throw std::invalid_argument("draws per segmentation must be >= 0");
  if (train_.empty()) train_ = PointSet(2);
  grid_splits_ = config_.family.common_splits();
  nx_ = 1 << grid_splits_[0];
  ny_ = 1 << grid_splits_[1];

  const std::size_t members = config_.family.size();
  const std::size_t cells = static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  leaves_.resize(cells * members);
  for (std::size_t c = 0; c < cells; ++c) {
    const std::uint64_t cell[2] = {c / static_cast<std::size_t>(ny_), c % static_cast<std::size_t>(ny_)};
    for (std::size_t j = 0; j < members; ++j) leaves_[c * members + j] = config_.family[j].leaf_of_cell(cell, grid_splits_);
  }

  std::map<std::size_t, std::vector<std::size_t>> by_cell;
  for (std::size_t i = 0; i < train_.size(); ++i) by_cell[cell_of(train_[i])].push_back(i);
  for (auto& [cell, points] : by_cell) groups_.push_back({cell, std::move(points)});

  const IncrementalPosterior base_state(base_);
  base_columns_.resize(static_cast<std::size_t>(nx_));
  for (int ix = 0; ix < nx_; ++ix) base_columns_[static_cast<std::size_t>(ix)] = column_masses(base_state, ix);
}

std::size_t ConformalPredictor::cell_of(std::span<const double> u) const {
  check_in_cube(u, 2);
  const auto ix = static_cast<std::size_t>(std::min(static_cast<int>(std::floor(u[0] * nx_)), nx_ - 1));
  const auto iy = static_cast<std::size_t>(std::min(static_cast<int>(std::floor(u[1] * ny_)), ny_ - 1));
  return ix * static_cast<std::size_t>(ny_) + iy;
}

std::span<const std::size_t> ConformalPredictor::cell_leaves(std::size_t cell) const {
  const std::size_t members = config_.family.size();
  return {leaves_.data() + cell * members, members};
}

std::vector<double> ConformalPredictor::column_masses(const IncrementalPosterior& state, int ix) const {
  const std::size_t members = state.members();
  const auto weights = state.weights();
  const double a0 = state.a0();
  std::vector<double> masses(static_cast<std::size_t>(ny_), 0.0);
  const std::size_t first = static_cast<std::size_t>(ix) * static_cast<std::size_t>(ny_);
  const int H = config_.draws_per_segmentation;

  for (std::size_t j = 0; j < members; ++j) {
    if (weights[j] == 0.0) continue;
    const CountsTree& counts = state.counts(j);
    const int L = counts.depth();
    if (H == 0) {
      for (int iy = 0; iy < ny_; ++iy) {
        const std::size_t leaf = leaves_[(first + static_cast<std::size_t>(iy)) * members + j];
        masses[static_cast<std::size_t>(iy)] += weights[j] * std::exp(log_conditional_predictive_density(leaf, counts, a0));
      }
      continue;
    }
    // Monte Carlo mixture: phi drawn lazily at the nodes this column touches.
    const std::size_t nodes = (std::size_t{1} << L) - 1;
    std::vector<double> phi(nodes);
    std::vector<char> drawn(nodes);
    for (int h = 0; h < H; ++h) {
      std::fill(drawn.begin(), drawn.end(), 0);
      const std::uint64_t key = mix_seed(config_.seed ^ mix_seed((j << 20) + static_cast<std::uint64_t>(h)));
      for (int iy = 0; iy < ny_; ++iy) {
        const std::size_t leaf = leaves_[(first + static_cast<std::size_t>(iy)) * members + j];
        double pi = 1.0;
        for (int l = 1; l <= L; ++l) {
          const std::size_t parent = leaf >> (L - l + 1);
          const std::size_t slot = ((std::size_t{1} << (l - 1)) - 1) + parent;
          if (!drawn[slot]) {
            SplitMix64 eng(key + mix_seed(slot + 1));
            phi[slot] = beta_variate(a0 + counts.at(l, 2 * parent), a0 + counts.at(l, 2 * parent + 1), eng);
            drawn[slot] = 1;
          }
          pi *= ((leaf >> (L - l)) & 1U) ? 1.0 - phi[slot] : phi[slot];
        }
        masses[static_cast<std::size_t>(iy)] += weights[j] / H * std::ldexp(pi, L);
      }
    }
  }
  return masses;
}

double ConformalPredictor::score(std::span<const double> u, ScoreSide side) const {
  const std::size_t cell = cell_of(u);
  const double below = column_cdf(base_columns_[cell / static_cast<std::size_t>(ny_)], u[1]);
  return side == ScoreSide::below ? below : 1.0 - below;
}

double ConformalPredictor::candidate_score(std::span<const double> u, ScoreSide side) const { return score(u, side); }

ConformalPredictor::SwappedScores ConformalPredictor::swapped_scores(std::size_t candidate_cell) const {
  SwappedScores out;
  out.below.reserve(train_.size());
  out.above.reserve(train_.size());
  IncrementalPosterior state(base_);
  state.add(cell_leaves(candidate_cell));
  const std::vector<double> saved = state.log_numerators();
  for (const Group& g : groups_) {
    const int ix = static_cast<int>(g.cell / static_cast<std::size_t>(ny_));
    std::vector<double> masses;
    if (g.cell == candidate_cell) {
      // Swapping within a cell leaves every count tree unchanged.
      masses = base_columns_[static_cast<std::size_t>(ix)];
    } else {
      state.remove(cell_leaves(g.cell));
      masses = column_masses(state, ix);
      state.add(cell_leaves(g.cell));
      state.set_log_numerators(saved);
    }
    for (std::size_t i : g.points) {
      const double below = column_cdf(masses, train_[i][1]);
      out.below.push_back(below);
      out.above.push_back(1.0 - below);
    }
  }
  std::sort(out.below.begin(), out.below.end());
  std::sort(out.above.begin(), out.above.end());
  return out;
}

double ConformalPredictor::count_pvalue(const std::vector<double>& sorted, double a) const {
  const auto count = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), a) - sorted.begin());
  return count / static_cast<double>(sorted.size() + 1);
}

double ConformalPredictor::pvalue(std::span<const double> candidate, ScoreSide side) const {
  const std::size_t cell = cell_of(candidate);
  if (train_.empty()) return 1.0;
  const SwappedScores s = swapped_scores(cell);
  const double a = candidate_score(candidate, side);
  return count_pvalue(side == ScoreSide::below ? s.below : s.above, a);
}

std::vector<double> ConformalPredictor::leave_one_out_scores(ScoreSide side) const {
  std::vector<double> scores(train_.size());
  if (train_.empty()) return scores;
  IncrementalPosterior state(base_);
  const std::vector<double> saved = state.log_numerators();
  for (const Group& g : groups_) {
    const int ix = static_cast<int>(g.cell / static_cast<std::size_t>(ny_));
    state.remove(cell_leaves(g.cell));
    const auto masses = column_masses(state, ix);
    state.add(cell_leaves(g.cell));
    state.set_log_numerators(saved);
    for (std::size_t i : g.points) {
      const double below = column_cdf(masses, train_[i][1]);
      scores[i] = side == ScoreSide::below ? below : 1.0 - below;
    }
  }
  return scores;
}

ConformalBand ConformalPredictor::band(std::span<const double> x_values, double alpha, std::size_t y_grid_size,
                                       EndpointMode mode) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (y_grid_size == 1) throw std::invalid_argument("the y grid needs at least two points");
  if (y_grid_size == 0) y_grid_size = 2 * static_cast<std::size_t>(ny_) + 1;

  ConformalBand band;
  band.alpha = alpha;
  band.x_values.assign(x_values.begin(), x_values.end());
  for (std::size_t k = 0; k < y_grid_size; ++k) band.y_grid.push_back(static_cast<double>(k) / static_cast<double>(y_grid_size - 1));
  const std::size_t nx = band.x_values.size();
  band.lower.assign(nx, 0.0);
  band.upper.assign(nx, 1.0);
  band.empty.assign(nx, false);
  band.pvalues_below.assign(nx, {});
  band.pvalues_above.assign(nx, {});
  for (double x : band.x_values) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range("x value outside [0,1]");
  }

  // Swapped scores for every cell in the columns that are asked for; each
  // column is an independent work item.
  std::vector<int> columns;
  for (double x : band.x_values) columns.push_back(std::min(static_cast<int>(std::floor(x * nx_)), nx_ - 1));
  std::vector<int> distinct(columns);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::vector<SwappedScores>> cache(distinct.size());
  if (!train_.empty()) {
    parallel_for(
        distinct.size(),
        [&](std::size_t c) {
          cache[c].resize(static_cast<std::size_t>(ny_));
          for (int iy = 0; iy < ny_; ++iy) {
            const std::size_t cell = static_cast<std::size_t>(distinct[c]) * static_cast<std::size_t>(ny_) + static_cast<std::size_t>(iy);
            cache[c][static_cast<std::size_t>(iy)] = swapped_scores(cell);
          }
        },
        1);
  }

  const double m1 = static_cast<double>(train_.size() + 1);
  // p > alpha  <=>  at least r swapped scores are <= the candidate score
  const auto r = static_cast<std::size_t>(std::floor(alpha * m1)) + 1;

  for (std::size_t q = 0; q < nx; ++q) {
    const int ix = columns[q];
    const std::size_t c = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), ix) - distinct.begin());
    const auto& masses = base_columns_[static_cast<std::size_t>(ix)];
    auto& pb = band.pvalues_below[q];
    auto& pa = band.pvalues_above[q];
    for (double y : band.y_grid) {
      if (train_.empty()) {
        pb.push_back(1.0);
        pa.push_back(1.0);
        continue;
      }
      const int iy = std::min(static_cast<int>(std::floor(y * ny_)), ny_ - 1);
      const auto& s = cache[c][static_cast<std::size_t>(iy)];
      const double below = column_cdf(masses, y);
      pb.push_back(count_pvalue(s.below, below));
      pa.push_back(count_pvalue(s.above, 1.0 - below));
    }

    std::size_t lo = y_grid_size;
    for (std::size_t k = 0; k < y_grid_size; ++k) {
      if (pb[k] > alpha) {
        lo = k;
        break;
      }
    }
    std::size_t hi = y_grid_size;
    for (std::size_t k = y_grid_size; k-- > 0;) {
      if (pa[k] > alpha) {
        hi = k;
        break;
      }
    }
    if (lo == y_grid_size || hi == y_grid_size || lo > hi) {
      band.empty[q] = true;
      band.lower[q] = band.upper[q] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double lower = band.y_grid[lo];
    double upper = band.y_grid[hi];
    if (mode == EndpointMode::interpolated && !train_.empty()) {
      double total = 0.0;
      for (double v : masses) total += v;
      auto cum_before = [&](int iy) {
        double acc = 0.0;
        for (int b = 0; b < iy; ++b) acc += masses[static_cast<std::size_t>(b)];
        return acc;
      };
      if (lo > 0) {
        // below-score rises linearly inside the cell; solve score = threshold
        const int iy = std::min(static_cast<int>(std::floor(lower * ny_)), ny_ - 1);
        const auto& s = cache[c][static_cast<std::size_t>(iy)].below;
        const double cell_lo = static_cast<double>(iy) / ny_;
        double y = cell_lo;
        const double mass = masses[static_cast<std::size_t>(iy)];
        if (r <= s.size() && mass > 0.0) {
          y = (iy + (s[r - 1] * total - cum_before(iy)) / mass) / ny_;
        }
        lower = std::clamp(y, std::max(cell_lo, band.y_grid[lo - 1]), lower);
      }
      if (hi + 1 < y_grid_size) {
        // above-score falls linearly; solve 1 - cdf = threshold
        const int iy = upper >= 1.0 ? ny_ - 1 : std::min(static_cast<int>(std::floor(upper * ny_)), ny_ - 1);
        const auto& s = cache[c][static_cast<std::size_t>(iy)].above;
        const double cell_hi = static_cast<double>(iy + 1) / ny_;
        double y = cell_hi;
        const double mass = masses[static_cast<std::size_t>(iy)];
        if (r <= s.size() && mass > 0.0) {
          y = (iy + ((1.0 - s[r - 1]) * total - cum_before(iy)) / mass) / ny_;
        }
        upper = std::clamp(y, upper, std::min(cell_hi, band.y_grid[hi + 1]));
      }
    }
    band.lower[q] = lower;
    band.upper[q] = upper;
  }
  return band;
}

double conformity_score(const PointSet& train, std::span<const double> u, const ConformalConfig& config) {
  return ConformalPredictor(train, config).score(u, config.side);
}

double conformal_pvalue(const PointSet& train, std::span<const double> candidate, const ConformalConfig& config) {
  return ConformalPredictor(train, config).pvalue(candidate, config.side);
}

ConformalBand conformal_band(const PointSet& train, std::span<const double> x_values, double alpha,
                             std::size_t y_grid_size, const ConformalConfig& config, EndpointMode mode) {
  return ConformalPredictor(train, config).band(x_values, alpha, y_grid_size, mode);
}

std::vector<double> leave_one_out_scores(const PointSet& train, const ConformalConfig& config) {
  return ConformalPredictor(train, config).leave_one_out_scores(config.side);
}

}  // namespace polyamix
