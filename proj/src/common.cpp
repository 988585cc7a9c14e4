#include "polyamix/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace polyamix {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = mix_seed(seed);
  const std::uint64_t b = mix_seed(a ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

PointSet::PointSet(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("PointSet: dimension must be >= 1");
}

PointSet::PointSet(int dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
  if (dim < 1) throw std::invalid_argument("PointSet: dimension must be >= 1");
  if (values_.size() % static_cast<std::size_t>(dim) != 0) {
    throw std::invalid_argument("PointSet: value count is not a multiple of the dimension");
  }
}

void PointSet::push_back(std::span<const double> u) {
  if (static_cast<int>(u.size()) != dim_) {
    throw std::invalid_argument("PointSet: point has " + std::to_string(u.size()) +
                                " coordinates, expected " + std::to_string(dim_));
  }
  values_.insert(values_.end(), u.begin(), u.end());
}

void check_in_cube(std::span<const double> u, int dim) {
  if (static_cast<int>(u.size()) != dim) {
    throw std::out_of_range("point has " + std::to_string(u.size()) + " coordinates, expected " +
                            std::to_string(dim));
  }
  for (std::size_t k = 0; k < u.size(); ++k) {
    // also rejects NaN
    if (!(u[k] >= 0.0 && u[k] <= 1.0)) {
      throw std::out_of_range("coordinate " + std::to_string(k + 1) + " = " + std::to_string(u[k]) +
                              " lies outside [0,1]");
    }
  }
}

void check_in_cube(const PointSet& points, int dim) {
  if (points.empty()) return;
  if (points.dim() != dim) {
    throw std::out_of_range("points have dimension " + std::to_string(points.dim()) + ", expected " +
                            std::to_string(dim));
  }
  for (std::size_t i = 0; i < points.size(); ++i) check_in_cube(points[i], dim);
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - top);
  return top + std::log(acc);
}

}  // namespace polyamix
