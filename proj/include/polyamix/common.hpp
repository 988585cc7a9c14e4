#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace polyamix {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t x);

/// Generator for an independent stream `stream` under a master `seed`.
/// Streams are derived by hashing, so (seed, stream) pairs never share state.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Row-major collection of points of a fixed dimension.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(int dim);
  PointSet(int dim, std::vector<double> values);

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return values_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {values_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  void push_back(std::span<const double> u);
  void reserve(std::size_t n) { values_.reserve(n * static_cast<std::size_t>(dim_)); }
  const std::vector<double>& values() const { return values_; }

 private:
  int dim_ = 0;
  std::vector<double> values_;
};

/// Throws std::out_of_range unless u has `dim` coordinates, all in [0,1].
void check_in_cube(std::span<const double> u, int dim);

/// Throws std::out_of_range unless every point of `points` lies in [0,1]^dim.
void check_in_cube(const PointSet& points, int dim);

/// log(sum(exp(x))) without overflow; -inf for an empty range.
double log_sum_exp(std::span<const double> x);

}  // namespace polyamix
