#include "polyamix/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polyamix/common.hpp"

namespace polyamix {

namespace {

inline std::uint64_t cell_coordinate(double u, int splits) {
  const std::uint64_t n = std::uint64_t{1} << splits;
  // scaling by a power of two is exact, so the cell boundaries are exact dyadic rationals
  const auto c = static_cast<std::uint64_t>(std::floor(std::ldexp(u, splits)));
  return c < n ? c : n - 1;
}

}  // namespace

double Box::volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < lower.size(); ++k) v *= upper[k] - lower[k];
  return v;
}

std::vector<double> Box::center() const {
  std::vector<double> c(lower.size());
  for (std::size_t k = 0; k < lower.size(); ++k) c[k] = 0.5 * (lower[k] + upper[k]);
  return c;
}

bool Box::contains(std::span<const double> u) const {
  if (u.size() != lower.size()) return false;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k] < lower[k] || u[k] > upper[k]) return false;
  }
  return true;
}

double Box::overlap(const Box& other) const {
  double v = 1.0;
  for (std::size_t k = 0; k < lower.size(); ++k) {
    const double lo = std::max(lower[k], other.lower[k]);
    const double hi = std::min(upper[k], other.upper[k]);
    if (hi <= lo) return 0.0;
    v *= hi - lo;
  }
  return v;
}

Box Box::unit(int dim) {
  return Box{std::vector<double>(static_cast<std::size_t>(dim), 0.0),
             std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
}

Segmentation::Segmentation(std::vector<int> dims, int dimension)
    : dims_(std::move(dims)), dimension_(dimension) {
  if (dimension_ < 1) throw std::invalid_argument("segmentation: dimension must be >= 1");
  if (dims_.empty()) throw std::invalid_argument("segmentation: empty dimension ordering");
  if (depth() > kMaxDepth) {
    throw std::invalid_argument("segmentation: depth " + std::to_string(depth()) + " exceeds " +
                                std::to_string(kMaxDepth));
  }
  total_splits_.assign(static_cast<std::size_t>(dimension_), 0);
  split_rank_.reserve(dims_.size());
  for (int d : dims_) {
    if (d < 0 || d >= dimension_) {
      throw std::invalid_argument("segmentation: dimension index " + std::to_string(d + 1) +
                                  " outside 1.." + std::to_string(dimension_));
    }
    split_rank_.push_back(total_splits_[static_cast<std::size_t>(d)]++);
  }
}

Segmentation Segmentation::from_one_based(std::span<const int> dims, int dimension) {
  std::vector<int> zero_based(dims.begin(), dims.end());
  for (int& d : zero_based) --d;
  return Segmentation(std::move(zero_based), dimension);
}

std::vector<int> Segmentation::one_based() const {
  std::vector<int> out(dims_);
  for (int& d : out) ++d;
  return out;
}

std::size_t Segmentation::leaf_index(std::span<const double> u) const {
  check_in_cube(u, dimension_);
  return leaf_index_unchecked(u);
}

std::size_t Segmentation::leaf_index_unchecked(std::span<const double> u) const {
  std::size_t leaf = 0;
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    const int k = dims_[l];
    const int s = total_splits_[static_cast<std::size_t>(k)];
    const std::uint64_t c = cell_coordinate(u[static_cast<std::size_t>(k)], s);
    leaf = (leaf << 1) | static_cast<std::size_t>((c >> (s - 1 - split_rank_[l])) & 1U);
  }
  return leaf;
}

std::size_t Segmentation::leaf_of_cell(std::span<const std::uint64_t> cell,
                                       std::span<const int> grid_splits) const {
  std::size_t leaf = 0;
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    const auto k = static_cast<std::size_t>(dims_[l]);
    leaf = (leaf << 1) | static_cast<std::size_t>((cell[k] >> (grid_splits[k] - 1 - split_rank_[l])) & 1U);
  }
  return leaf;
}

std::vector<std::uint64_t> Segmentation::leaf_cell(std::size_t leaf) const {
  std::vector<std::uint64_t> cell(static_cast<std::size_t>(dimension_), 0);
  const int L = depth();
  for (int l = 0; l < L; ++l) {
    const auto k = static_cast<std::size_t>(dims_[static_cast<std::size_t>(l)]);
    cell[k] = (cell[k] << 1) | ((leaf >> (L - 1 - l)) & 1U);
  }
  return cell;
}

SubintervalPath Segmentation::locate(std::span<const double> u) const {
  const std::size_t leaf = leaf_index(u);
  SubintervalPath path;
  const int L = depth();
  path.indices.reserve(static_cast<std::size_t>(L));
  path.boxes.reserve(static_cast<std::size_t>(L));
  for (int l = 1; l <= L; ++l) {
    const std::size_t idx = leaf >> (L - l);
    path.indices.push_back(idx);
    path.boxes.push_back(box(l, idx));
  }
  return path;
}

Box Segmentation::box(int level, std::size_t index) const {
  if (level < 0 || level > depth()) throw std::out_of_range("segmentation: level out of range");
  if (index >= (std::size_t{1} << level)) throw std::out_of_range("segmentation: subinterval index out of range");
  Box b = Box::unit(dimension_);
  for (int l = 1; l <= level; ++l) {
    const auto k = static_cast<std::size_t>(dims_[static_cast<std::size_t>(l - 1)]);
    const double mid = 0.5 * (b.lower[k] + b.upper[k]);
    if ((index >> (level - l)) & 1U) {
      b.lower[k] = mid;
    } else {
      b.upper[k] = mid;
    }
  }
  return b;
}

std::string Segmentation::label() const {
  static constexpr char kAxes[] = {'X', 'Y', 'Z'};
  std::string out = "(";
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    if (l) out += ',';
    if (dimension_ <= 3) {
      out += kAxes[dims_[l]];
    } else {
      out += std::to_string(dims_[l] + 1);
    }
  }
  return out + ")";
}

SegmentationFamily::SegmentationFamily(std::vector<Segmentation> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("segmentation family is empty");
  for (const auto& s : members_) {
    if (s.dimension() != members_.front().dimension() || s.depth() != members_.front().depth()) {
      throw std::invalid_argument("segmentation family members must share dimension and depth");
    }
  }
  std::vector<const Segmentation*> sorted;
  sorted.reserve(members_.size());
  for (const auto& s : members_) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return *a < *b; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (*sorted[i] == *sorted[i - 1]) {
      throw std::invalid_argument("segmentation family has duplicate member " + sorted[i]->label());
    }
  }
}

std::vector<int> SegmentationFamily::common_splits() const {
  std::vector<int> out(static_cast<std::size_t>(dimension()), 0);
  for (const auto& s : members_) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::max(out[k], s.split_counts()[k]);
  }
  return out;
}

SegmentationFamily enumerate_balanced_family(int dimension, const std::map<int, int>& splits,
                                             const std::vector<int>& prefix) {
  if (dimension < 1) throw std::invalid_argument("balanced family: dimension must be >= 1");
  std::vector<int> multiset;
  for (auto [dim, count] : splits) {
    if (dim < 0 || dim >= dimension) {
      throw std::invalid_argument("balanced family: dimension index " + std::to_string(dim + 1) + " out of range");
    }
    if (count < 0) throw std::invalid_argument("balanced family: negative split count");
    multiset.insert(multiset.end(), static_cast<std::size_t>(count), dim);
  }
  if (multiset.empty() && prefix.empty()) {
    throw std::invalid_argument("balanced family: split counts and prefix are all empty");
  }
  std::sort(multiset.begin(), multiset.end());
  std::vector<Segmentation> members;
  do {
    std::vector<int> dims(prefix);
    dims.insert(dims.end(), multiset.begin(), multiset.end());
    members.emplace_back(std::move(dims), dimension);
  } while (std::next_permutation(multiset.begin(), multiset.end()));
  return SegmentationFamily(std::move(members));
}

SegmentationFamily enumerate_subset_family(int dimension, const std::vector<int>& candidates, int choose,
                                           int splits_each, const std::vector<int>& prefix) {
  const int n = static_cast<int>(candidates.size());
  if (choose < 1 || choose > n) throw std::invalid_argument("subset family: choose must be in 1..#candidates");
  if (splits_each < 1) throw std::invalid_argument("subset family: splits_each must be >= 1");
  std::vector<int> pick(static_cast<std::size_t>(choose));
  for (int i = 0; i < choose; ++i) pick[static_cast<std::size_t>(i)] = i;
  std::vector<Segmentation> members;
  while (true) {
    std::map<int, int> splits;
    for (int i : pick) splits[candidates[static_cast<std::size_t>(i)]] = splits_each;
    auto group = enumerate_balanced_family(dimension, splits, prefix);
    members.insert(members.end(), group.begin(), group.end());
    // advance to the next combination in lexicographic order
    int pos = choose - 1;
    while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == n - choose + pos) --pos;
    if (pos < 0) break;
    ++pick[static_cast<std::size_t>(pos)];
    for (int i = pos + 1; i < choose; ++i) pick[static_cast<std::size_t>(i)] = pick[static_cast<std::size_t>(i - 1)] + 1;
  }
  return SegmentationFamily(std::move(members));
}

}  // namespace polyamix
