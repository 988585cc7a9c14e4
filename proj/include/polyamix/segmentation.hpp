#pragma once

// Dyadic segmentations of the unit cube [0,1]^P.
//
// A segmentation of depth L halves the cube L times. Level l splits every
// level l-1 subinterval along the same coordinate dims()[l-1]; the child
// holding the small values of that coordinate comes first. Subinterval
// indices are 0-based: the children of (l-1, j) are (l, 2j) and (l, 2j+1).
//
// Split intervals are half-open [lo, mid) / [mid, hi), except that the faces
// touching 1.0 are closed, so every point of [0,1]^P has exactly one leaf.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace polyamix {

/// Axis-aligned box [lower, upper] in [0,1]^P.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const;
  std::vector<double> center() const;
  /// Closed containment test.
  bool contains(std::span<const double> u) const;
  /// Volume of the intersection with `other`.
  double overlap(const Box& other) const;

  static Box unit(int dim);
};

/// Subinterval indices and boxes visited by a point, one entry per level 1..L.
struct SubintervalPath {
  std::vector<std::size_t> indices;
  std::vector<Box> boxes;

  std::size_t leaf() const { return indices.back(); }
};

class Segmentation {
 public:
  /// `dims` holds 0-based splitting dimensions, one per level.
  Segmentation(std::vector<int> dims, int dimension);

  /// Accepts 1-based dimension numbers, as used in the JSON format.
  static Segmentation from_one_based(std::span<const int> dims, int dimension);

  static constexpr int kMaxDepth = 30;

  int depth() const { return static_cast<int>(dims_.size()); }
  int dimension() const { return dimension_; }
  const std::vector<int>& dims() const { return dims_; }
  std::vector<int> one_based() const;
  std::size_t leaf_count() const { return std::size_t{1} << dims_.size(); }

  /// Number of times dimension `dim` is split over all levels.
  int splits(int dim) const { return total_splits_[static_cast<std::size_t>(dim)]; }
  const std::vector<int>& split_counts() const { return total_splits_; }

  /// Leaf (level L) index of u. Throws std::out_of_range for points outside the cube.
  std::size_t leaf_index(std::span<const double> u) const;
  std::size_t leaf_index_unchecked(std::span<const double> u) const;

  /// Leaf containing the cell `cell` of a finer grid with `grid_splits[k]`
  /// halvings per dimension (grid_splits[k] >= splits(k)).
  std::size_t leaf_of_cell(std::span<const std::uint64_t> cell, std::span<const int> grid_splits) const;

  /// Per-dimension coordinates of a leaf on this segmentation's own grid
  /// (2^splits(k) cells along dimension k).
  std::vector<std::uint64_t> leaf_cell(std::size_t leaf) const;

  SubintervalPath locate(std::span<const double> u) const;

  /// Box of subinterval `index` at `level` (level 0 is the whole cube).
  Box box(int level, std::size_t index) const;
  Box leaf_box(std::size_t leaf) const { return box(depth(), leaf); }

  /// Human-readable label such as "(X,X,Y,Y)" for P <= 3, "(10,9,1,...)" otherwise.
  std::string label() const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
  friend auto operator<=>(const Segmentation& a, const Segmentation& b) {
    return a.dims_ <=> b.dims_;
  }

 private:
  std::vector<int> dims_;
  int dimension_ = 0;
  std::vector<int> total_splits_;
  std::vector<int> split_rank_;  // earlier splits of dims_[l] before level l
};

/// A set of segmentations sharing dimension and depth, each with prior mass 1/size.
class SegmentationFamily {
 public:
  explicit SegmentationFamily(std::vector<Segmentation> members);

  std::size_t size() const { return members_.size(); }
  const Segmentation& operator[](std::size_t i) const { return members_[i]; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }
  const std::vector<Segmentation>& members() const { return members_; }

  int dimension() const { return members_.front().dimension(); }
  int depth() const { return members_.front().depth(); }
  double prior_mass() const { return 1.0 / static_cast<double>(members_.size()); }

  /// Halvings per dimension of the coarsest grid refining every member.
  std::vector<int> common_splits() const;

 private:
  std::vector<Segmentation> members_;
};

/// All distinct orderings of a multiset of splitting dimensions, appended to a
/// fixed prefix, in lexicographic order. `splits` maps 0-based dimension to count.
SegmentationFamily enumerate_balanced_family(int dimension, const std::map<int, int>& splits,
                                             const std::vector<int>& prefix = {});

/// Union over every `choose`-subset of `candidates` (lexicographic subset order)
/// of the balanced family splitting each chosen dimension `splits_each` times.
SegmentationFamily enumerate_subset_family(int dimension, const std::vector<int>& candidates, int choose,
                                           int splits_each, const std::vector<int>& prefix = {});

}  // namespace polyamix
