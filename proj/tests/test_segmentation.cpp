#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "polyamix/segmentation.hpp"

using namespace polyamix;

namespace {

Segmentation random_segmentation(std::mt19937_64& rng, int P, int L) {
  std::uniform_int_distribution<int> pick(0, P - 1);
  std::vector<int> dims(static_cast<std::size_t>(L));
  for (auto& d : dims) d = pick(rng);
  return Segmentation(dims, P);
}

}  // namespace

TEST_CASE("single split halves the unit interval") {
  Segmentation s({0}, 1);
  CHECK(s.leaf_count() == 2);
  CHECK(s.leaf_box(0).lower[0] == 0.0);
  CHECK(s.leaf_box(0).upper[0] == 0.5);
  CHECK(s.leaf_box(1).lower[0] == 0.5);
  CHECK(s.leaf_box(1).upper[0] == 1.0);
}

TEST_CASE("quadrants are ordered small values first") {
  Segmentation s({0, 1}, 2);
  const double want[4][4] = {{0, .5, 0, .5}, {0, .5, .5, 1}, {.5, 1, 0, .5}, {.5, 1, .5, 1}};
  for (std::size_t j = 0; j < 4; ++j) {
    const Box b = s.leaf_box(j);
    CHECK(b.lower[0] == want[j][0]);
    CHECK(b.upper[0] == want[j][1]);
    CHECK(b.lower[1] == want[j][2]);
    CHECK(b.upper[1] == want[j][3]);
  }
}

TEST_CASE("one-based constructor and labels") {
  const std::vector<int> xxxx = {1, 1, 1, 1};
  auto s = Segmentation::from_one_based(xxxx, 2);
  CHECK(s.dims() == std::vector<int>{0, 0, 0, 0});
  CHECK(s.label() == "(X,X,X,X)");
  CHECK(s.one_based() == xxxx);
  CHECK(Segmentation({1, 1, 0, 0}, 2).label() == "(Y,Y,X,X)");
  const std::vector<int> bad = {3};
  CHECK_THROWS_AS(Segmentation::from_one_based(bad, 2), std::invalid_argument);
  CHECK_THROWS_AS(Segmentation({}, 2), std::invalid_argument);
}

TEST_CASE("locate on the canonical 1D segmentation") {
  Segmentation s({0, 0}, 1);
  const double a[] = {0.3};
  CHECK(s.locate(a).indices == std::vector<std::size_t>{0, 1});
  const double top[] = {1.0};
  CHECK(s.locate(top).indices == std::vector<std::size_t>{1, 3});
  const double mid[] = {0.5};
  CHECK(s.leaf_index(mid) == 2);
  const double out[] = {1.5};
  CHECK_THROWS_AS(s.leaf_index(out), std::out_of_range);
}

TEST_CASE("origin is always in the first subinterval") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_segmentation(rng, 3, 6);
    const double zero[] = {0.0, 0.0, 0.0};
    const auto path = s.locate(zero);
    CHECK(std::all_of(path.indices.begin(), path.indices.end(), [](std::size_t j) { return j == 0; }));
  }
}

TEST_CASE("leaf boxes tile the cube") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 25; ++t) {
    const int P = 1 + t % 4;
    const auto s = random_segmentation(rng, P, 1 + t % 8);
    double volume = 0.0;
    for (std::size_t j = 0; j < s.leaf_count(); ++j) {
      const Box b = s.leaf_box(j);
      volume += b.volume();
      CHECK(b.volume() == doctest::Approx(std::ldexp(1.0, -s.depth())).epsilon(1e-15));
      for (int k = 0; k < P; ++k) {
        CHECK(b.upper[k] - b.lower[k] == std::ldexp(1.0, -s.splits(k)));
      }
      // the center of a leaf box locates back to that box
      CHECK(s.leaf_index(b.center()) == j);
    }
    CHECK(volume == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i + 1 < s.leaf_count(); ++i) {
      CHECK(s.leaf_box(i).overlap(s.leaf_box(i + 1)) == 0.0);
    }
  }
}

TEST_CASE("paths obey the child-index law") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const int P = 1 + t % 3;
    const auto s = random_segmentation(rng, P, 1 + t % 9);
    std::vector<double> u(static_cast<std::size_t>(P));
    for (auto& x : u) x = unif(rng);
    const auto path = s.locate(u);
    REQUIRE(path.indices.size() == static_cast<std::size_t>(s.depth()));
    CHECK(path.indices[0] <= 1);
    for (std::size_t l = 1; l < path.indices.size(); ++l) {
      CHECK(path.indices[l] / 2 == path.indices[l - 1]);
    }
    for (std::size_t l = 0; l < path.boxes.size(); ++l) CHECK(path.boxes[l].contains(u));
    CHECK(s.leaf_index(u) == path.leaf());
  }
}

TEST_CASE("leaf_of_cell agrees with leaf_index on a finer grid") {
  std::mt19937_64 rng(11);
  const auto s = random_segmentation(rng, 2, 6);
  const std::vector<int> grid = {s.splits(0) + 1, s.splits(1) + 2};
  for (std::uint64_t cx = 0; cx < (1u << grid[0]); ++cx) {
    for (std::uint64_t cy = 0; cy < (1u << grid[1]); ++cy) {
      const std::uint64_t cell[] = {cx, cy};
      const double u[] = {(cx + 0.5) / double(1u << grid[0]), (cy + 0.5) / double(1u << grid[1])};
      CHECK(s.leaf_of_cell(cell, grid) == s.leaf_index(u));
    }
  }
  for (std::size_t j = 0; j < s.leaf_count(); ++j) {
    const auto c = s.leaf_cell(j);
    const std::vector<int> own = {s.splits(0), s.splits(1)};
    CHECK(s.leaf_of_cell(c, own) == j);
  }
}

TEST_CASE("family sizes") {
  CHECK(enumerate_balanced_family(2, {{0, 4}, {1, 4}}).size() == 70);
  CHECK(enumerate_balanced_family(1, {{0, 10}}).size() == 1);
  const auto highdim = enumerate_subset_family(10, {0, 1, 2, 3, 4, 5, 6, 7}, 2, 4, {9, 8});
  CHECK(highdim.size() == 1960);
  CHECK(highdim.depth() == 10);
  CHECK(highdim[0].dims()[0] == 9);
  CHECK(highdim[0].dims()[1] == 8);
  // first 70 members split only U_1 and U_2 after the prefix
  for (std::size_t i = 0; i < 70; ++i) {
    CHECK(highdim[i].splits(0) == 4);
    CHECK(highdim[i].splits(1) == 4);
  }
}

TEST_CASE("balanced family is lexicographic and duplicate free") {
  const auto fam = enumerate_balanced_family(2, {{0, 2}, {1, 2}});
  REQUIRE(fam.size() == 6);
  CHECK(fam[0].label() == "(X,X,Y,Y)");
  CHECK(fam[5].label() == "(Y,Y,X,X)");
  for (std::size_t i = 0; i + 1 < fam.size(); ++i) CHECK(fam[i] < fam[i + 1]);
  CHECK(fam.common_splits() == std::vector<int>{2, 2});
}

TEST_CASE("family members must agree on dimension and depth") {
  std::vector<Segmentation> mixed = {Segmentation({0, 1}, 2), Segmentation({0}, 2)};
  CHECK_THROWS_AS(SegmentationFamily(std::move(mixed)), std::invalid_argument);
  CHECK_THROWS_AS(SegmentationFamily({}), std::invalid_argument);
}
