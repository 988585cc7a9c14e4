#pragma once

// Mapping between raw mixed-type rows and [0,1]^P.
//
// A continuous column is cut into B bins at its empirical quantiles, with the
// outer edges pushed out by 1% of the range on each side, and encoded as the
// bin midpoint (2k-1)/(2B). A categorical column with k levels occupies k-1
// dummy coordinates valued 1/4 or 3/4; the first level is all 1/4 and level
// i > 0 raises dummy i-1.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "polyamix/common.hpp"

namespace polyamix {

enum class ColumnType { continuous, categorical };

struct ColumnSchema {
  std::string name;
  ColumnType type = ColumnType::continuous;
  std::vector<std::string> levels;  // categorical only
};

struct Schema {
  std::vector<ColumnSchema> columns;
  int bins = 16;
  /// Equal-width bins over the inflated range instead of quantile bins.
  bool fixed_range = false;

  static Schema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

using RawValue = std::variant<double, std::string>;
using RawRow = std::vector<RawValue>;

struct RawTable {
  std::vector<std::string> names;
  std::vector<RawRow> rows;
};

/// Reads a headed CSV; continuous columns are parsed as numbers. Column order
/// follows the schema, matched by header name.
RawTable read_raw_csv(const std::string& path, const Schema& schema);
void write_raw_csv(const std::string& path, const RawTable& table);

/// A decoded point with more than one raised dummy for the same variable.
class InvalidDummyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ColumnEncoding {
  std::string name;
  ColumnType type = ColumnType::continuous;
  int first_coordinate = 0;  // 0-based
  std::vector<double> edges;        // B + 1 increasing edges (continuous)
  std::vector<std::string> levels;  // categorical

  int coordinates() const {
    return type == ColumnType::continuous ? 1 : static_cast<int>(levels.size()) - 1;
  }
};

struct EncodedRow {
  std::vector<double> u;
  bool clamped = false;
};

class EncodingSpec {
 public:
  static EncodingSpec fit(const RawTable& table, const Schema& schema);

  int dimension() const { return dimension_; }
  int bins() const { return bins_; }
  const std::vector<ColumnEncoding>& columns() const { return columns_; }

  /// 0-based bin of a continuous value; values outside the inflated support
  /// go to the boundary bin and set `clamped`.
  int bin_of(std::size_t column, double value, bool& clamped) const;

  EncodedRow encode(const RawRow& row) const;
  /// Encodes every row; `clamped` (if given) receives the number of clamped rows.
  PointSet encode_table(const RawTable& table, std::size_t* clamped = nullptr) const;

  /// Continuous values are drawn uniformly inside bin min(floor(u B), B-1);
  /// a dummy counts as raised when u >= 1/2.
  RawRow decode(std::span<const double> u, Rng& rng) const;

  nlohmann::json to_json() const;
  static EncodingSpec from_json(const nlohmann::json& j);

 private:
  std::vector<ColumnEncoding> columns_;
  int bins_ = 16;
  int dimension_ = 0;
};

/// Type-7 sample quantile (linear interpolation between order statistics) of
/// already sorted values.
double quantile_type7(std::span<const double> sorted, double p);

}  // namespace polyamix
