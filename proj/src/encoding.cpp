#include "polyamix/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace polyamix {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

bool is_power_of_two(int b) { return b > 0 && (b & (b - 1)) == 0; }

}  // namespace

Schema Schema::from_json(const nlohmann::json& j) {
  Schema s;
  s.bins = j.value("bins", 16);
  s.fixed_range = j.value("fixed_range", false);
  for (const auto& c : j.at("columns")) {
    ColumnSchema col;
    col.name = c.at("name").get<std::string>();
    const std::string type = c.value("type", "continuous");
    if (type == "continuous") {
      col.type = ColumnType::continuous;
    } else if (type == "categorical") {
      col.type = ColumnType::categorical;
      col.levels = c.at("levels").get<std::vector<std::string>>();
    } else {
      throw std::invalid_argument("unknown column type '" + type + "'");
    }
    s.columns.push_back(std::move(col));
  }
  return s;
}

nlohmann::json Schema::to_json() const {
  nlohmann::json j;
  j["bins"] = bins;
  if (fixed_range) j["fixed_range"] = true;
  j["columns"] = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json col{{"name", c.name}, {"type", c.type == ColumnType::continuous ? "continuous" : "categorical"}};
    if (c.type == ColumnType::categorical) col["levels"] = c.levels;
    j["columns"].push_back(col);
  }
  return j;
}

RawTable read_raw_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  const auto header = split_csv_line(line);
  std::vector<std::size_t> source;
  RawTable table;
  for (const auto& col : schema.columns) {
    const auto it = std::find(header.begin(), header.end(), col.name);
    if (it == header.end()) throw std::invalid_argument(path + ": missing column '" + col.name + "'");
    source.push_back(static_cast<std::size_t>(it - header.begin()));
    table.names.push_back(col.name);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    RawRow row;
    for (std::size_t k = 0; k < source.size(); ++k) {
      if (source[k] >= fields.size()) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": too few fields");
      }
      const std::string& f = fields[source[k]];
      if (schema.columns[k].type == ColumnType::continuous) {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(f, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != f.size() || !std::isfinite(v)) {
          throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": '" + f + "' is not a number");
        }
        row.emplace_back(v);
      } else {
        row.emplace_back(f);
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_raw_csv(const std::string& path, const RawTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t k = 0; k < table.names.size(); ++k) out << (k ? "," : "") << table.names[k];
  out << '\n';
  out.precision(17);
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << ',';
      if (const double* v = std::get_if<double>(&row[k])) {
        out << *v;
      } else {
        out << std::get<std::string>(row[k]);
      }
    }
    out << '\n';
  }
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

EncodingSpec EncodingSpec::fit(const RawTable& table, const Schema& schema) {
  if (!is_power_of_two(schema.bins)) throw std::invalid_argument("bin count must be a power of two");
  if (schema.columns.empty()) throw std::invalid_argument("schema has no columns");
  EncodingSpec spec;
  spec.bins_ = schema.bins;
  int coordinate = 0;
  for (std::size_t k = 0; k < schema.columns.size(); ++k) {
    const ColumnSchema& col = schema.columns[k];
    ColumnEncoding enc;
    enc.name = col.name;
    enc.type = col.type;
    enc.first_coordinate = coordinate;
    if (col.type == ColumnType::continuous) {
      std::vector<double> values;
      values.reserve(table.rows.size());
      for (const auto& row : table.rows) {
        const double* v = std::get_if<double>(&row.at(k));
        if (!v) throw std::invalid_argument("column '" + col.name + "' holds a non-numeric value");
        values.push_back(*v);
      }
      std::stable_sort(values.begin(), values.end());
      std::vector<double> uniq(values);
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      if (uniq.size() < static_cast<std::size_t>(schema.bins)) {
        throw std::invalid_argument("column '" + col.name + "' needs at least " + std::to_string(schema.bins) +
                                    " distinct values, has " + std::to_string(uniq.size()));
      }
      const double q0 = values.front();
      const double qb = values.back();
      const double delta = (qb - q0) / 100.0;
      enc.edges.resize(static_cast<std::size_t>(schema.bins) + 1);
      for (int l = 0; l <= schema.bins; ++l) {
        const double p = static_cast<double>(l) / schema.bins;
        enc.edges[static_cast<std::size_t>(l)] = schema.fixed_range ? q0 + p * (qb - q0) : quantile_type7(values, p);
      }
      enc.edges.front() = q0 - delta;
      enc.edges.back() = qb + delta;
      for (std::size_t l = 1; l < enc.edges.size(); ++l) {
        if (!(enc.edges[l] > enc.edges[l - 1])) {
          throw std::invalid_argument("column '" + col.name + "' has tied quantiles; bins would be empty");
        }
      }
      coordinate += 1;
    } else {
      if (col.levels.size() < 2) throw std::invalid_argument("categorical column '" + col.name + "' needs two levels");
      enc.levels = col.levels;
      for (const auto& row : table.rows) {
        const std::string* v = std::get_if<std::string>(&row.at(k));
        if (!v || std::find(enc.levels.begin(), enc.levels.end(), *v) == enc.levels.end()) {
          throw std::invalid_argument("column '" + col.name + "' has an unknown level");
        }
      }
      coordinate += enc.coordinates();
    }
    spec.columns_.push_back(std::move(enc));
  }
  spec.dimension_ = coordinate;
  return spec;
}

int EncodingSpec::bin_of(std::size_t column, double value, bool& clamped) const {
  const auto& edges = columns_.at(column).edges;
  if (!std::isfinite(value)) throw std::invalid_argument("cannot encode a non-finite value");
  if (value < edges.front()) {
    clamped = true;
    return 0;
  }
  if (value > edges.back()) {
    clamped = true;
    return bins_ - 1;
  }
  // bin 1 is closed on both sides, later bins are (q_{l-1}, q_l]
  const auto inner_begin = edges.begin() + 1;
  const auto inner_end = edges.end() - 1;
  const auto it = std::lower_bound(inner_begin, inner_end, value);
  return static_cast<int>(it - inner_begin);
}

EncodedRow EncodingSpec::encode(const RawRow& row) const {
  if (row.size() != columns_.size()) throw std::invalid_argument("row has the wrong number of columns");
  EncodedRow out;
  out.u.assign(static_cast<std::size_t>(dimension_), 0.25);
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const ColumnEncoding& col = columns_[k];
    const auto first = static_cast<std::size_t>(col.first_coordinate);
    if (col.type == ColumnType::continuous) {
      const double* v = std::get_if<double>(&row[k]);
      if (!v) throw std::invalid_argument("column '" + col.name + "' expects a number");
      const int bin = bin_of(k, *v, out.clamped);
      out.u[first] = (2.0 * bin + 1.0) / (2.0 * bins_);
    } else {
      const std::string* v = std::get_if<std::string>(&row[k]);
      if (!v) throw std::invalid_argument("column '" + col.name + "' expects a level");
      const auto it = std::find(col.levels.begin(), col.levels.end(), *v);
      if (it == col.levels.end()) throw std::invalid_argument("unknown level '" + *v + "' in column '" + col.name + "'");
      const auto level = static_cast<std::size_t>(it - col.levels.begin());
      if (level > 0) out.u[first + level - 1] = 0.75;
    }
  }
  return out;
}

PointSet EncodingSpec::encode_table(const RawTable& table, std::size_t* clamped) const {
  PointSet points(dimension_);
  points.reserve(table.rows.size());
  std::size_t n_clamped = 0;
  for (const auto& row : table.rows) {
    const EncodedRow e = encode(row);
    n_clamped += e.clamped ? 1 : 0;
    points.push_back(e.u);
  }
  if (clamped) *clamped = n_clamped;
  return points;
}

RawRow EncodingSpec::decode(std::span<const double> u, Rng& rng) const {
  check_in_cube(u, dimension_);
  RawRow row;
  row.reserve(columns_.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (const ColumnEncoding& col : columns_) {
    const auto first = static_cast<std::size_t>(col.first_coordinate);
    if (col.type == ColumnType::continuous) {
      const int bin = std::min(static_cast<int>(std::floor(u[first] * bins_)), bins_ - 1);
      const double lo = col.edges[static_cast<std::size_t>(bin)];
      const double hi = col.edges[static_cast<std::size_t>(bin) + 1];
      row.emplace_back(lo + unif(rng) * (hi - lo));
    } else {
      std::size_t level = 0;
      for (int d = 0; d < col.coordinates(); ++d) {
        if (u[first + static_cast<std::size_t>(d)] >= 0.5) {
          if (level != 0) throw InvalidDummyError("more than one raised dummy for '" + col.name + "'");
          level = static_cast<std::size_t>(d) + 1;
        }
      }
      row.emplace_back(col.levels[level]);
    }
  }
  return row;
}

nlohmann::json EncodingSpec::to_json() const {
  nlohmann::json j;
  j["bins"] = bins_;
  j["columns"] = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json col{{"name", c.name}, {"first_coordinate", c.first_coordinate + 1}};
    if (c.type == ColumnType::continuous) {
      col["type"] = "continuous";
      col["edges"] = c.edges;
    } else {
      col["type"] = "categorical";
      col["levels"] = c.levels;
    }
    j["columns"].push_back(col);
  }
  return j;
}

EncodingSpec EncodingSpec::from_json(const nlohmann::json& j) {
  EncodingSpec spec;
  spec.bins_ = j.at("bins").get<int>();
  if (!is_power_of_two(spec.bins_)) throw std::invalid_argument("bin count must be a power of two");
  int coordinate = 0;
  for (const auto& c : j.at("columns")) {
    ColumnEncoding enc;
    enc.name = c.at("name").get<std::string>();
    enc.first_coordinate = coordinate;
    if (c.at("type").get<std::string>() == "continuous") {
      enc.type = ColumnType::continuous;
      enc.edges = c.at("edges").get<std::vector<double>>();
      if (enc.edges.size() != static_cast<std::size_t>(spec.bins_) + 1) throw std::invalid_argument("edge count mismatch");
      for (std::size_t l = 1; l < enc.edges.size(); ++l) {
        if (!(enc.edges[l] > enc.edges[l - 1])) throw std::invalid_argument("edges must be strictly increasing");
      }
    } else {
      enc.type = ColumnType::categorical;
      enc.levels = c.at("levels").get<std::vector<std::string>>();
      if (enc.levels.size() < 2) throw std::invalid_argument("categorical column needs two levels");
    }
    coordinate += enc.coordinates();
    spec.columns_.push_back(std::move(enc));
  }
  spec.dimension_ = coordinate;
  return spec;
}

}  // namespace polyamix
