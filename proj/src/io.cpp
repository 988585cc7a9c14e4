#include "polyamix/io.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace polyamix {

nlohmann::json family_to_json(const SegmentationFamily& family) {
  nlohmann::json j;
  j["dimension"] = family.dimension();
  j["segmentations"] = nlohmann::json::array();
  for (const auto& s : family) j["segmentations"].push_back(s.one_based());
  return j;
}

SegmentationFamily family_from_json(const nlohmann::json& j) {
  const int P = j.at("dimension").get<int>();
  std::vector<Segmentation> members;
  for (const auto& s : j.at("segmentations")) {
    const auto dims = s.get<std::vector<int>>();
    members.push_back(Segmentation::from_one_based(dims, P));
  }
  return SegmentationFamily(std::move(members));
}

nlohmann::json counts_to_json(const CountsTree& counts) {
  nlohmann::json levels = nlohmann::json::array();
  for (int l = 0; l <= counts.depth(); ++l) {
    const auto level = counts.level(l);
    levels.push_back(std::vector<std::uint32_t>(level.begin(), level.end()));
  }
  return {{"levels", levels}};
}

CountsTree counts_from_json(const nlohmann::json& j) {
  return CountsTree::from_levels(j.at("levels").get<std::vector<std::vector<std::uint32_t>>>());
}

nlohmann::json model_to_json(const PosteriorModel& model) {
  nlohmann::json j;
  j["a0"] = model.a0();
  j["sample_size"] = model.sample_size();
  j["family"] = family_to_json(model.family());
  j["counts"] = nlohmann::json::array();
  for (const auto& c : model.counts()) j["counts"].push_back(counts_to_json(c));
  j["log_numerators"] = model.log_numerators();
  j["weights"] = model.weights();
  return j;
}

PosteriorModel model_from_json(const nlohmann::json& j) {
  std::vector<CountsTree> counts;
  for (const auto& c : j.at("counts")) counts.push_back(counts_from_json(c));
  return PosteriorModel::from_counts(family_from_json(j.at("family")), std::move(counts), j.at("a0").get<double>());
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

PointSet read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  PointSet points;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
      if (used == 0 || used != field.size()) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    first = false;
    if (points.dim() == 0) points = PointSet(static_cast<int>(row.size()));
    if (static_cast<int>(row.size()) != points.dim()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(points.dim()) + " fields");
    }
    points.push_back(row);
  }
  return points;
}

CsvWriter::CsvWriter(const std::string& path, const nlohmann::json& metadata, const std::vector<std::string>& header)
    : out_(path) {
  if (!out_) throw std::runtime_error("cannot write " + path);
  out_.precision(12);
  out_ << "# " << metadata.dump() << '\n';
  for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
  out_ << '\n';
}

void CsvWriter::separator() {
  if (row_started_) out_ << ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::operator<<(double v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
  separator();
  out_ << v;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  row_started_ = false;
}

void write_points_csv(const std::string& path, const PointSet& points, const nlohmann::json& metadata) {
  std::vector<std::string> header;
  for (int k = 1; k <= points.dim(); ++k) header.push_back("u" + std::to_string(k));
  CsvWriter w(path, metadata, header);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (double v : points[i]) w << v;
    w.end_row();
  }
}

void write_weights_csv(const std::string& path, const PosteriorModel& model, const nlohmann::json& metadata) {
  CsvWriter w(path, metadata, {"index", "segmentation", "log_numerator", "weight"});
  const auto weights = model.weights();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    w << static_cast<long long>(i + 1) << ("\"" + model.family()[i].label() + "\"") << model.log_numerators()[i]
      << weights[i];
    w.end_row();
  }
}

}  // namespace polyamix
