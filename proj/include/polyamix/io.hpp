#pragma once

// File formats. Dimension numbers in JSON are 1-based.
//
//   family: {"dimension": P, "segmentations": [[1,1,2,2], ...]}
//   counts: {"levels": [[N_00], [N_10, N_11], ...]}
//   model:  {"a0", "sample_size", "family", "counts": [...], "log_numerators", "weights"}
//
// CSV outputs start with one "# {json}" metadata line, then a header row.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyamix/common.hpp"
#include "polyamix/hbeta.hpp"
#include "polyamix/posterior.hpp"
#include "polyamix/segmentation.hpp"

namespace polyamix {

nlohmann::json family_to_json(const SegmentationFamily& family);
SegmentationFamily family_from_json(const nlohmann::json& j);

nlohmann::json counts_to_json(const CountsTree& counts);
CountsTree counts_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const PosteriorModel& model);
PosteriorModel model_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

/// Numeric CSV of points; '#' lines are skipped and a non-numeric first row
/// is taken as a header. Every row must have the same number of fields.
PointSet read_points_csv(const std::string& path);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const nlohmann::json& metadata, const std::vector<std::string>& header);

  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(const std::string& v);
  CsvWriter& operator<<(long long v);
  void end_row();

 private:
  void separator();
  std::ofstream out_;
  bool row_started_ = false;
};

void write_points_csv(const std::string& path, const PointSet& points, const nlohmann::json& metadata);
/// One row per member: index, label, log numerator, weight.
void write_weights_csv(const std::string& path, const PosteriorModel& model, const nlohmann::json& metadata);

}  // namespace polyamix
