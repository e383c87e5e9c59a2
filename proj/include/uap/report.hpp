#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uap/attacks.hpp"
#include "uap/model.hpp"
#include "uap/waveform.hpp"

namespace uap {

struct ReportRow {
  std::string name;  // class name or "total"
  FoolingCounts a_train, a_valid, b_train, b_valid;
  std::optional<double> mean_db;  // mean relative dB (max metric) on valid
  std::size_t db_count = 0;

  bool operator==(const ReportRow&) const = default;
};

// Fooling ratios of one perturbation on the attacked model (A) and on a
// transfer model (B), per class and pooled.
struct FoolingReport {
  int level = 3;
  std::vector<std::string> classes;
  std::size_t trials = 0;
  bool has_model_b = false;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ReportRow> rows;
  ReportRow total;

  bool operator==(const FoolingReport&) const = default;
};

struct ReportMeta {
  int level = 3;
  std::size_t trials = 0;
  nlohmann::json config = nlohmann::json::object();
};

// Only predictions of model_b are used, so any classifier works there.
FoolingReport evaluate_perturbation(SampleView v, const WaveformModel& model_a,
                                    const DifferentiableClassifier* model_b,
                                    const std::vector<ClassLabel>* model_b_labels,
                                    const std::vector<Waveform>& train_set,
                                    const std::vector<Waveform>& valid_set,
                                    const std::vector<ClassLabel>& classes,
                                    const ReportMeta& meta);

// Columns: class, frA_train, frA_valid, frB_train, frB_valid, mean_db.
// One row per class then a total row; undefined cells are empty.
std::string report_csv(const FoolingReport& report);
std::string report_json(const FoolingReport& report);
FoolingReport report_from_json(const std::string& text);

enum class ReportFormat { kCsv, kJson };
void export_report(const FoolingReport& report, ReportFormat format,
                   const std::filesystem::path& path);

// report_level{L}_{timestamp}.{ext}
std::string report_filename(int level, const std::string& timestamp, ReportFormat format);

}  // namespace uap
