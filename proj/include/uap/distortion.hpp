#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uap/labels.hpp"
#include "uap/loudness.hpp"
#include "uap/waveform.hpp"

namespace uap {

// Relative loudness of a perturbation measured separately on the vocal
// segment and on the background (everything outside it) of one clean clip.
// Empty optionals are the -inf sentinel: the perturbation or the reference
// is silent on that part.
struct DistortionRecord {
  std::size_t index = 0;
  std::optional<ClassLabel> label;
  std::optional<EnergyPartition> partition;  // absent for silence clips
  bool has_vocal = true;
  std::optional<double> vocal_db_max;
  std::optional<double> vocal_db_mean;
  std::optional<double> background_db_max;
  std::optional<double> background_db_mean;
};

struct PartMeans {
  std::optional<double> vocal_db_max;
  std::optional<double> vocal_db_mean;
  std::optional<double> background_db_max;
  std::optional<double> background_db_mean;
  std::size_t vocal_count = 0;
  std::size_t background_count = 0;
};

struct DistortionReport {
  std::vector<DistortionRecord> records;
  std::map<std::string, PartMeans> per_class;
  PartMeans overall;
  std::size_t skipped_no_energy = 0;
  std::size_t sentinel_entries = 0;
  double energy_fraction = 0.95;
};

// Partitions each clean clip, then compares the unclipped perturbation with
// the clip on each part. Silence clips are treated as all background.
DistortionReport distortion_report(std::span<const double> v,
                                   const std::vector<Waveform>& dataset,
                                   double energy_fraction = 0.95);

// Header `label,part,metric,db`; one row per record, part and metric.
// Sentinel values are written as an empty cell.
std::string distortion_csv(const DistortionReport& report);
std::string distortion_json(const DistortionReport& report);

void write_distortion(const DistortionReport& report, const std::filesystem::path& csv_path,
                      const std::filesystem::path& json_path);

}  // namespace uap
