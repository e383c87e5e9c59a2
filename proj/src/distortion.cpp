#include "uap/distortion.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "uap/errors.hpp"

namespace uap {
namespace {

std::optional<double> try_relative(std::span<const double> v, std::span<const double> x,
                                   LoudnessMetric m) {
  try {
    return relative_db(v, x, m);
  } catch (const SilentSignal&) {
    return std::nullopt;
  }
}

struct Accum {
  double sum = 0.0;
  std::size_t n = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

struct PartAccum {
  Accum vmax, vmean, bmax, bmean;
  void add(const DistortionRecord& r) {
    vmax.add(r.vocal_db_max);
    vmean.add(r.vocal_db_mean);
    bmax.add(r.background_db_max);
    bmean.add(r.background_db_mean);
  }
  PartMeans finish() const {
    return {vmax.mean(), vmean.mean(), bmax.mean(), bmean.mean(), vmax.n, bmax.n};
  }
};

std::string label_string(const std::optional<ClassLabel>& l) {
  return l ? std::string(label_name(*l)) : std::string("unlabeled");
}

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json means_json(const PartMeans& m) {
  return {{"vocal_db_max", opt(m.vocal_db_max)},
          {"vocal_db_mean", opt(m.vocal_db_mean)},
          {"background_db_max", opt(m.background_db_max)},
          {"background_db_mean", opt(m.background_db_mean)},
          {"vocal_count", m.vocal_count},
          {"background_count", m.background_count}};
}

void csv_row(std::string& out, const std::string& label, const char* part,
             const char* metric, const std::optional<double>& value) {
  out += label;
  out += ',';
  out += part;
  out += ',';
  out += metric;
  out += ',';
  if (value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", *value);
    out += buf;
  }
  out += '\n';
}

}  // namespace

DistortionReport distortion_report(std::span<const double> v,
                                   const std::vector<Waveform>& dataset,
                                   double energy_fraction) {
  if (dataset.empty()) throw ConfigError("distortion report needs a nonempty dataset");
  DistortionReport report;
  report.energy_fraction = energy_fraction;
  std::map<std::string, PartAccum> per_class;
  PartAccum overall;

  std::vector<double> vb, xb;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Waveform& w = dataset[i];
    if (v.size() != w.samples.size()) throw ShapeMismatch("perturbation length differs from clip");
    DistortionRecord rec;
    rec.index = i;
    rec.label = w.label;
    const std::span<const double> x = w.samples;

    if (w.label == ClassLabel::kSilence) {
      bool any = false;
      for (double s : x) any = any || s != 0.0;
      if (!any) {
        ++report.skipped_no_energy;
        continue;
      }
      rec.has_vocal = false;
      rec.background_db_max = try_relative(v, x, LoudnessMetric::kMax);
      rec.background_db_mean = try_relative(v, x, LoudnessMetric::kMean);
    } else {
      EnergyPartition part;
      try {
        part = energy_partition(x, energy_fraction);
      } catch (const NoEnergy&) {
        ++report.skipped_no_energy;
        continue;
      }
      rec.partition = part;
      auto vv = v.subspan(part.begin(), part.length());
      auto xv = x.subspan(part.begin(), part.length());
      rec.vocal_db_max = try_relative(vv, xv, LoudnessMetric::kMax);
      rec.vocal_db_mean = try_relative(vv, xv, LoudnessMetric::kMean);

      vb.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(part.begin()));
      vb.insert(vb.end(), v.begin() + static_cast<std::ptrdiff_t>(part.end()), v.end());
      xb.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(part.begin()));
      xb.insert(xb.end(), x.begin() + static_cast<std::ptrdiff_t>(part.end()), x.end());
      if (!vb.empty()) {
        rec.background_db_max = try_relative(vb, xb, LoudnessMetric::kMax);
        rec.background_db_mean = try_relative(vb, xb, LoudnessMetric::kMean);
      }
    }

    const int expected = rec.has_vocal ? 4 : 2;
    const int present = rec.vocal_db_max.has_value() + rec.vocal_db_mean.has_value() +
                        rec.background_db_max.has_value() + rec.background_db_mean.has_value();
    report.sentinel_entries += static_cast<std::size_t>(expected - present);

    per_class[label_string(rec.label)].add(rec);
    overall.add(rec);
    report.records.push_back(rec);
  }

  for (const auto& [name, acc] : per_class) report.per_class[name] = acc.finish();
  report.overall = overall.finish();
  return report;
}

std::string distortion_csv(const DistortionReport& report) {
  std::string out = "label,part,metric,db\n";
  for (const auto& r : report.records) {
    const std::string label = label_string(r.label);
    if (r.has_vocal) {
      csv_row(out, label, "vocal", "max", r.vocal_db_max);
      csv_row(out, label, "vocal", "mean", r.vocal_db_mean);
    }
    csv_row(out, label, "background", "max", r.background_db_max);
    csv_row(out, label, "background", "mean", r.background_db_mean);
  }
  return out;
}

std::string distortion_json(const DistortionReport& report) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json j = {{"index", r.index},
                        {"label", label_string(r.label)},
                        {"background_db_max", opt(r.background_db_max)},
                        {"background_db_mean", opt(r.background_db_mean)}};
    if (r.has_vocal) {
      j["vocal_db_max"] = opt(r.vocal_db_max);
      j["vocal_db_mean"] = opt(r.vocal_db_mean);
    }
    if (r.partition) j["partition"] = {r.partition->a, r.partition->b};
    records.push_back(std::move(j));
  }
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [name, m] : report.per_class) per_class[name] = means_json(m);
  nlohmann::json doc = {{"energy_fraction", report.energy_fraction},
                        {"perturbation", "raw (unclipped) perturbation values"},
                        {"skipped_no_energy", report.skipped_no_energy},
                        {"sentinel_entries", report.sentinel_entries},
                        {"overall", means_json(report.overall)},
                        {"per_class", per_class},
                        {"records", records}};
  return doc.dump(2) + "\n";
}

void write_distortion(const DistortionReport& report, const std::filesystem::path& csv_path,
                      const std::filesystem::path& json_path) {
  std::ofstream c(csv_path, std::ios::binary);
  std::ofstream j(json_path, std::ios::binary);
  if (!c || !j) throw Error("cannot write distortion report");
  c << distortion_csv(report);
  j << distortion_json(report);
  if (!c || !j) throw Error("write failed for distortion report");
}

}  // namespace uap
