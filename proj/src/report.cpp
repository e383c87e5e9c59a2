#include "uap/report.hpp"

#include <cstdio>
#include <fstream>

#include "uap/dataset.hpp"
#include "uap/errors.hpp"
#include "uap/experiment.hpp"
#include "uap/loudness.hpp"

namespace uap {

using nlohmann::json;

namespace {

std::vector<int> truth_for(const std::vector<ClassLabel>& labels, const std::vector<Waveform>& set) {
  std::vector<int> out(set.size(), -1);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!set[i].label) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] == *set[i].label) out[i] = static_cast<int>(j);
    }
  }
  return out;
}

json counts_json(const FoolingCounts& c) {
  const auto r = c.ratio();
  return {{"fr", r ? json(*r) : json(nullptr)}, {"fooled", c.fooled}, {"eligible", c.eligible}};
}

FoolingCounts counts_from(const json& j) {
  return FoolingCounts{j.at("eligible").get<std::size_t>(), j.at("fooled").get<std::size_t>()};
}

json row_json(const ReportRow& r) {
  return {{"class", r.name},
          {"frA_train", counts_json(r.a_train)},
          {"frA_valid", counts_json(r.a_valid)},
          {"frB_train", counts_json(r.b_train)},
          {"frB_valid", counts_json(r.b_valid)},
          {"mean_db", r.mean_db ? json(*r.mean_db) : json(nullptr)},
          {"db_count", r.db_count}};
}

ReportRow row_from(const json& j) {
  ReportRow r;
  r.name = j.at("class");
  r.a_train = counts_from(j.at("frA_train"));
  r.a_valid = counts_from(j.at("frA_valid"));
  r.b_train = counts_from(j.at("frB_train"));
  r.b_valid = counts_from(j.at("frB_valid"));
  if (!j.at("mean_db").is_null()) r.mean_db = j.at("mean_db").get<double>();
  r.db_count = j.at("db_count");
  return r;
}

void cell(std::string& out, const std::optional<double>& v) {
  out += ',';
  if (v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    out += buf;
  }
}

}  // namespace

FoolingReport evaluate_perturbation(SampleView v, const WaveformModel& model_a,
                                    const DifferentiableClassifier* model_b,
                                    const std::vector<ClassLabel>* model_b_labels,
                                    const std::vector<Waveform>& train_set,
                                    const std::vector<Waveform>& valid_set,
                                    const std::vector<ClassLabel>& classes,
                                    const ReportMeta& meta) {
  if (model_b != nullptr && model_b_labels == nullptr) {
    throw ConfigError("model B needs its label set");
  }
  FoolingReport rep;
  rep.level = meta.level;
  rep.trials = meta.trials;
  rep.config = meta.config;
  rep.has_model_b = model_b != nullptr;
  rep.total.name = "total";

  double db_sum_total = 0.0;
  for (ClassLabel c : classes) {
    ReportRow row;
    row.name = std::string(label_name(c));
    const auto tr = filter_labels(train_set, {c});
    const auto va = filter_labels(valid_set, {c});
    const auto tr_v = views(tr);
    const auto va_v = views(va);
    const auto& la = model_a.params().label_set;
    row.a_train = fooling_counts(model_a, tr_v, truth_for(la, tr), v);
    row.a_valid = fooling_counts(model_a, va_v, truth_for(la, va), v);
    if (model_b != nullptr) {
      row.b_train = fooling_counts(*model_b, tr_v, truth_for(*model_b_labels, tr), v);
      row.b_valid = fooling_counts(*model_b, va_v, truth_for(*model_b_labels, va), v);
    }
    double db_sum = 0.0;
    for (const auto& w : va) {
      try {
        db_sum += relative_db(v, w.samples, LoudnessMetric::kMax);
        ++row.db_count;
      } catch (const SilentSignal&) {
      }
    }
    if (row.db_count > 0) row.mean_db = db_sum / static_cast<double>(row.db_count);

    rep.total.a_train += row.a_train;
    rep.total.a_valid += row.a_valid;
    rep.total.b_train += row.b_train;
    rep.total.b_valid += row.b_valid;
    rep.total.db_count += row.db_count;
    db_sum_total += db_sum;
    rep.classes.push_back(row.name);
    rep.rows.push_back(std::move(row));
  }
  if (rep.total.db_count > 0) {
    rep.total.mean_db = db_sum_total / static_cast<double>(rep.total.db_count);
  }
  return rep;
}

std::string report_csv(const FoolingReport& report) {
  std::string out = "class,frA_train,frA_valid,frB_train,frB_valid,mean_db\n";
  auto emit = [&](const ReportRow& r) {
    out += r.name;
    cell(out, r.a_train.ratio());
    cell(out, r.a_valid.ratio());
    cell(out, report.has_model_b ? r.b_train.ratio() : std::nullopt);
    cell(out, report.has_model_b ? r.b_valid.ratio() : std::nullopt);
    cell(out, r.mean_db);
    out += '\n';
  };
  for (const auto& r : report.rows) emit(r);
  emit(report.total);
  return out;
}

std::string report_json(const FoolingReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  json doc = {{"level", report.level},
              {"classes", report.classes},
              {"trials", report.trials},
              {"has_model_b", report.has_model_b},
              {"config", report.config},
              {"rows", rows},
              {"total", row_json(report.total)}};
  if (report.level == 2 && report.classes.size() == 2) {
    doc["pair"] = {{"C1", report.classes[0]}, {"C2", report.classes[1]}};
  }
  return doc.dump(2) + "\n";
}

FoolingReport report_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    FoolingReport r;
    r.level = doc.at("level");
    r.classes = doc.at("classes").get<std::vector<std::string>>();
    r.trials = doc.at("trials");
    r.has_model_b = doc.at("has_model_b");
    r.config = doc.at("config");
    for (const auto& row : doc.at("rows")) r.rows.push_back(row_from(row));
    r.total = row_from(doc.at("total"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad report JSON: ") + e.what());
  }
}

void export_report(const FoolingReport& report, ReportFormat format,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << (format == ReportFormat::kCsv ? report_csv(report) : report_json(report));
  if (!out) throw Error("write failed for " + path.string());
}

std::string report_filename(int level, const std::string& timestamp, ReportFormat format) {
  return "report_level" + std::to_string(level) + "_" + timestamp +
         (format == ReportFormat::kCsv ? ".csv" : ".json");
}

}  // namespace uap
