#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "support.hpp"
#include "uap/dataset.hpp"
#include "uap/errors.hpp"
#include "uap/experiment.hpp"
#include "uap/perturbation_io.hpp"
#include "uap/report.hpp"
#include "uap/serialize.hpp"
#include "uap/wav.hpp"

using namespace uap;

namespace {

// Exposes only predictions of a wrapped model.
class BlackBox : public DifferentiableClassifier {
 public:
  explicit BlackBox(const DifferentiableClassifier& inner) : inner_(inner) {}
  std::size_t num_classes() const override { return inner_.num_classes(); }
  std::size_t input_size() const override { return inner_.input_size(); }
  std::vector<double> logits(SampleView x) const override { return inner_.logits(x); }
  std::unique_ptr<Linearization> linearize(SampleView) const override {
    throw std::logic_error("gradients are not available");
  }

 private:
  const DifferentiableClassifier& inner_;
};

std::vector<Waveform> take_per_class(const std::vector<Waveform>& set, std::size_t n) {
  std::map<int, std::size_t> seen;
  std::vector<Waveform> out;
  for (const auto& w : set) {
    if (seen[label_index(*w.label)]++ < n) out.push_back(w);
  }
  return out;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

ReportRow row(const std::string& name, std::size_t elig, std::size_t a_tr, std::size_t a_va,
              std::size_t b_tr, std::size_t b_va) {
  ReportRow r;
  r.name = name;
  r.a_train = {elig, a_tr};
  r.a_valid = {elig, a_va};
  r.b_train = {elig, b_tr};
  r.b_valid = {elig, b_va};
  return r;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("universality levels check their class counts") {
    const auto labels = toy_labels(4);
    CHECK(make_level(3, {}, labels).classes == labels);
    CHECK(make_level(1, {ClassLabel::kNo}, labels).classes.size() == 1);
    CHECK(make_level(2, {ClassLabel::kUp, ClassLabel::kYes}, labels).classes ==
          std::vector<ClassLabel>{ClassLabel::kYes, ClassLabel::kUp});
    CHECK_THROWS_AS(make_level(1, {ClassLabel::kNo, ClassLabel::kYes}, labels), ConfigError);
    CHECK_THROWS_AS(make_level(2, {ClassLabel::kNo}, labels), ConfigError);
    CHECK_THROWS_AS(make_level(2, labels, labels), ConfigError);
    CHECK_THROWS_AS(make_level(3, {ClassLabel::kNo}, labels), ConfigError);
    CHECK_THROWS_AS(make_level(4, {ClassLabel::kNo}, labels), ConfigError);
    CHECK_THROWS_AS(make_level(1, {ClassLabel::kGo}, labels), ConfigError);
    CHECK_THROWS_AS(make_level(2, {ClassLabel::kNo, ClassLabel::kNo}, labels), ConfigError);
  }

  TEST_CASE("trial seeds and subsets are reproducible") {
    CHECK(trial_seed(5, 0) == trial_seed(5, 0));
    CHECK(trial_seed(5, 0) != trial_seed(5, 1));
    CHECK(trial_seed(5, 0) != trial_seed(6, 0));
    const auto& pool = testing::toy_setup().data.train;
    const std::vector<ClassLabel> cls{ClassLabel::kYes, ClassLabel::kUp};
    const auto a = draw_subset(pool, cls, 10, 42);
    CHECK(a == draw_subset(pool, cls, 10, 42));
    CHECK(a != draw_subset(pool, cls, 10, 43));
    CHECK(a.size() == 20);
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 20);
    for (std::size_t i = 0; i < 10; ++i) CHECK(pool[a[i]].label == ClassLabel::kYes);
    for (std::size_t i = 10; i < 20; ++i) CHECK(pool[a[i]].label == ClassLabel::kUp);
    CHECK_THROWS_AS(draw_subset(pool, cls, 100000, 1), InsufficientSamples);
  }

  TEST_CASE("level experiments are deterministic and keep the best trial") {
    const auto& s = testing::toy_setup();
    const auto level = make_level(1, {ClassLabel::kYes}, s.trained.params.label_set);
    AttackConfig cfg;
    cfg.trials = 3;
    cfg.max_passes = 1;
    cfg.rng_seed = 11;
    const auto r1 = run_level_experiment(level, s.data.train, *s.model, cfg, 3);
    const auto r2 = run_level_experiment(level, s.data.train, *s.model, cfg, 3);
    REQUIRE(r1.trials.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(r1.trials[t].uap.v.values == r2.trials[t].uap.v.values);
      CHECK(r1.trials[t].subset == r2.trials[t].subset);
      CHECK(r1.trials[t].seed == trial_seed(11, t));
    }
    CHECK(r1.best == r2.best);
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t t = 0; t < 3; ++t) {
      const double fr = r1.trials[t].train_fr.value_or(-1.0);
      if (fr > best) {
        best = fr;
        arg = t;
      }
    }
    CHECK(r1.best == arg);
    CHECK_THROWS_AS(run_level_experiment(level, s.data.train, *s.model, cfg, 0), ConfigError);
  }

  TEST_CASE("perturbation files round trip") {
    testing::TempDir dir;
    std::mt19937_64 rng(3);
    PerturbationFile f;
    f.v = Perturbation{testing::random_vector(kWaveLength, 0.001, rng), NormOrder::kLinf, 0.01};
    f.model_checksum = "0badf00d";
    f.config = {{"level", 3}, {"seed", 7}};
    const auto wav = save_perturbation(f, dir / "v.wavx");
    CHECK(wav == dir / "v.wav");
    CHECK(std::filesystem::exists(wav));
    CHECK(load_wav(wav).samples.size() == kWaveLength);
    const auto g = load_perturbation(dir / "v.wavx");
    CHECK(g.v.values == f.v.values);
    CHECK(g.v.p == NormOrder::kLinf);
    CHECK(g.v.xi == 0.01);
    CHECK(g.model_checksum == "0badf00d");
    CHECK(g.config == f.config);
    CHECK(perturbation_to_bytes(g) == perturbation_to_bytes(f));

    std::string bytes = perturbation_to_bytes(f);
    std::string bad = bytes;
    bad[bad.size() - 3] ^= 0x01;
    CHECK_THROWS_AS(perturbation_from_bytes(bad), ChecksumError);
    CHECK_THROWS_AS(perturbation_from_bytes(bytes.substr(0, bytes.size() - 100)), TruncatedFile);
    CHECK_THROWS_AS(perturbation_from_bytes(params_to_bytes(testing::toy_setup().trained.params)),
                    FormatError);
  }
}

TEST_SUITE("report") {
  TEST_CASE("zero perturbation fools nothing and has no loudness") {
    const auto& s = testing::toy_setup();
    const auto train = take_per_class(s.data.train, 10);
    const auto valid = take_per_class(s.data.valid, 10);
    const auto& labels = s.trained.params.label_set;
    const BlackBox b(*s.model);
    const std::vector<double> zero(kWaveLength, 0.0);
    const auto rep = evaluate_perturbation(zero, *s.model, &b, &labels, train, valid, labels,
                                           ReportMeta{3, 5, {{"xi", 0.1}}});
    REQUIRE(rep.rows.size() == 4);
    for (const auto& r : rep.rows) {
      CHECK(r.a_train.fooled == 0);
      CHECK(r.b_valid.fooled == 0);
      CHECK(r.a_train.ratio().value_or(-1.0) == 0.0);
      CHECK_FALSE(r.mean_db.has_value());
    }
    CHECK_FALSE(rep.total.mean_db.has_value());
    const std::string csv = report_csv(rep);
    CHECK(csv.rfind("class,frA_train,frA_valid,frB_train,frB_valid,mean_db\n", 0) == 0);
    CHECK(count_lines(csv) == 1 + labels.size() + 1);
    CHECK(csv.find("\ntotal,0,0,0,0,\n") != std::string::npos);
  }

  TEST_CASE("report cells are pooled and recomputable") {
    const auto& s = testing::toy_setup();
    const auto train = take_per_class(s.data.train, 10);
    const auto valid = take_per_class(s.data.valid, 10);
    const auto& labels = s.trained.params.label_set;
    std::mt19937_64 rng(9);
    auto v = testing::random_vector(kWaveLength, 1.0, rng);
    v = project(v, NormOrder::kL2, 0.5);
    const BlackBox b(*s.model);
    const auto rep =
        evaluate_perturbation(v, *s.model, &b, &labels, train, valid, labels, ReportMeta{});
    FoolingCounts pooled;
    std::size_t db_count = 0;
    for (std::size_t c = 0; c < labels.size(); ++c) {
      const auto va = filter_labels(valid, {labels[c]});
      const auto recomputed =
          fooling_counts(*s.model, views(va), truth_indices(s.trained.params, va), v);
      CHECK(recomputed == rep.rows[c].a_valid);
      CHECK(rep.rows[c].b_valid == rep.rows[c].a_valid);
      pooled += rep.rows[c].a_valid;
      db_count += rep.rows[c].db_count;
    }
    CHECK(pooled == rep.total.a_valid);
    CHECK(db_count == rep.total.db_count);
    CHECK(report_from_json(report_json(rep)) == rep);

    const auto no_b =
        evaluate_perturbation(v, *s.model, nullptr, nullptr, train, valid, labels, ReportMeta{});
    CHECK_FALSE(no_b.has_model_b);
    std::istringstream lines(report_csv(no_b));
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
      std::vector<std::string> cells;
      std::istringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      REQUIRE(cells.size() >= 5);
      CHECK_FALSE(cells[1].empty());
      CHECK(cells[3].empty());
      CHECK(cells[4].empty());
    }
    CHECK_THROWS_AS(
        evaluate_perturbation(v, *s.model, &b, nullptr, train, valid, labels, ReportMeta{}),
        ConfigError);
  }

  TEST_CASE("level 3 layout carries the reference totals") {
    FoolingReport rep;
    rep.level = 3;
    rep.trials = 5;
    rep.has_model_b = true;
    rep.total = row("total", 10000, 5258, 4664, 3653, 3870);
    rep.total.mean_db = -36.43;
    const std::string csv = report_csv(rep);
    CHECK(csv.find("total,0.5258,0.4664,0.3653,0.387,-36.43\n") != std::string::npos);
    const auto j = nlohmann::json::parse(report_json(rep));
    CHECK(j["total"]["frA_train"]["fr"].get<double>() == doctest::Approx(0.5258));
    CHECK(j["total"]["frB_valid"]["fr"].get<double>() == doctest::Approx(0.3870));
    CHECK(j["total"]["mean_db"].get<double>() == -36.43);
  }

  TEST_CASE("level 2 report mirrors a pair table") {
    // Train column of the no/go pair: 68.80 and 73.60 per class, 71.20 pooled.
    FoolingReport rep;
    rep.level = 2;
    rep.classes = {"no", "go"};
    rep.has_model_b = true;
    rep.rows = {row("no", 500, 344, 0, 0, 0), row("go", 500, 368, 0, 0, 0)};
    rep.total = row("total", 0, 0, 0, 0, 0);
    for (const auto& r : rep.rows) rep.total.a_train += r.a_train;
    CHECK(*rep.total.a_train.ratio() == doctest::Approx(0.712));
    const auto j = nlohmann::json::parse(report_json(rep));
    CHECK(j["pair"]["C1"] == "no");
    CHECK(j["pair"]["C2"] == "go");
    const std::string csv = report_csv(rep);
    CHECK(csv.find("no,0.688,") != std::string::npos);
    CHECK(csv.find("go,0.736,") != std::string::npos);
    CHECK(csv.find("total,0.712,") != std::string::npos);
    CHECK(count_lines(csv) == 4);
  }

  TEST_CASE("undefined ratios stay empty or null") {
    FoolingReport rep;
    rep.has_model_b = true;
    rep.total = row("total", 0, 0, 0, 0, 0);
    CHECK(report_csv(rep).find("\ntotal,,,,,\n") != std::string::npos);
    const auto j = nlohmann::json::parse(report_json(rep));
    CHECK(j["total"]["frA_train"]["fr"].is_null());
    CHECK(j["total"]["mean_db"].is_null());
    CHECK_THROWS_AS(report_from_json("{}"), FormatError);
  }

  TEST_CASE("report files are named by level and timestamp") {
    CHECK(report_filename(2, "20260101T000000", ReportFormat::kCsv) ==
          "report_level2_20260101T000000.csv");
    CHECK(report_filename(3, "x", ReportFormat::kJson) == "report_level3_x.json");
    testing::TempDir dir;
    FoolingReport rep;
    rep.total = row("total", 4, 1, 2, 0, 0);
    export_report(rep, ReportFormat::kJson, dir / "r.json");
    std::ifstream in(dir / "r.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(report_from_json(text) == rep);
  }
}
