#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uap/dataset.hpp"
#include "uap/distortion.hpp"
#include "uap/errors.hpp"
#include "uap/experiment.hpp"
#include "uap/kernels.hpp"
#include "uap/perturbation_io.hpp"
#include "uap/report.hpp"
#include "uap/serialize.hpp"
#include "uap/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uap;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Globals {
  std::uint64_t seed = 7;
  int jobs = 0;
  std::string workdir = ".";
};

fs::path resolve(const Globals& g, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(g.workdir) / path;
}

std::string utc_stamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

bool is_manifest(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.size() > 14 && name.compare(name.size() - 14, 14, ".manifest.json") == 0;
}

// CRC over the sorted relative paths and contents of every file below dir,
// manifests excluded.
std::string tree_checksum(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && !is_manifest(e.path())) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += f.generic_string() + ":" + file_checksum(dir / f) + "\n";
  return crc32_hex({reinterpret_cast<const unsigned char*>(acc.data()), acc.size()});
}

std::string checksum_of(const fs::path& p) {
  return fs::is_directory(p) ? tree_checksum(p) : file_checksum(p);
}

// One manifest per run: what was asked, what was read, what was written.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv, const Globals& g)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["cwd"] = fs::current_path().string();
    doc_["workdir"] = g.workdir;
    doc_["seed"] = g.seed;
    doc_["jobs"] = kernels::jobs();
    doc_["started_utc"] = utc_stamp();
    doc_["config"] = json::object();
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::object();
  }
  json& config() { return doc_["config"]; }
  void input(const fs::path& p) { doc_["inputs"][p.string()] = checksum_of(p); }
  void output(const fs::path& p) { doc_["outputs"][p.string()] = checksum_of(p); }
  void write(const fs::path& path) {
    doc_["wall_clock_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(path);
    out << doc_.dump(2) << "\n";
    if (!out) throw Error("cannot write manifest " + path.string());
    std::cout << "manifest: " << path.string() << "\n";
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<ClassLabel> labels_arg(const std::string& s) {
  return s.empty() ? std::vector<ClassLabel>{} : parse_label_list(s);
}

json level_json(const UniversalityLevel& l) {
  json names = json::array();
  for (auto c : l.classes) names.push_back(std::string(label_name(c)));
  return {{"level", l.level}, {"classes", names}};
}

json attack_json(const AttackConfig& c) {
  return {{"overshoot", c.overshoot}, {"max_iters", c.deepfool_max_iters},
          {"xi", c.xi},               {"p", norm_name(c.p)},
          {"alpha", c.alpha},         {"passes", c.max_passes},
          {"trials", c.trials},       {"seed", c.rng_seed}};
}

// ---- dataset ---------------------------------------------------------------

struct SynthArgs {
  std::size_t classes = 4;
  std::size_t per_class = 200;
  double valid_fraction = 0.2;
  std::string out = "data";
};

void cmd_synth(const Globals& g, const SynthArgs& a, const std::vector<std::string>& argv) {
  if (a.classes == 0 || a.classes > kNumLabels) throw ConfigError("--classes must lie in [1, 12]");
  Manifest m("dataset synth", argv, g);
  SynthConfig sc;
  sc.labels = toy_labels(a.classes);
  sc.per_class = a.per_class;
  sc.valid_fraction = a.valid_fraction;
  sc.seed = g.seed;
  m.config() = {{"classes", a.classes}, {"per_class", a.per_class},
                {"valid_fraction", a.valid_fraction}};
  const fs::path out = resolve(g, a.out);
  const Dataset d = synth_dataset(sc);
  write_dataset(d, out);
  std::cout << "wrote " << d.train.size() << " train and " << d.valid.size()
            << " valid clips to " << out.string() << "\n";
  m.output(out);
  m.write(out / "dataset.manifest.json");
}

struct IngestArgs {
  std::string source;
  std::string out = "data";
  double valid_fraction = 0.1;
};

void cmd_ingest(const Globals& g, const IngestArgs& a, const std::vector<std::string>& argv) {
  Manifest m("dataset ingest", argv, g);
  const fs::path src = resolve(g, a.source), out = resolve(g, a.out);
  m.config() = {{"source", a.source}, {"valid_fraction", a.valid_fraction}};
  const IngestResult r = ingest_dataset(src, out, a.valid_fraction, g.seed);
  std::cout << "indexed " << r.train << " train and " << r.valid << " valid clips ("
            << r.silence_clips << " silence clips cut from background noise)\n";
  for (const auto& u : r.unreadable) std::cerr << "unreadable: " << u << "\n";
  m.config()["unreadable"] = r.unreadable;
  m.output(out / "index.json");
  m.write(out / "dataset.manifest.json");
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string data = "data";
  std::string out = "model_a.mdl";
  std::string frontend = "a";
  std::string arch = "compact";
  TrainConfig cfg;
};

void cmd_train(const Globals& g, TrainArgs a, const std::vector<std::string>& argv) {
  Manifest m("train", argv, g);
  const fs::path data_dir = resolve(g, a.data), out = resolve(g, a.out);
  const FrontendConfig fe = a.frontend == "b" ? frontend_model_b() : frontend_model_a();
  const Architecture arch = a.arch == "wide" ? architecture_wide() : architecture_compact();
  a.cfg.seed = g.seed;
  m.config() = {{"frontend", a.frontend}, {"arch", a.arch},    {"epochs", a.cfg.epochs},
                {"batch", a.cfg.batch},   {"lr", a.cfg.lr},    {"lr_decay", a.cfg.lr_decay}};
  const Dataset d = load_dataset(data_dir);
  m.input(data_dir);
  for (const auto& u : d.unreadable) std::cerr << "unreadable: " << u << "\n";
  const TrainResult r = train(d.train, arch, fe, a.cfg, {}, d.valid.empty() ? nullptr : &d.valid);

  json log = json::array();
  for (const auto& e : r.log) {
    log.push_back({{"epoch", e.epoch},
                   {"loss", e.loss},
                   {"train_accuracy", e.train_accuracy},
                   {"valid_accuracy", e.valid_accuracy ? json(*e.valid_accuracy) : json(nullptr)}});
    std::printf("epoch %3zu  loss %.5f  train %.4f", e.epoch, e.loss, e.train_accuracy);
    if (e.valid_accuracy) std::printf("  valid %.4f", *e.valid_accuracy);
    std::printf("\n");
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_params(r.params, out);
  fs::path log_path = out;
  log_path += ".log.json";
  write_text(log_path, log.dump(2) + "\n");
  m.output(out);
  m.output(log_path);
  fs::path mp = out;
  mp += ".manifest.json";
  m.write(mp);
}

// ---- attack / eval -------------------------------------------------------------

struct AttackArgs {
  std::string model = "model_a.mdl";
  std::string model_b;
  std::string data = "data";
  std::string out = "attack";
  std::string format = "both";
  int level = 3;
  std::string classes;
  std::string p = "2";
  std::size_t per_class = 500;
  AttackConfig cfg;
};

void export_both(const FoolingReport& rep, const std::string& format, const fs::path& dir,
                 const std::string& stamp, Manifest& m) {
  for (auto f : {ReportFormat::kCsv, ReportFormat::kJson}) {
    if (format == "csv" && f != ReportFormat::kCsv) continue;
    if (format == "json" && f != ReportFormat::kJson) continue;
    const fs::path path = dir / report_filename(rep.level, stamp, f);
    export_report(rep, f, path);
    m.output(path);
    std::cout << "report: " << path.string() << "\n";
  }
}

void print_report(const FoolingReport& rep) {
  std::cout << report_csv(rep);
}

void cmd_attack(const Globals& g, AttackArgs a, const std::vector<std::string>& argv) {
  a.cfg.p = parse_norm(a.p);
  a.cfg.rng_seed = g.seed;
  a.cfg.validate();
  if (a.per_class == 0) throw ConfigError("--per-class must be positive");
  Manifest m("attack", argv, g);
  const fs::path model_path = resolve(g, a.model), data_dir = resolve(g, a.data),
                 out = resolve(g, a.out);
  const ModelParams pa = load_params(model_path);
  m.input(model_path);
  const UniversalityLevel level = make_level(a.level, labels_arg(a.classes), pa.label_set);
  std::optional<ModelParams> pb;
  if (!a.model_b.empty()) {
    pb = load_params(resolve(g, a.model_b));
    m.input(resolve(g, a.model_b));
  }
  const Dataset d = load_dataset(data_dir);
  m.input(data_dir);
  m.config() = {{"attack", attack_json(a.cfg)},
                {"universality", level_json(level)},
                {"per_class", a.per_class}};

  const WaveformModel model_a(pa);
  const ExperimentResult res = run_level_experiment(level, d.train, model_a, a.cfg, a.per_class);
  const TrialRecord& best = res.best_trial();
  json trials = json::array();
  for (const auto& t : res.trials) {
    std::size_t accepted = 0;
    for (const auto& e : t.uap.log) accepted += e.accepted ? 1 : 0;
    trials.push_back({{"trial", t.trial},
                      {"seed", t.seed},
                      {"raw_rate", t.uap.rate},
                      {"train_fr", t.train_fr ? json(*t.train_fr) : json(nullptr)},
                      {"passes", t.uap.passes},
                      {"accepted_updates", accepted},
                      {"deepfool_calls", t.uap.log.size()},
                      {"norm", norm(t.uap.v.values, a.cfg.p)}});
    std::printf("trial %zu  raw rate %.4f  train FR %s  passes %zu  accepted %zu\n", t.trial,
                t.uap.rate, t.train_fr ? std::to_string(*t.train_fr).c_str() : "undefined",
                t.uap.passes, accepted);
  }

  fs::create_directories(out);
  PerturbationFile pf;
  pf.v = best.uap.v;
  pf.model_checksum = params_checksum(pa);
  pf.config = m.config();
  pf.config["best_trial"] = best.trial;
  const fs::path pert = out / ("perturbation_level" + std::to_string(level.level) + ".wavx");
  const fs::path wav = save_perturbation(pf, pert);
  m.output(pert);
  m.output(wav);
  std::cout << "perturbation: " << pert.string() << "\n";

  std::vector<Waveform> crafting;
  for (std::size_t i : best.subset) crafting.push_back(d.train[i]);
  const auto valid = filter_labels(d.valid, level.classes);
  std::optional<WaveformModel> model_b;
  if (pb) model_b.emplace(*pb);
  const FoolingReport rep = evaluate_perturbation(
      best.uap.v.values, model_a, model_b ? &*model_b : nullptr, pb ? &pb->label_set : nullptr,
      crafting, valid, level.classes, ReportMeta{level.level, a.cfg.trials, pf.config});
  print_report(rep);
  const std::string stamp = utc_stamp();
  export_both(rep, a.format, out, stamp, m);
  const fs::path trials_path = out / ("trials_level" + std::to_string(level.level) + ".json");
  write_text(trials_path, json{{"best", res.best}, {"trials", trials}}.dump(2) + "\n");
  m.output(trials_path);
  m.write(out / "attack.manifest.json");
}

struct EvalArgs {
  std::string perturbation;
  std::string model_a = "model_a.mdl";
  std::string model_b;
  std::string data = "data";
  std::string out = "eval";
  std::string format = "both";
  std::string classes;
  int level = 0;
};

void cmd_eval(const Globals& g, const EvalArgs& a, const std::vector<std::string>& argv) {
  Manifest m("eval", argv, g);
  const fs::path pert = resolve(g, a.perturbation), out = resolve(g, a.out);
  const PerturbationFile pf = load_perturbation(pert);
  m.input(pert);
  const ModelParams pa = load_params(resolve(g, a.model_a));
  m.input(resolve(g, a.model_a));
  if (!pf.model_checksum.empty() && pf.model_checksum != params_checksum(pa)) {
    std::cerr << "note: perturbation was crafted on a different model A\n";
  }
  std::optional<ModelParams> pb;
  if (!a.model_b.empty()) {
    pb = load_params(resolve(g, a.model_b));
    m.input(resolve(g, a.model_b));
  }
  // Level and classes default to the ones the perturbation was crafted for.
  int lv = a.level;
  std::vector<ClassLabel> classes = labels_arg(a.classes);
  if (pf.config.contains("universality")) {
    const auto& u = pf.config["universality"];
    if (lv == 0) lv = u.value("level", 3);
    if (classes.empty()) {
      for (const auto& c : u["classes"]) classes.push_back(label_from_name(c.get<std::string>()));
    }
  }
  if (lv == 0) lv = 3;
  const UniversalityLevel level = make_level(lv, classes, pa.label_set);
  const Dataset d = load_dataset(resolve(g, a.data));
  m.input(resolve(g, a.data));
  m.config() = {{"universality", level_json(level)}, {"perturbation_config", pf.config}};

  const WaveformModel model_a(pa);
  std::optional<WaveformModel> model_b;
  if (pb) model_b.emplace(*pb);
  const std::size_t trials = pf.config.value("attack", json::object()).value("trials", 0);
  const FoolingReport rep = evaluate_perturbation(
      pf.v.values, model_a, model_b ? &*model_b : nullptr, pb ? &pb->label_set : nullptr,
      filter_labels(d.train, level.classes), filter_labels(d.valid, level.classes),
      level.classes, ReportMeta{level.level, trials, pf.config});
  print_report(rep);
  fs::create_directories(out);
  export_both(rep, a.format, out, utc_stamp(), m);
  m.write(out / "eval.manifest.json");
}

// ---- distortion ----------------------------------------------------------------

struct DistortionArgs {
  std::string perturbation;
  std::string dataset = "data/valid";
  std::string out = "distortion";
  double fraction = 0.95;
};

void cmd_distortion(const Globals& g, const DistortionArgs& a, const std::vector<std::string>& argv) {
  if (!(a.fraction > 0.0 && a.fraction <= 1.0)) throw ConfigError("--fraction must lie in (0, 1]");
  Manifest m("distortion", argv, g);
  const fs::path pert = resolve(g, a.perturbation), dir = resolve(g, a.dataset),
                 out = resolve(g, a.out);
  const PerturbationFile pf = load_perturbation(pert);
  m.input(pert);
  // A split root contributes its validation half; a class directory is used whole.
  const bool split = fs::exists(dir / "index.json") || fs::is_directory(dir / "train");
  const Dataset d = load_dataset(dir);
  m.input(dir);
  const auto& clips = split ? d.valid : d.train;
  m.config() = {{"energy_fraction", a.fraction}, {"split", split ? "valid" : "all"}};
  const DistortionReport rep = distortion_report(pf.v.values, clips, a.fraction);
  fs::create_directories(out);
  write_distortion(rep, out / "distortion.csv", out / "distortion.json");
  m.output(out / "distortion.csv");
  m.output(out / "distortion.json");
  auto show = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("n/a");
  };
  std::cout << "clips " << rep.records.size() << "  skipped " << rep.skipped_no_energy
            << "  vocal max " << show(rep.overall.vocal_db_max) << " dB  background max "
            << show(rep.overall.background_db_max) << " dB\n";
  m.write(out / "distortion.manifest.json");
}

int run(int argc, char** argv);

// Re-runs the command stored in a manifest and compares output checksums.
int cmd_replay(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest " + manifest_path);
  const json doc = json::parse(in);
  std::vector<std::string> args = doc.at("argv").get<std::vector<std::string>>();
  if (args.empty()) throw ConfigError("manifest has no argv");
  std::vector<char*> cargs;
  for (auto& s : args) cargs.push_back(s.data());
  // Recorded paths are relative to the directory the original run started in.
  fs::current_path(doc.at("cwd").get<std::string>());
  const int rc = run(static_cast<int>(cargs.size()), cargs.data());
  if (rc != 0) return rc;
  int mismatches = 0;
  for (const auto& [path, sum] : doc.at("outputs").items()) {
    const fs::path p(path);
    // Report file names carry a timestamp; only content-stable outputs are compared.
    if (p.filename().string().rfind("report_level", 0) == 0) continue;
    const std::string now = checksum_of(p);
    const bool same = now == sum.get<std::string>();
    mismatches += same ? 0 : 1;
    std::cout << (same ? "same     " : "DIFFERS  ") << path << "\n";
  }
  return mismatches == 0 ? 0 : kExitRuntime;
}

int run(int argc, char** argv) {
  CLI::App app{"Universal adversarial perturbations for speech command classifiers"};
  app.require_subcommand(1);
  // Global flags may also follow the subcommand.
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (default: UAP_AUDIO_JOBS or 1)");
  app.add_option("--workdir", g.workdir, "Base directory for relative paths")->capture_default_str();

  const std::vector<std::string> args(argv, argv + argc);
  int rc = 0;

  auto* dataset = app.add_subcommand("dataset", "Generate or ingest a dataset");
  dataset->require_subcommand(1);
  dataset->fallthrough();
  SynthArgs sa;
  auto* synth = dataset->add_subcommand("synth", "Write a synthetic command dataset");
  synth->add_option("--classes", sa.classes, "Number of classes (1-12)")->capture_default_str();
  synth->add_option("--per-class", sa.per_class, "Clips per class, both splits")
      ->capture_default_str();
  synth->add_option("--valid-fraction", sa.valid_fraction)->capture_default_str();
  synth->add_option("--out", sa.out, "Output directory")->capture_default_str();
  IngestArgs ia;
  auto* ingest = dataset->add_subcommand("ingest", "Index a Speech Commands style directory");
  ingest->add_option("--source", ia.source, "Source directory")->required();
  ingest->add_option("--out", ia.out, "Output directory")->capture_default_str();
  ingest->add_option("--valid-fraction", ia.valid_fraction)->capture_default_str();

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train a classifier");
  trainc->add_option("--data", ta.data, "Dataset directory")->capture_default_str();
  trainc->add_option("--out", ta.out, "Parameter file")->capture_default_str();
  trainc->add_option("--frontend", ta.frontend, "MFCC configuration")
      ->check(CLI::IsMember({"a", "b"}))
      ->capture_default_str();
  trainc->add_option("--arch", ta.arch)->check(CLI::IsMember({"compact", "wide"}))
      ->capture_default_str();
  trainc->add_option("--epochs", ta.cfg.epochs)->capture_default_str();
  trainc->add_option("--batch", ta.cfg.batch)->capture_default_str();
  trainc->add_option("--lr", ta.cfg.lr)->capture_default_str();

  AttackArgs aa;
  auto* attack = app.add_subcommand("attack", "Craft a universal perturbation");
  attack->add_option("--model", aa.model, "Attacked model")->capture_default_str();
  attack->add_option("--model-b", aa.model_b, "Transfer model for the report");
  attack->add_option("--data", aa.data)->capture_default_str();
  attack->add_option("--out", aa.out)->capture_default_str();
  attack->add_option("--format", aa.format)->check(CLI::IsMember({"csv", "json", "both"}))
      ->capture_default_str();
  attack->add_option("--level", aa.level)->check(CLI::Range(1, 3))->capture_default_str();
  attack->add_option("--classes", aa.classes, "Comma-separated class names");
  attack->add_option("--xi", aa.cfg.xi)->capture_default_str();
  attack->add_option("--p", aa.p, "Norm: 2 or inf")->capture_default_str();
  attack->add_option("--alpha", aa.cfg.alpha)->capture_default_str();
  attack->add_option("--overshoot", aa.cfg.overshoot)->capture_default_str();
  attack->add_option("--max-iters", aa.cfg.deepfool_max_iters)->capture_default_str();
  attack->add_option("--passes", aa.cfg.max_passes)->capture_default_str();
  attack->add_option("--trials", aa.cfg.trials)->capture_default_str();
  attack->add_option("--per-class", aa.per_class, "Crafting samples per class")
      ->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a perturbation on one or two models");
  eval->add_option("--perturbation", ea.perturbation)->required();
  eval->add_option("--model-a", ea.model_a)->capture_default_str();
  eval->add_option("--model-b", ea.model_b);
  eval->add_option("--data", ea.data)->capture_default_str();
  eval->add_option("--out", ea.out)->capture_default_str();
  eval->add_option("--format", ea.format)->check(CLI::IsMember({"csv", "json", "both"}))
      ->capture_default_str();
  eval->add_option("--level", ea.level, "Defaults to the crafting level")->check(CLI::Range(1, 3));
  eval->add_option("--classes", ea.classes);

  DistortionArgs da;
  auto* dist = app.add_subcommand("distortion", "Vocal/background loudness of a perturbation");
  dist->add_option("--perturbation", da.perturbation)->required();
  dist->add_option("--dataset", da.dataset)->capture_default_str();
  dist->add_option("--out", da.out)->capture_default_str();
  dist->add_option("--fraction", da.fraction, "Energy fraction of the vocal part")
      ->capture_default_str();

  std::string manifest;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs");
  replay->add_option("manifest", manifest)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (g.jobs <= 0) {
    const char* env = std::getenv("UAP_AUDIO_JOBS");
    g.jobs = env != nullptr ? std::atoi(env) : 1;
    if (g.jobs <= 0) {
      std::cerr << "error: UAP_AUDIO_JOBS must be a positive integer\n";
      return kExitConfig;
    }
  }
  kernels::set_jobs(g.jobs);

  try {
    if (*synth) cmd_synth(g, sa, args);
    else if (*ingest) cmd_ingest(g, ia, args);
    else if (*trainc) cmd_train(g, ta, args);
    else if (*attack) cmd_attack(g, aa, args);
    else if (*eval) cmd_eval(g, ea, args);
    else if (*dist) cmd_distortion(g, da, args);
    else if (*replay) rc = cmd_replay(manifest);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InsufficientSamples& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
