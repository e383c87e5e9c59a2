#include "uap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include <json.hpp>

#include "uap/errors.hpp"
#include "uap/wav.hpp"

namespace uap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Prototype {
  double f_start;
  double f_end;
  double harmonic;  // relative level of the second harmonic
};

// Start/end frequency of each command's chirp, in canonical label order
// (yes .. go).
constexpr Prototype kCommandPrototypes[10] = {
    {500, 1500, 0.4},  {1500, 500, 0.4},   {800, 800, 0.6},    {2500, 1200, 0.3},
    {400, 700, 0.5},   {3000, 3000, 0.2},  {1100, 2000, 0.4},  {2000, 1100, 0.2},
    {600, 600, 0.1},   {1800, 3500, 0.3}};

std::vector<std::string> sorted_entries(const fs::path& dir, bool want_dirs) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (want_dirs ? e.is_directory() : (e.is_regular_file() && e.path().extension() == ".wav")) {
      out.push_back(e.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void chirp(std::vector<double>& out, std::size_t onset, std::size_t len, double f0, double f1,
           double amp, double harmonic) {
  const double ramp = std::min<double>(640.0, static_cast<double>(len) / 4.0);
  double phase = 0.0;
  for (std::size_t n = 0; n < len && onset + n < out.size(); ++n) {
    const double u = static_cast<double>(n) / static_cast<double>(len);
    const double f = f0 + (f1 - f0) * u;
    phase += 2.0 * std::numbers::pi * f / kSampleRate;
    double env = 1.0;
    const double dn = static_cast<double>(n);
    const double tail = static_cast<double>(len - n);
    if (dn < ramp) env = std::sin(0.5 * std::numbers::pi * dn / ramp);
    if (tail < ramp) env = std::sin(0.5 * std::numbers::pi * tail / ramp);
    out[onset + n] += amp * env * env * (std::sin(phase) + harmonic * std::sin(2.0 * phase));
  }
}

}  // namespace

std::vector<ClassLabel> toy_labels(std::size_t count) {
  static const std::vector<ClassLabel> order = [] {
    std::vector<ClassLabel> o;
    for (std::size_t i = label_index(ClassLabel::kYes); i < kNumLabels; ++i) {
      o.push_back(static_cast<ClassLabel>(i));
    }
    o.push_back(ClassLabel::kUnknown);
    o.push_back(ClassLabel::kSilence);
    return o;
  }();
  if (count < 1 || count > kNumLabels) throw ConfigError("class count must lie in [1, 12]");
  std::vector<ClassLabel> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.begin(), out.end());
  return out;
}

Waveform synth_clip(ClassLabel label, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  Waveform w;
  w.label = label;
  auto& s = w.samples;

  auto log_uni = [&](double a, double b) { return std::exp(uni(std::log(a), std::log(b))); };
  // Command clips sit on a near-digital-silence floor of one to three LSB.
  const double noise_sigma =
      label == ClassLabel::kSilence ? log_uni(3e-4, 3e-3) : log_uni(3e-5, 1e-4);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : s) v = noise_sigma * noise(rng);

  if (label != ClassLabel::kSilence) {
    double f0, f1, harmonic;
    if (label == ClassLabel::kUnknown) {
      f0 = uni(300.0, 3500.0);
      f1 = uni(300.0, 3500.0);
      harmonic = uni(0.0, 0.5);
    } else {
      const auto& p = kCommandPrototypes[label_index(label) - label_index(ClassLabel::kYes)];
      const double jitter = uni(0.94, 1.06);
      f0 = p.f_start * jitter;
      f1 = p.f_end * jitter;
      harmonic = p.harmonic;
    }
    const auto len = static_cast<std::size_t>(uni(0.35, 0.6) * kSampleRate);
    const auto onset = static_cast<std::size_t>(uni(0.05, 0.95 - static_cast<double>(len) / kSampleRate) *
                                                kSampleRate);
    chirp(s, onset, len, f0, f1, log_uni(0.01, 0.3), harmonic);
  }

  for (double& v : s) v = quantize_pcm16(v) / 32768.0;
  return w;
}

Dataset synth_dataset(const SynthConfig& cfg) {
  if (cfg.labels.empty()) throw ConfigError("synthetic dataset needs at least one class");
  if (cfg.per_class == 0) throw ConfigError("per-class count must be positive");
  if (!(cfg.valid_fraction >= 0.0 && cfg.valid_fraction < 1.0)) {
    throw ConfigError("valid fraction must lie in [0, 1)");
  }
  Dataset data;
  const auto n_valid = static_cast<std::size_t>(
      std::llround(cfg.valid_fraction * static_cast<double>(cfg.per_class)));
  for (ClassLabel label : cfg.labels) {
    // Independent stream per class so adding classes does not reshuffle others.
    std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(label_index(label)) + 1};
    std::mt19937_64 rng(seq);
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s/%s_%04zu.wav", std::string(label_name(label)).c_str(),
                    std::string(label_name(label)).c_str(), i);
      if (i < cfg.per_class - n_valid) {
        data.train.push_back(synth_clip(label, rng));
        data.train_files.push_back(std::string("train/") + name);
      } else {
        data.valid.push_back(synth_clip(label, rng));
        data.valid_files.push_back(std::string("valid/") + name);
      }
    }
  }
  return data;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  auto write = [&](const std::vector<Waveform>& set, const std::vector<std::string>& files) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      const fs::path p = dir / files[i];
      fs::create_directories(p.parent_path());
      save_wav(p, set[i].samples);
    }
  };
  write(data.train, data.train_files);
  write(data.valid, data.valid_files);
}

std::vector<Waveform> load_class_dir(const fs::path& dir, std::vector<std::string>* files,
                                     std::vector<std::string>* unreadable) {
  if (!fs::is_directory(dir)) throw LayoutError(dir.string() + " is not a directory");
  std::vector<Waveform> out;
  for (const auto& sub : sorted_entries(dir, true)) {
    const auto label = parse_label(sub);
    if (!label) continue;
    for (const auto& f : sorted_entries(dir / sub, false)) {
      const fs::path p = dir / sub / f;
      try {
        Waveform w = load_wav(p);
        w.label = label;
        out.push_back(std::move(w));
        if (files != nullptr) files->push_back(p.string());
      } catch (const WavError& e) {
        if (unreadable != nullptr) unreadable->push_back(p.string() + ": " + e.what());
      }
    }
  }
  return out;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset data;
  if (fs::exists(dir / "index.json")) {
    std::ifstream in(dir / "index.json");
    json idx = json::parse(in);
    const fs::path root = idx.value("root", dir.string());
    for (const auto& e : idx.at("files")) {
      const fs::path rel = e.at("path").get<std::string>();
      const fs::path p = rel.is_absolute() ? rel : (fs::path(root) / rel);
      try {
        Waveform w = load_wav(p);
        w.label = label_from_name(e.at("label").get<std::string>());
        const bool valid = e.at("split") == "valid";
        (valid ? data.valid : data.train).push_back(std::move(w));
        (valid ? data.valid_files : data.train_files).push_back(p.string());
      } catch (const WavError& err) {
        data.unreadable.push_back(p.string() + ": " + err.what());
      }
    }
    return data;
  }
  if (fs::is_directory(dir / "train")) {
    data.train = load_class_dir(dir / "train", &data.train_files, &data.unreadable);
    if (fs::is_directory(dir / "valid")) {
      data.valid = load_class_dir(dir / "valid", &data.valid_files, &data.unreadable);
    }
    return data;
  }
  data.train = load_class_dir(dir, &data.train_files, &data.unreadable);
  if (data.train.empty()) throw LayoutError("no labeled WAV files under " + dir.string());
  return data;
}

std::vector<Waveform> filter_labels(const std::vector<Waveform>& set,
                                    const std::vector<ClassLabel>& labels) {
  std::vector<Waveform> out;
  for (const auto& w : set) {
    if (w.label && std::find(labels.begin(), labels.end(), *w.label) != labels.end()) {
      out.push_back(w);
    }
  }
  return out;
}

IngestResult ingest_dataset(const fs::path& source, const fs::path& out_dir, double valid_fraction,
                            std::uint64_t seed) {
  if (!fs::is_directory(source)) throw LayoutError(source.string() + " is not a directory");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) {
    throw ConfigError("valid fraction must lie in [0, 1)");
  }
  const auto subdirs = sorted_entries(source, true);
  std::size_t commands = 0;
  for (const auto& d : subdirs) {
    const auto l = parse_label(d);
    if (l && *l != ClassLabel::kUnknown && *l != ClassLabel::kSilence) ++commands;
  }
  if (commands == 0) {
    throw LayoutError(source.string() + " has no command class subfolders (yes, no, up, ...)");
  }

  IngestResult result;
  fs::create_directories(out_dir);
  // label -> relative paths (relative to `root` in the index)
  std::map<ClassLabel, std::vector<std::string>> by_label;
  const fs::path abs_source = fs::absolute(source);
  const fs::path abs_out = fs::absolute(out_dir);

  for (const auto& d : subdirs) {
    if (d == "_background_noise_") {
      fs::create_directories(abs_out / "silence");
      for (const auto& f : sorted_entries(source / d, false)) {
        try {
          const auto pcm = read_pcm16(source / d / f);
          for (std::size_t start = 0; start + kWaveLength <= pcm.size(); start += kWaveLength) {
            std::vector<double> clip(kWaveLength);
            for (std::size_t i = 0; i < kWaveLength; ++i) clip[i] = pcm[start + i] / 32768.0;
            char name[256];
            std::snprintf(name, sizeof name, "%s_%05zu.wav",
                          fs::path(f).stem().string().c_str(), start / kWaveLength);
            const fs::path p = abs_out / "silence" / name;
            save_wav(p, clip);
            by_label[ClassLabel::kSilence].push_back(p.string());
            ++result.silence_clips;
          }
        } catch (const WavError& e) {
          result.unreadable.push_back((source / d / f).string() + ": " + e.what());
        }
      }
      continue;
    }
    const ClassLabel label = parse_label(d).value_or(ClassLabel::kUnknown);
    for (const auto& f : sorted_entries(source / d, false)) {
      const fs::path p = abs_source / d / f;
      try {
        (void)load_wav(p);
        by_label[label].push_back(p.string());
      } catch (const WavError& e) {
        result.unreadable.push_back(p.string() + ": " + e.what());
      }
    }
  }

  json files = json::array();
  for (auto& [label, paths] : by_label) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(label_index(label)) + 1};
    std::mt19937_64 rng(seq);
    std::shuffle(paths.begin(), paths.end(), rng);
    const auto n_valid = static_cast<std::size_t>(
        std::llround(valid_fraction * static_cast<double>(paths.size())));
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const bool valid = i < n_valid;
      files.push_back({{"path", paths[i]},
                       {"label", std::string(label_name(label))},
                       {"split", valid ? "valid" : "train"}});
      ++(valid ? result.valid : result.train);
    }
  }
  json idx = {{"root", abs_out.string()},
              {"source", abs_source.string()},
              {"valid_fraction", valid_fraction},
              {"seed", seed},
              {"unreadable", result.unreadable},
              {"files", files}};
  std::ofstream out(out_dir / "index.json");
  out << idx.dump(2) << "\n";
  if (!out) throw Error("cannot write index.json");
  return result;
}

}  // namespace uap
