#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "uap/classifier.hpp"
#include "uap/dataset.hpp"
#include "uap/loudness.hpp"
#include "uap/model.hpp"
#include "uap/train.hpp"

namespace testing {

// logits = W x + b with W stored row-major (k x d).
class AffineClassifier : public uap::DifferentiableClassifier {
 public:
  AffineClassifier(std::vector<std::vector<double>> w, std::vector<double> b)
      : w_(std::move(w)), b_(std::move(b)) {}

  std::size_t num_classes() const override { return w_.size(); }
  std::size_t input_size() const override { return w_.front().size(); }

  std::vector<double> logits(uap::SampleView x) const override {
    std::vector<double> out(b_);
    for (std::size_t j = 0; j < w_.size(); ++j) {
      for (std::size_t i = 0; i < x.size(); ++i) out[j] += w_[j][i] * x[i];
    }
    return out;
  }

  std::unique_ptr<uap::Linearization> linearize(uap::SampleView x) const override {
    return std::make_unique<Lin>(*this, logits(x));
  }

  const std::vector<std::vector<double>>& weights() const { return w_; }
  const std::vector<double>& bias() const { return b_; }

 private:
  struct Lin : uap::Linearization {
    Lin(const AffineClassifier& m, std::vector<double> f) : model(m), f(std::move(f)) {}
    const std::vector<double>& logits() const override { return f; }
    std::vector<double> vjp(std::span<const double> weights) const override {
      std::vector<double> g(model.input_size(), 0.0);
      for (std::size_t j = 0; j < weights.size(); ++j) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += weights[j] * model.w_[j][i];
      }
      return g;
    }
    const AffineClassifier& model;
    std::vector<double> f;
  };

  std::vector<std::vector<double>> w_;
  std::vector<double> b_;
};

inline std::vector<double> random_vector(std::size_t n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = scale * nd(rng);
  return v;
}

// Noise plus a few tones, safely inside [-1, 1] and far above the log floor.
inline std::vector<double> random_waveform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x = random_vector(uap::kWaveLength, 0.02, rng);
  for (int k = 0; k < 3; ++k) {
    const double f = 200.0 + 3000.0 * u(rng);
    const double amp = 0.05 + 0.1 * u(rng);
    const double ph = 6.283185307179586 * u(rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += amp * std::sin(6.283185307179586 * f * static_cast<double>(i) / 16000.0 + ph);
    }
  }
  return x;
}

// First 1-based position whose cumulative energy reaches each percentile,
// summed in long double.
inline uap::EnergyPartition partition_oracle(const std::vector<double>& x, double fraction) {
  long double total = 0.0L;
  for (double v : x) total += static_cast<long double>(v) * v;
  const long double tail = (1.0L - fraction) / 2.0L;
  const long double slack = static_cast<long double>(uap::kPartitionSlack) * total;
  const long double lo = tail * total - slack;
  const long double hi = (1.0L - tail) * total - slack;
  uap::EnergyPartition p;
  long double cum = 0.0L;
  bool have_a = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cum += static_cast<long double>(x[i]) * x[i];
    if (!have_a && cum >= lo) {
      p.a = i + 1;
      have_a = true;
    }
    if (cum >= hi) {
      p.b = i + 1;
      break;
    }
  }
  return p;
}

class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("uap_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Minimal RIFF writer with arbitrary format fields, for malformed inputs.
inline void write_raw_wav(const std::filesystem::path& path, std::uint32_t rate,
                          std::uint16_t channels, std::uint16_t bits,
                          const std::vector<std::int16_t>& samples) {
  std::string data;
  if (bits == 16) {
    for (std::int16_t s : samples) {
      data.push_back(static_cast<char>(s & 0xff));
      data.push_back(static_cast<char>((s >> 8) & 0xff));
    }
  } else {
    for (std::int16_t s : samples) data.push_back(static_cast<char>(s));
  }
  auto u32 = [](std::string& o, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) o.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [](std::string& o, std::uint16_t v) {
    o.push_back(static_cast<char>(v & 0xff));
    o.push_back(static_cast<char>(v >> 8));
  };
  std::string out = "RIFF";
  u32(out, static_cast<std::uint32_t>(36 + data.size()));
  out += "WAVEfmt ";
  u32(out, 16);
  u16(out, 1);
  u16(out, channels);
  u32(out, rate);
  u32(out, rate * channels * bits / 8);
  u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  u16(out, bits);
  out += "data";
  u32(out, static_cast<std::uint32_t>(data.size()));
  out += data;
  std::ofstream(path, std::ios::binary).write(out.data(), static_cast<std::streamsize>(out.size()));
}

// Small synthetic 4-class set and a model trained on it, built once.
struct ToySetup {
  uap::Dataset data;
  uap::TrainResult trained;
  std::shared_ptr<const uap::WaveformModel> model;
};

inline const ToySetup& toy_setup() {
  static const ToySetup setup = [] {
    ToySetup s;
    uap::SynthConfig sc;
    sc.per_class = 200;
    sc.seed = 7;
    s.data = uap::synth_dataset(sc);
    uap::TrainConfig tc;
    tc.epochs = 8;
    tc.seed = 1;
    s.trained = uap::train(s.data.train, uap::architecture_compact(), uap::frontend_model_a(), tc,
                           {}, &s.data.valid);
    s.model = std::make_shared<const uap::WaveformModel>(s.trained.params);
    return s;
  }();
  return setup;
}

}  // namespace testing
