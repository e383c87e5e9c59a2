#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "uap/waveform.hpp"

namespace uap {

struct FrontendConfig {
  std::size_t frame_length = 480;  // 30 ms
  std::size_t hop = 160;           // 10 ms
  std::size_t fft_size = 512;
  std::size_t mel_bands = 40;
  double mel_low_hz = 20.0;
  double mel_high_hz = 7600.0;
  std::size_t dct_coeffs = 13;
  double log_floor = 1e-6;
  int sample_rate_hz = kSampleRate;

  // Throws ConfigError when an invariant is violated.
  void validate() const;
  std::size_t num_frames(std::size_t signal_length = kWaveLength) const;
  // One past the last sample any frame reads.
  std::size_t reach(std::size_t signal_length = kWaveLength) const;

  bool operator==(const FrontendConfig&) const = default;
};

// Defaults used for the attacked model and for the transfer model.
FrontendConfig frontend_model_a();
FrontendConfig frontend_model_b();  // 25 ms frames, 64 mel bands, 16 coefficients

// Row-major frames x coeffs.
struct FeatureMap {
  std::size_t frames = 0;
  std::size_t coeffs = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t c) const { return values[t * coeffs + c]; }
};

// Intermediates kept by a forward pass for the matching backward pass.
struct MfccCache {
  std::size_t frames = 0;
  std::size_t signal_length = 0;
  std::vector<double> spectrum;  // frames x (fft_size/2+1) interleaved re, im
  std::vector<double> mel;       // frames x mel_bands, before the floor
};

// Triangular filters on the HTK mel scale; filter m covers bins
// [first_bin[m], first_bin[m] + weights[m].size()).
struct MelFilterbank {
  std::size_t bins = 0;
  std::vector<std::size_t> first_bin;
  std::vector<std::vector<double>> weights;

  std::vector<double> dense() const;  // mel_bands x bins
};

MelFilterbank make_mel_filterbank(const FrontendConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Differentiable MFCC: window, zero-pad, |DFT|^2, mel filterbank,
// log(max(., floor)), orthonormal DCT-II truncated to dct_coeffs.
// Immutable after construction; forward and backward are reentrant.
class MfccFrontend {
 public:
  explicit MfccFrontend(const FrontendConfig& cfg);
  ~MfccFrontend();
  MfccFrontend(const MfccFrontend&) = delete;
  MfccFrontend& operator=(const MfccFrontend&) = delete;

  const FrontendConfig& config() const { return cfg_; }
  const MelFilterbank& filterbank() const { return filterbank_; }
  const std::vector<double>& window() const { return window_; }
  const std::vector<double>& dct_matrix() const { return dct_; }  // coeffs x mel_bands

  FeatureMap forward(std::span<const double> x, MfccCache* cache = nullptr) const;

  // Vector-Jacobian product: returns d(upstream . features)/dx.
  std::vector<double> backward(const MfccCache& cache, const FeatureMap& upstream) const;

 private:
  FrontendConfig cfg_;
  MelFilterbank filterbank_;
  std::vector<double> window_;
  std::vector<double> dct_;
  void* r2c_plan_ = nullptr;
  void* c2r_plan_ = nullptr;
};

// Shared instance per configuration.
std::shared_ptr<const MfccFrontend> frontend_for(const FrontendConfig& cfg);

FeatureMap mfcc_forward(std::span<const double> x, const FrontendConfig& cfg,
                        MfccCache* cache = nullptr);
std::vector<double> mfcc_backward(const MfccCache& cache, const FeatureMap& upstream,
                                  const FrontendConfig& cfg);

}  // namespace uap
