#include "uap/frontend.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

#include <fftw3.h>

#include "uap/errors.hpp"

namespace uap {
namespace {

// FFTW's planner is not thread-safe; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void FrontendConfig::validate() const {
  if (frame_length == 0 || hop == 0) throw ConfigError("frame_length and hop must be positive");
  if (frame_length > fft_size) throw ConfigError("frame_length must not exceed fft_size");
  if (fft_size % 2 != 0) throw ConfigError("fft_size must be even");
  if (dct_coeffs == 0 || dct_coeffs > mel_bands) {
    throw ConfigError("dct_coeffs must lie in [1, mel_bands]");
  }
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
  if (!(mel_low_hz >= 0.0 && mel_low_hz < mel_high_hz &&
        mel_high_hz <= sample_rate_hz / 2.0)) {
    throw ConfigError("mel range must satisfy 0 <= low < high <= Nyquist");
  }
  if (frame_length > kWaveLength) throw ConfigError("frame_length longer than a clip");
}

std::size_t FrontendConfig::num_frames(std::size_t signal_length) const {
  if (signal_length < frame_length) return 0;
  return (signal_length - frame_length) / hop + 1;
}

std::size_t FrontendConfig::reach(std::size_t signal_length) const {
  const std::size_t n = num_frames(signal_length);
  return n == 0 ? 0 : (n - 1) * hop + frame_length;
}

FrontendConfig frontend_model_a() { return FrontendConfig{}; }

FrontendConfig frontend_model_b() {
  FrontendConfig cfg;
  cfg.frame_length = 400;
  cfg.mel_bands = 64;
  cfg.dct_coeffs = 16;
  return cfg;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank make_mel_filterbank(const FrontendConfig& cfg) {
  MelFilterbank fb;
  fb.bins = cfg.fft_size / 2 + 1;
  const double lo = hz_to_mel(cfg.mel_low_hz);
  const double hi = hz_to_mel(cfg.mel_high_hz);
  const double step = (hi - lo) / static_cast<double>(cfg.mel_bands + 1);
  const double bin_hz = static_cast<double>(cfg.sample_rate_hz) / static_cast<double>(cfg.fft_size);

  for (std::size_t m = 0; m < cfg.mel_bands; ++m) {
    const double left = lo + step * static_cast<double>(m);
    const double center = left + step;
    const double right = center + step;
    std::size_t first = fb.bins;
    std::vector<double> w;
    for (std::size_t k = 0; k < fb.bins; ++k) {
      const double hz = bin_hz * static_cast<double>(k);
      if (hz < cfg.mel_low_hz || hz > cfg.mel_high_hz) continue;
      const double mel = hz_to_mel(hz);
      const double weight =
          std::max(0.0, std::min((mel - left) / (center - left), (right - mel) / (right - center)));
      if (weight <= 0.0) {
        if (first != fb.bins) break;
        continue;
      }
      if (first == fb.bins) first = k;
      w.push_back(weight);
    }
    if (first == fb.bins) first = 0;
    fb.first_bin.push_back(first);
    fb.weights.push_back(std::move(w));
  }
  return fb;
}

std::vector<double> MelFilterbank::dense() const {
  std::vector<double> out(first_bin.size() * bins, 0.0);
  for (std::size_t m = 0; m < first_bin.size(); ++m) {
    for (std::size_t j = 0; j < weights[m].size(); ++j) {
      out[m * bins + first_bin[m] + j] = weights[m][j];
    }
  }
  return out;
}

MfccFrontend::MfccFrontend(const FrontendConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  filterbank_ = make_mel_filterbank(cfg_);

  window_.resize(cfg_.frame_length);
  for (std::size_t n = 0; n < cfg_.frame_length; ++n) {
    window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                      static_cast<double>(cfg_.frame_length));
  }

  const std::size_t m_count = cfg_.mel_bands;
  dct_.resize(cfg_.dct_coeffs * m_count);
  for (std::size_t c = 0; c < cfg_.dct_coeffs; ++c) {
    const double scale = std::sqrt((c == 0 ? 1.0 : 2.0) / static_cast<double>(m_count));
    for (std::size_t m = 0; m < m_count; ++m) {
      dct_[c * m_count + m] =
          scale * std::cos(std::numbers::pi * static_cast<double>(c) *
                           (static_cast<double>(m) + 0.5) / static_cast<double>(m_count));
    }
  }

  const int n = static_cast<int>(cfg_.fft_size);
  std::lock_guard lock(planner_mutex());
  double* real = fftw_alloc_real(cfg_.fft_size);
  fftw_complex* cplx = fftw_alloc_complex(cfg_.fft_size / 2 + 1);
  r2c_plan_ = fftw_plan_dft_r2c_1d(n, real, cplx, FFTW_ESTIMATE | FFTW_UNALIGNED);
  c2r_plan_ = fftw_plan_dft_c2r_1d(n, cplx, real, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(real);
  fftw_free(cplx);
  if (r2c_plan_ == nullptr || c2r_plan_ == nullptr) throw Error("FFTW planning failed");
}

MfccFrontend::~MfccFrontend() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(r2c_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(c2r_plan_));
}

FeatureMap MfccFrontend::forward(std::span<const double> x, MfccCache* cache) const {
  const std::size_t frames = cfg_.num_frames(x.size());
  const std::size_t bins = cfg_.fft_size / 2 + 1;
  const std::size_t mels = cfg_.mel_bands;
  const std::size_t coeffs = cfg_.dct_coeffs;

  FeatureMap out{frames, coeffs, std::vector<double>(frames * coeffs)};
  if (cache != nullptr) {
    cache->frames = frames;
    cache->signal_length = x.size();
    cache->spectrum.assign(frames * bins * 2, 0.0);
    cache->mel.assign(frames * mels, 0.0);
  }

  std::vector<double> frame(cfg_.fft_size, 0.0);
  std::vector<double> spec_local(bins * 2);
  std::vector<double> power(bins);
  std::vector<double> logmel(mels);
  auto plan = static_cast<fftw_plan>(r2c_plan_);

  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = x.data() + t * cfg_.hop;
    for (std::size_t n = 0; n < cfg_.frame_length; ++n) frame[n] = src[n] * window_[n];

    double* spec = cache != nullptr ? cache->spectrum.data() + t * bins * 2 : spec_local.data();
    fftw_execute_dft_r2c(plan, frame.data(), reinterpret_cast<fftw_complex*>(spec));
    for (std::size_t k = 0; k < bins; ++k) {
      power[k] = spec[2 * k] * spec[2 * k] + spec[2 * k + 1] * spec[2 * k + 1];
    }

    for (std::size_t m = 0; m < mels; ++m) {
      const auto& w = filterbank_.weights[m];
      const double* p = power.data() + filterbank_.first_bin[m];
      double e = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) e += w[j] * p[j];
      if (cache != nullptr) cache->mel[t * mels + m] = e;
      logmel[m] = std::log(std::max(e, cfg_.log_floor));
    }

    double* row = out.values.data() + t * coeffs;
    for (std::size_t c = 0; c < coeffs; ++c) {
      const double* d = dct_.data() + c * mels;
      double acc = 0.0;
      for (std::size_t m = 0; m < mels; ++m) acc += d[m] * logmel[m];
      row[c] = acc;
    }
  }
  return out;
}

std::vector<double> MfccFrontend::backward(const MfccCache& cache,
                                           const FeatureMap& upstream) const {
  const std::size_t signal_length = cache.signal_length;
  const std::size_t bins = cfg_.fft_size / 2 + 1;
  const std::size_t mels = cfg_.mel_bands;
  const std::size_t coeffs = cfg_.dct_coeffs;
  if (upstream.frames != cache.frames || upstream.coeffs != coeffs ||
      upstream.values.size() != upstream.frames * upstream.coeffs ||
      cache.mel.size() != cache.frames * mels || cache.frames != cfg_.num_frames(signal_length)) {
    throw ShapeMismatch("MFCC backward: cache and upstream shapes disagree");
  }

  std::vector<double> grad(signal_length, 0.0);
  std::vector<double> dmel(mels);
  std::vector<double> dpow(bins);
  std::vector<double> half(bins * 2);
  std::vector<double> frame_grad(cfg_.fft_size);
  auto plan = static_cast<fftw_plan>(c2r_plan_);

  for (std::size_t t = 0; t < cache.frames; ++t) {
    const double* up = upstream.values.data() + t * coeffs;
    const double* mel = cache.mel.data() + t * mels;
    bool any = false;
    for (std::size_t m = 0; m < mels; ++m) {
      double g = 0.0;
      for (std::size_t c = 0; c < coeffs; ++c) g += dct_[c * mels + m] * up[c];
      dmel[m] = mel[m] > cfg_.log_floor ? g / mel[m] : 0.0;
      any = any || dmel[m] != 0.0;
    }
    if (!any) continue;

    std::fill(dpow.begin(), dpow.end(), 0.0);
    for (std::size_t m = 0; m < mels; ++m) {
      const auto& w = filterbank_.weights[m];
      double* p = dpow.data() + filterbank_.first_bin[m];
      for (std::size_t j = 0; j < w.size(); ++j) p[j] += w[j] * dmel[m];
    }

    // d|X_k|^2/ds_n = 2 Re(X_k e^{+i 2 pi k n / N}); summing over k is a
    // Hermitian inverse real DFT of Z_k = 2 dpow_k X_k.
    const double* spec = cache.spectrum.data() + t * bins * 2;
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = 2.0 * dpow[k] * spec[2 * k];
      const double im = 2.0 * dpow[k] * spec[2 * k + 1];
      if (k == 0 || k == bins - 1) {
        half[2 * k] = re;
        half[2 * k + 1] = 0.0;
      } else {
        half[2 * k] = 0.5 * re;
        half[2 * k + 1] = 0.5 * im;
      }
    }
    fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(half.data()), frame_grad.data());

    double* dst = grad.data() + t * cfg_.hop;
    for (std::size_t n = 0; n < cfg_.frame_length; ++n) dst[n] += window_[n] * frame_grad[n];
  }
  return grad;
}

std::shared_ptr<const MfccFrontend> frontend_for(const FrontendConfig& cfg) {
  static std::mutex mutex;
  static std::vector<std::pair<FrontendConfig, std::shared_ptr<const MfccFrontend>>> cache;
  std::lock_guard lock(mutex);
  for (const auto& [c, fe] : cache) {
    if (c == cfg) return fe;
  }
  auto fe = std::make_shared<const MfccFrontend>(cfg);
  cache.emplace_back(cfg, fe);
  return fe;
}

FeatureMap mfcc_forward(std::span<const double> x, const FrontendConfig& cfg, MfccCache* cache) {
  return frontend_for(cfg)->forward(x, cache);
}

std::vector<double> mfcc_backward(const MfccCache& cache, const FeatureMap& upstream,
                                  const FrontendConfig& cfg) {
  return frontend_for(cfg)->backward(cache, upstream);
}

}  // namespace uap
