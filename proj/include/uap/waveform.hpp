#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "uap/labels.hpp"

namespace uap {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kWaveLength = 16000;

// One second of mono audio scaled to [-1, 1].
struct Waveform {
  std::vector<double> samples = std::vector<double>(kWaveLength, 0.0);
  int sample_rate_hz = kSampleRate;
  std::optional<ClassLabel> label;

  std::span<const double> view() const { return samples; }
};

inline double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// out[i] = clip(x[i] + v[i]); an empty v means no perturbation.
inline void add_clipped(std::span<const double> x, std::span<const double> v,
                        std::span<double> out) {
  if (v.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = clip_unit(x[i]);
    return;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = clip_unit(x[i] + v[i]);
}

using SampleView = std::span<const double>;

std::vector<SampleView> views(const std::vector<Waveform>& set);

}  // namespace uap
