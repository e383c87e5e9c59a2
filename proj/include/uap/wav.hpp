#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uap/waveform.hpp"

namespace uap {

// Strict reader: mono, 16-bit PCM, 16 kHz, at most one second. Shorter
// files are zero-padded on the right.
Waveform load_wav(const std::filesystem::path& path);

// Same format checks but no length limit; returns the raw PCM samples.
std::vector<std::int16_t> read_pcm16(const std::filesystem::path& path);

// Samples are clipped to [-1, 1], scaled by 32768 and rounded; +1.0 maps to
// 32767.
void save_wav(const std::filesystem::path& path, std::span<const double> samples);

std::int16_t quantize_pcm16(double v);

}  // namespace uap
