#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "uap/labels.hpp"
#include "uap/waveform.hpp"

namespace uap {

struct Dataset {
  std::vector<Waveform> train;
  std::vector<Waveform> valid;
  std::vector<std::string> train_files;
  std::vector<std::string> valid_files;
  std::vector<std::string> unreadable;  // "path: reason"
};

// First `count` labels of the synthetic vocabulary: the ten commands in
// canonical order, then unknown, then silence.
std::vector<ClassLabel> toy_labels(std::size_t count);

struct SynthConfig {
  std::vector<ClassLabel> labels = toy_labels(4);
  std::size_t per_class = 200;  // clips per class, both splits together
  double valid_fraction = 0.2;
  std::uint64_t seed = 7;
};

// One synthetic clip: a jittered per-class chirp with harmonics and a smooth
// envelope over low-level noise, quantized to 16-bit values.
Waveform synth_clip(ClassLabel label, std::mt19937_64& rng);

Dataset synth_dataset(const SynthConfig& cfg);

// Writes dir/{train,valid}/<label>/<label>_NNNN.wav.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

// Reads <dir>/<label>/*.wav for every subdirectory named after a label.
// Unreadable files are listed in `unreadable`, not fatal.
std::vector<Waveform> load_class_dir(const std::filesystem::path& dir,
                                     std::vector<std::string>* files = nullptr,
                                     std::vector<std::string>* unreadable = nullptr);

// Accepts a directory with index.json, one with train/ and valid/
// subdirectories, or a flat class layout (everything goes to `train`).
Dataset load_dataset(const std::filesystem::path& dir);

// Only the samples whose label is in `labels`.
std::vector<Waveform> filter_labels(const std::vector<Waveform>& set,
                                    const std::vector<ClassLabel>& labels);

struct IngestResult {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t silence_clips = 0;
  std::vector<std::string> unreadable;
};

// Validates a Speech Commands style tree (one folder per word). Folders
// named after a command or `silence` keep their label, other words become
// `unknown`, and `_background_noise_` recordings are cut into one-second
// silence clips written under out_dir/silence. Writes out_dir/index.json
// with a seeded per-class train/valid split. Throws LayoutError when the
// source has no command folders.
IngestResult ingest_dataset(const std::filesystem::path& source,
                            const std::filesystem::path& out_dir, double valid_fraction,
                            std::uint64_t seed);

}  // namespace uap
