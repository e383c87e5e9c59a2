#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "uap/attacks.hpp"

namespace uap {

struct PerturbationFile {
  Perturbation v;
  std::string model_checksum;
  nlohmann::json config = nlohmann::json::object();
};

// Sidecar (.wavx): JSON header line with {p, xi, model checksum, config},
// then the raw samples as little-endian doubles.
std::string perturbation_to_bytes(const PerturbationFile& file);
PerturbationFile perturbation_from_bytes(const std::string& bytes);

// Writes the sidecar at `path` and a 16-bit WAV for listening next to it
// (same stem, .wav extension). Returns the WAV path.
std::filesystem::path save_perturbation(const PerturbationFile& file,
                                        const std::filesystem::path& path);
PerturbationFile load_perturbation(const std::filesystem::path& path);

}  // namespace uap
