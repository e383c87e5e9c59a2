#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uap/model.hpp"

namespace uap {

inline constexpr int kParamFormatVersion = 1;
inline constexpr int kPerturbationFormatVersion = 1;

// CRC-32 (zlib polynomial) of raw bytes, as 8 lowercase hex digits.
std::string crc32_hex(std::span<const unsigned char> bytes);
std::string file_checksum(const std::filesystem::path& path);

// Parameter file: one line of JSON header, '\n', then every array of
// ModelParams::values as little-endian IEEE-754 doubles.
std::string params_to_bytes(const ModelParams& params);
ModelParams params_from_bytes(const std::string& bytes);
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

// Checksum of the weight payload, used to tie perturbations to models.
std::string params_checksum(const ModelParams& params);

// Shared helpers for "JSON line + raw doubles" files.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view bytes, std::size_t count);

}  // namespace uap
