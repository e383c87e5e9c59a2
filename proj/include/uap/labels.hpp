#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uap {

// Fixed 12-label vocabulary; the integer encoding follows declaration order.
enum class ClassLabel : std::uint8_t {
  kSilence = 0,
  kUnknown,
  kYes,
  kNo,
  kUp,
  kDown,
  kLeft,
  kRight,
  kOn,
  kOff,
  kStop,
  kGo,
};

inline constexpr std::size_t kNumLabels = 12;

inline constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "silence", "unknown", "yes", "no",  "up",   "down",
    "left",    "right",   "on",  "off", "stop", "go"};

inline constexpr int label_index(ClassLabel l) { return static_cast<int>(l); }

inline std::string_view label_name(ClassLabel l) {
  return kLabelNames[static_cast<std::size_t>(l)];
}

std::optional<ClassLabel> parse_label(std::string_view name);

// Throws ConfigError on an unknown name.
ClassLabel label_from_name(std::string_view name);

std::vector<ClassLabel> all_labels();

// Parses "yes,no" or "yes-left" style lists.
std::vector<ClassLabel> parse_label_list(std::string_view csv);

}  // namespace uap
