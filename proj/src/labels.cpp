#include "uap/labels.hpp"

#include <string>

#include "uap/errors.hpp"

namespace uap {

std::optional<ClassLabel> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (kLabelNames[i] == name) return static_cast<ClassLabel>(i);
  }
  if (name == "unk" || name == "_unknown_") return ClassLabel::kUnknown;
  if (name == "_silence_") return ClassLabel::kSilence;
  return std::nullopt;
}

ClassLabel label_from_name(std::string_view name) {
  auto l = parse_label(name);
  if (!l) throw ConfigError("unknown class label '" + std::string(name) + "'");
  return *l;
}

std::vector<ClassLabel> all_labels() {
  std::vector<ClassLabel> out;
  for (std::size_t i = 0; i < kNumLabels; ++i) out.push_back(static_cast<ClassLabel>(i));
  return out;
}

std::vector<ClassLabel> parse_label_list(std::string_view csv) {
  std::vector<ClassLabel> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t end = csv.find_first_of(",-+ ", start);
    if (end == std::string_view::npos) end = csv.size();
    auto tok = csv.substr(start, end - start);
    if (!tok.empty()) out.push_back(label_from_name(tok));
    start = end + 1;
  }
  return out;
}

}  // namespace uap
