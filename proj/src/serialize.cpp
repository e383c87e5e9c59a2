#include "uap/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

#include "uap/errors.hpp"

namespace uap {

using nlohmann::json;

std::string crc32_hex(std::span<const unsigned char> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return crc32_hex({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

std::string encode_doubles(std::span<const double> values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

std::vector<double> decode_doubles(std::string_view bytes, std::size_t count) {
  if (bytes.size() < count * 8) throw TruncatedFile("payload shorter than declared");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= std::uint64_t(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

namespace {

std::string payload_crc(const std::string& payload) {
  return crc32_hex({reinterpret_cast<const unsigned char*>(payload.data()), payload.size()});
}

json arch_json(const Architecture& a) {
  return {{"conv1", {a.conv1_time, a.conv1_freq, a.conv1_channels}},
          {"conv2", {a.conv2_time, a.conv2_freq, a.conv2_channels}}};
}

json frontend_json(const FrontendConfig& f) {
  return {{"frame_length", f.frame_length}, {"hop", f.hop},
          {"fft_size", f.fft_size},         {"window", "hann"},
          {"mel_bands", f.mel_bands},       {"mel_range_hz", {f.mel_low_hz, f.mel_high_hz}},
          {"dct_coeffs", f.dct_coeffs},     {"log_floor", f.log_floor},
          {"sample_rate_hz", f.sample_rate_hz}};
}

}  // namespace

std::string params_to_bytes(const ModelParams& p) {
  p.validate();
  const std::string payload = encode_doubles(p.values);
  json labels = json::array();
  for (auto l : p.label_set) labels.push_back(std::string(label_name(l)));
  const NetworkShape s = p.shape();
  json header = {{"format", "uap-model"},
                 {"format_version", kParamFormatVersion},
                 {"architecture", arch_json(p.arch)},
                 {"feature_shape", {s.frames, s.coeffs}},
                 {"frontend", frontend_json(p.frontend)},
                 {"label_set", labels},
                 {"seed", p.rng_seed},
                 {"arrays", {"conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc_w", "fc_b",
                             "feat_mean", "feat_scale"}},
                 {"num_values", p.values.size()},
                 {"checksum", payload_crc(payload)}};
  return header.dump() + "\n" + payload;
}

ModelParams params_from_bytes(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw TruncatedFile("missing parameter header");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad parameter header: ") + e.what());
  }
  try {
    if (h.at("format") != "uap-model") throw FormatError("not a model parameter file");
    if (h.at("format_version").get<int>() != kParamFormatVersion) {
      throw VersionMismatch("unsupported parameter format version " +
                            h.at("format_version").dump());
    }
    ModelParams p;
    const auto& c1 = h.at("architecture").at("conv1");
    const auto& c2 = h.at("architecture").at("conv2");
    p.arch = Architecture{c1[0], c1[1], c1[2], c2[0], c2[1], c2[2]};
    const auto& f = h.at("frontend");
    p.frontend.frame_length = f.at("frame_length");
    p.frontend.hop = f.at("hop");
    p.frontend.fft_size = f.at("fft_size");
    p.frontend.mel_bands = f.at("mel_bands");
    p.frontend.mel_low_hz = f.at("mel_range_hz")[0];
    p.frontend.mel_high_hz = f.at("mel_range_hz")[1];
    p.frontend.dct_coeffs = f.at("dct_coeffs");
    p.frontend.log_floor = f.at("log_floor");
    p.frontend.sample_rate_hz = f.at("sample_rate_hz");
    for (const auto& l : h.at("label_set")) p.label_set.push_back(label_from_name(l.get<std::string>()));
    p.rng_seed = h.at("seed");
    const std::size_t n = h.at("num_values");
    const std::string_view payload = std::string_view(bytes).substr(nl + 1);
    if (payload.size() < n * 8) throw TruncatedFile("parameter payload truncated");
    if (payload.size() > n * 8) throw FormatError("trailing bytes after parameter payload");
    if (payload_crc(std::string(payload)) != h.at("checksum").get<std::string>()) {
      throw ChecksumError("parameter checksum mismatch");
    }
    p.values = decode_doubles(payload, n);
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad parameter header: ") + e.what());
  }
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  const std::string bytes = params_to_bytes(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return params_from_bytes(bytes);
}

std::string params_checksum(const ModelParams& params) {
  return payload_crc(encode_doubles(params.values));
}

}  // namespace uap
