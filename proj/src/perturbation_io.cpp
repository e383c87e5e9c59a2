#include "uap/perturbation_io.hpp"

#include <fstream>
#include <iterator>

#include "uap/errors.hpp"
#include "uap/serialize.hpp"
#include "uap/wav.hpp"

namespace uap {

using nlohmann::json;

std::string perturbation_to_bytes(const PerturbationFile& file) {
  const std::string payload = encode_doubles(file.v.values);
  json header = {{"format", "uap-perturbation"},
                 {"format_version", kPerturbationFormatVersion},
                 {"p", norm_name(file.v.p)},
                 {"xi", file.v.xi},
                 {"length", file.v.values.size()},
                 {"model_checksum", file.model_checksum},
                 {"config", file.config},
                 {"checksum", crc32_hex({reinterpret_cast<const unsigned char*>(payload.data()),
                                         payload.size()})}};
  return header.dump() + "\n" + payload;
}

PerturbationFile perturbation_from_bytes(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw TruncatedFile("missing perturbation header");
  try {
    const json h = json::parse(bytes.substr(0, nl));
    if (h.at("format") != "uap-perturbation") throw FormatError("not a perturbation file");
    if (h.at("format_version").get<int>() != kPerturbationFormatVersion) {
      throw VersionMismatch("unsupported perturbation format version");
    }
    const std::size_t n = h.at("length");
    const std::string payload = bytes.substr(nl + 1);
    if (payload.size() < n * 8) throw TruncatedFile("perturbation payload truncated");
    if (crc32_hex({reinterpret_cast<const unsigned char*>(payload.data()), payload.size()}) !=
        h.at("checksum").get<std::string>()) {
      throw ChecksumError("perturbation checksum mismatch");
    }
    PerturbationFile f;
    f.v.values = decode_doubles(payload, n);
    f.v.p = parse_norm(h.at("p").get<std::string>());
    f.v.xi = h.at("xi");
    f.model_checksum = h.at("model_checksum");
    f.config = h.at("config");
    return f;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad perturbation header: ") + e.what());
  }
}

std::filesystem::path save_perturbation(const PerturbationFile& file,
                                        const std::filesystem::path& path) {
  const std::string bytes = perturbation_to_bytes(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
  auto wav = path;
  wav.replace_extension(".wav");
  save_wav(wav, file.v.values);
  return wav;
}

PerturbationFile load_perturbation(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return perturbation_from_bytes(bytes);
}

}  // namespace uap
