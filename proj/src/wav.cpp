#include "uap/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "uap/errors.hpp"

namespace uap {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

std::vector<std::int16_t> read_pcm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw MalformedWav("not a RIFF/WAVE file" + where);
  }

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw MalformedWav("truncated chunk" + where);

    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw MalformedWav("short fmt chunk" + where);
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = read_u16(f);
      const std::uint16_t channels = read_u16(f + 2);
      const std::uint32_t rate = read_u32(f + 4);
      const std::uint16_t bits = read_u16(f + 14);
      // 0xFFFE (extensible) is accepted when it carries plain PCM bits.
      if (format != 1 && format != 0xFFFE) throw BitDepthMismatch("not PCM" + where);
      if (channels != 1) {
        throw ChannelMismatch("expected mono, got " + std::to_string(channels) +
                              " channels" + where);
      }
      if (bits != 16) {
        throw BitDepthMismatch("expected 16-bit, got " + std::to_string(bits) + where);
      }
      if (rate != static_cast<std::uint32_t>(kSampleRate)) {
        throw SampleRateMismatch("expected 16000 Hz, got " + std::to_string(rate) + where);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw MalformedWav("data chunk before fmt chunk" + where);
      std::vector<std::int16_t> out(size / 2);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw MalformedWav("no data chunk" + where);
}

Waveform load_wav(const std::filesystem::path& path) {
  const auto pcm = read_pcm16(path);
  if (pcm.size() > kWaveLength) {
    throw TooLong(path.string() + " has " + std::to_string(pcm.size()) +
                  " samples, limit is 16000");
  }
  Waveform w;
  for (std::size_t i = 0; i < pcm.size(); ++i) w.samples[i] = pcm[i] / 32768.0;
  return w;
}

std::int16_t quantize_pcm16(double v) {
  const double scaled = std::nearbyint(clip_unit(v) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

void save_wav(const std::filesystem::path& path, std::span<const double> samples) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : samples) put_u16(out, static_cast<std::uint16_t>(quantize_pcm16(s)));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed for " + path.string());
}

std::vector<SampleView> views(const std::vector<Waveform>& set) {
  std::vector<SampleView> out;
  out.reserve(set.size());
  for (const auto& w : set) out.push_back(w.view());
  return out;
}

}  // namespace uap
