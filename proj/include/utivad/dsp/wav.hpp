#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "utivad/core/binio.hpp"

namespace utivad::dsp {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  bool empty() const noexcept { return samples.empty(); }
};

inline double rms(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double s = 0.0;
  for (double v : w.samples) s += v * v;
  return std::sqrt(s / static_cast<double>(w.samples.size()));
}

/// PCM16 mono RIFF/WAVE.
inline std::string encode_wav(const Waveform& w) {
  io::ByteWriter out;
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.bytes("RIFF");
  out.u32(36 + data_bytes);
  out.bytes("WAVE");
  out.bytes("fmt ");
  out.u32(16);
  out.u16(1);  // PCM
  out.u16(1);  // mono
  out.u32(static_cast<std::uint32_t>(w.sample_rate));
  out.u32(static_cast<std::uint32_t>(w.sample_rate) * 2);
  out.u16(2);
  out.u16(16);
  out.bytes("data");
  out.u32(data_bytes);
  for (double v : w.samples) {
    const long q = std::lround(std::clamp(v, -1.0, 1.0) * 32768.0);
    out.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(
        std::clamp(q, -32768L, 32767L))));
  }
  return out.str();
}

inline Waveform decode_wav(std::string bytes, const std::string& source = "wav") {
  io::ByteReader r(std::move(bytes), source);
  if (r.bytes(4) != "RIFF") fail_validation(source, ": not a RIFF file");
  r.u32();
  if (r.bytes(4) != "WAVE") fail_validation(source, ": not a WAVE file");
  Waveform w;
  bool have_fmt = false;
  while (!r.at_end()) {
    const std::string id = r.bytes(4);
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      const std::uint16_t format = r.u16();
      const std::uint16_t channels = r.u16();
      w.sample_rate = static_cast<int>(r.u32());
      r.u32();
      r.u16();
      const std::uint16_t bits = r.u16();
      if (format != 1 || channels != 1 || bits != 16) {
        fail_validation(source, ": only PCM16 mono is supported (format ", format,
                        ", channels ", channels, ", bits ", bits, ")");
      }
      if (size > 16) r.bytes(size - 16);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail_validation(source, ": data chunk before fmt chunk");
      w.samples.resize(size / 2);
      for (double& v : w.samples) {
        v = static_cast<std::int16_t>(r.u16()) / 32768.0;
      }
      if (size % 2) r.bytes(1);
    } else {
      r.bytes(size + (size & 1));
    }
  }
  if (!have_fmt) fail_validation(source, ": missing fmt chunk");
  if (w.sample_rate <= 0) fail_validation(source, ": invalid sample rate");
  return w;
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  io::write_file_atomic(path, encode_wav(w));
}

inline Waveform read_wav(const std::filesystem::path& path) {
  return decode_wav(io::read_file(path), path.string());
}

}  // namespace utivad::dsp
