#pragma once

// ".melz": "MEL1", u32 version, u32 n_frames, u32 n_mels, f64 fps, then
// n_frames*n_mels f32 values row-major. Little-endian throughout.

#include <filesystem>

#include "utivad/core/binio.hpp"
#include "utivad/dsp/mel.hpp"

namespace utivad::dsp {

inline constexpr std::uint32_t kMelzVersion = 1;

inline std::string encode_melz(const MelTrack& m) {
  io::ByteWriter w;
  w.bytes("MEL1");
  w.u32(kMelzVersion);
  w.u32(static_cast<std::uint32_t>(m.n_frames()));
  w.u32(static_cast<std::uint32_t>(m.n_mels()));
  w.f64(m.fps);
  for (double v : m.frames.data) w.f32(static_cast<float>(v));
  return w.str();
}

inline MelTrack decode_melz(std::string bytes, const std::string& source = "melz") {
  io::ByteReader r(std::move(bytes), source);
  if (r.bytes(4) != "MEL1") fail_validation(source, ": bad magic, expected MEL1");
  const std::uint32_t version = r.u32();
  if (version != kMelzVersion) fail_validation(source, ": unsupported version ", version);
  const std::uint32_t n_frames = r.u32();
  const std::uint32_t n_mels = r.u32();
  MelTrack m;
  m.fps = r.f64();
  if (!(m.fps > 0.0)) fail_validation(source, ": fps must be positive");
  m.frames = Matrix(n_frames, n_mels);
  for (double& v : m.frames.data) v = r.f32();
  if (!r.at_end()) fail_validation(source, ": trailing bytes");
  return m;
}

inline void write_melz(const std::filesystem::path& path, const MelTrack& m) {
  io::write_file_atomic(path, encode_melz(m));
}

inline MelTrack read_melz(const std::filesystem::path& path) {
  return decode_melz(io::read_file(path), path.string());
}

}  // namespace utivad::dsp
