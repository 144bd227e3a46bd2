#pragma once

// Ultrasound tongue image sequences and the ".utiz" container:
// "UTI1", u32 version, u32 n_frames, u32 height, u32 width, u32 dtype
// (0 = u8, 1 = f32), f64 fps, then the frames row-major. Little-endian.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "utivad/core/binio.hpp"
#include "utivad/core/error.hpp"

namespace utivad::align {

enum class PixelType : std::uint32_t { u8 = 0, f32 = 1 };

inline constexpr double kDefaultFps = 81.5;
inline constexpr std::uint32_t kUtizVersion = 1;

class UtiSequence {
 public:
  UtiSequence() = default;
  UtiSequence(std::size_t n_frames, std::size_t height, std::size_t width,
              double fps = kDefaultFps, PixelType dtype = PixelType::f32)
      : n_(n_frames), h_(height), w_(width), fps_(fps), dtype_(dtype),
        data_(n_frames * height * width, 0.0f) {
    if (!(fps > 0.0)) fail_validation("fps must be positive, got ", fps);
    if (height == 0 || width == 0) fail_validation("image dimensions must be positive");
  }

  std::size_t n_frames() const noexcept { return n_; }
  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t frame_size() const noexcept { return h_ * w_; }
  double fps() const noexcept { return fps_; }
  PixelType dtype() const noexcept { return dtype_; }
  void set_dtype(PixelType t) noexcept { dtype_ = t; }

  std::span<float> frame(std::size_t i) {
    check(i);
    return {data_.data() + i * frame_size(), frame_size()};
  }
  std::span<const float> frame(std::size_t i) const {
    check(i);
    return {data_.data() + i * frame_size(), frame_size()};
  }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  void push_back(std::span<const float> image) {
    if (image.size() != frame_size()) {
      fail_dimension("frame has ", image.size(), " pixels, sequence expects ", h_, "x", w_);
    }
    data_.insert(data_.end(), image.begin(), image.end());
    ++n_;
  }

  bool operator==(const UtiSequence&) const = default;

 private:
  void check(std::size_t i) const {
    if (i >= n_) fail_validation("frame index ", i, " out of range (", n_, " frames)");
  }

  std::size_t n_ = 0, h_ = 1, w_ = 1;
  double fps_ = kDefaultFps;
  PixelType dtype_ = PixelType::f32;
  std::vector<float> data_;
};

inline std::string encode_utiz(const UtiSequence& s) {
  io::ByteWriter w;
  w.bytes("UTI1");
  w.u32(kUtizVersion);
  w.u32(static_cast<std::uint32_t>(s.n_frames()));
  w.u32(static_cast<std::uint32_t>(s.height()));
  w.u32(static_cast<std::uint32_t>(s.width()));
  w.u32(static_cast<std::uint32_t>(s.dtype()));
  w.f64(s.fps());
  if (s.dtype() == PixelType::u8) {
    std::string px(s.data().size(), '\0');
    for (std::size_t i = 0; i < px.size(); ++i) {
      const float v = s.data()[i];
      if (!(v >= 0.0f && v <= 255.0f) || v != std::round(v)) {
        fail_validation("u8 sequence holds non-byte value ", v);
      }
      px[i] = static_cast<char>(static_cast<std::uint8_t>(v));
    }
    w.bytes(px);
  } else {
    for (float v : s.data()) w.f32(v);
  }
  return w.str();
}

inline UtiSequence decode_utiz(std::string bytes, const std::string& source = "utiz") {
  io::ByteReader r(std::move(bytes), source);
  if (r.bytes(4) != "UTI1") fail_validation(source, ": bad magic, expected UTI1");
  const std::uint32_t version = r.u32();
  if (version != kUtizVersion) fail_validation(source, ": unsupported version ", version);
  const std::uint32_t n = r.u32(), h = r.u32(), w = r.u32(), dtype = r.u32();
  if (dtype > 1) fail_validation(source, ": unknown dtype ", dtype);
  const double fps = r.f64();
  const std::size_t total = static_cast<std::size_t>(n) * h * w;
  if (r.remaining() != total * (dtype == 0 ? 1 : 4)) {
    fail_validation(source, ": pixel data is ", r.remaining(), " bytes, header implies ",
                    total * (dtype == 0 ? 1 : 4));
  }
  UtiSequence s(n, h, w, fps, static_cast<PixelType>(dtype));
  auto px = s.data();
  if (dtype == 0) {
    const std::string raw = r.bytes(total);
    for (std::size_t i = 0; i < total; ++i) px[i] = static_cast<std::uint8_t>(raw[i]);
  } else {
    for (std::size_t i = 0; i < total; ++i) px[i] = r.f32();
  }
  return s;
}

inline void write_utiz(const std::filesystem::path& path, const UtiSequence& s) {
  io::write_file_atomic(path, encode_utiz(s));
}

inline UtiSequence read_utiz(const std::filesystem::path& path) {
  return decode_utiz(io::read_file(path), path.string());
}

}  // namespace utivad::align
