#pragma once

// The three networks: a 2D-CNN speech/silence frame classifier and two 3D-CNN
// spectral regressors (dense head or BiLSTM head), at full size or at a
// reduced width for desk-scale runs.

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "utivad/nn/model.hpp"

namespace utivad::models {

enum class ModelKind { vad_cnn2d, ssi_conv3d, ssi_conv3d_bilstm };
enum class Preset { paper_exact, reduced, tiny };

inline std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::vad_cnn2d: return "vad_cnn2d";
    case ModelKind::ssi_conv3d: return "ssi_conv3d";
    case ModelKind::ssi_conv3d_bilstm: return "ssi_conv3d_bilstm";
  }
  return "?";
}

inline ModelKind parse_kind(const std::string& s) {
  if (s == "vad_cnn2d" || s == "vad") return ModelKind::vad_cnn2d;
  if (s == "ssi_conv3d" || s == "conv3d") return ModelKind::ssi_conv3d;
  if (s == "ssi_conv3d_bilstm" || s == "bilstm") return ModelKind::ssi_conv3d_bilstm;
  fail_validation("unknown model kind '", s, "'");
}

inline std::string preset_name(Preset p) {
  switch (p) {
    case Preset::paper_exact: return "paper_exact";
    case Preset::reduced: return "reduced";
    case Preset::tiny: return "tiny";
  }
  return "?";
}

inline Preset parse_preset(const std::string& s) {
  if (s == "paper_exact") return Preset::paper_exact;
  if (s == "reduced") return Preset::reduced;
  if (s == "tiny") return Preset::tiny;
  fail_validation("unknown preset '", s, "'");
}

struct Rational {
  std::uint32_t num = 1, den = 1;

  /// value * this, which must be a positive integer.
  std::size_t scale(std::size_t value, const char* what) const {
    if (den == 0 || num == 0) fail_validation("width scale must be positive");
    if ((value * num) % den != 0) {
      fail_validation("width scale ", num, "/", den, " gives a non-integer ", what,
                      " count from ", value);
    }
    return value * num / den;
  }
  double value() const { return static_cast<double>(num) / den; }
  bool operator==(const Rational&) const = default;
};

inline constexpr std::size_t kMelOutputs = 80;

/// Layer widths are the full-size ones times `width_scale`, except the mel output.
struct ModelSpec {
  ModelKind kind = ModelKind::vad_cnn2d;
  Rational width_scale;
  // VAD: [H, W, 1]. SSI: [T, H, W, 1].
  Shape input_shape;
  // SSI only.
  std::size_t spatial_kernel = 13;
  std::array<std::size_t, 3> conv3_stride{1, 2, 1};

  bool is_ssi() const { return kind != ModelKind::vad_cnn2d; }
  std::size_t window() const { return is_ssi() ? input_shape.at(0) : 1; }
  std::size_t image_height() const { return input_shape.at(is_ssi() ? 1 : 0); }
  std::size_t image_width() const { return input_shape.at(is_ssi() ? 2 : 1); }
};

/// Preset specs. paper_exact: published layer sizes on 64x128 images.
/// reduced: 1/4 width VAD net on 32x64 images; 1/5 width SSI nets on 25x32x64
/// windows with 5x5 spatial kernels. tiny: minimal widths on 32x32 images, for
/// gradient checks and quick runs.
inline ModelSpec preset_spec(ModelKind kind, Preset preset) {
  ModelSpec s;
  s.kind = kind;
  const bool ssi = kind != ModelKind::vad_cnn2d;
  switch (preset) {
    case Preset::paper_exact:
      s.width_scale = {1, 1};
      s.input_shape = ssi ? Shape{25, 64, 128, 1} : Shape{64, 128, 1};
      break;
    case Preset::reduced:
      s.width_scale = ssi ? Rational{1, 5} : Rational{1, 4};
      s.input_shape = ssi ? Shape{25, 32, 64, 1} : Shape{32, 64, 1};
      s.spatial_kernel = 5;
      s.conv3_stride = {1, 1, 1};
      break;
    case Preset::tiny:
      s.width_scale = ssi ? Rational{1, 5} : Rational{1, 8};
      s.input_shape = ssi ? Shape{10, 32, 32, 1} : Shape{32, 32, 1};
      s.spatial_kernel = 3;
      s.conv3_stride = {1, 1, 1};
      break;
  }
  return s;
}

namespace detail {

inline nn::Sequential build_vad(const ModelSpec& s) {
  using namespace nn;
  if (s.input_shape.size() != 3 || s.input_shape[2] != 1) {
    fail_validation("vad_cnn2d expects an [H, W, 1] input, got ", shape_str(s.input_shape));
  }
  Sequential m(s.input_shape);
  std::size_t ch = 1;
  int i = 1;
  for (std::size_t filters : {32u, 64u, 128u}) {
    const std::size_t f = s.width_scale.scale(filters, "filter");
    const std::string n = std::to_string(i++);
    m.add<Conv2D>("conv" + n, ch, f, std::array<std::size_t, 2>{3, 3},
                  std::array<std::size_t, 2>{1, 1}, Padding::same);
    m.add<ActivationLayer>("relu" + n, Activation::relu);
    m.add<MaxPool>("pool" + n, std::vector<std::size_t>{2, 2});
    ch = f;
  }
  m.add<Flatten>("flatten");
  const std::size_t flat = m.output_shape()[0];
  const std::size_t hidden = s.width_scale.scale(128, "dense unit");
  m.add<Dense>("dense1", flat, hidden);
  m.add<ActivationLayer>("relu4", Activation::relu);
  m.add<Dense>("dense2", hidden, 1);
  m.add<ActivationLayer>("sigmoid", Activation::sigmoid);
  return m;
}

inline nn::Sequential build_ssi(const ModelSpec& s) {
  using namespace nn;
  if (s.input_shape.size() != 4 || s.input_shape[3] != 1) {
    fail_validation("SSI nets expect a [T, H, W, 1] input, got ", shape_str(s.input_shape));
  }
  Sequential m(s.input_shape);
  const std::size_t k = s.spatial_kernel;
  struct ConvRow {
    std::size_t filters;
    std::array<std::size_t, 3> kernel, stride;
    bool pool;
  };
  const std::array<ConvRow, 4> rows{{
      {30, {5, k, k}, {5, 2, 2}, false},
      {60, {1, k, k}, {1, 2, 2}, true},
      {90, {1, k, k}, s.conv3_stride, false},
      {85, {1, k, k}, {1, 2, 2}, true},
  }};
  std::size_t ch = 1;
  int i = 1;
  for (const auto& r : rows) {
    const std::size_t f = s.width_scale.scale(r.filters, "filter");
    const std::string n = std::to_string(i++);
    m.add<Conv3D>("conv" + n, ch, f, r.kernel, r.stride, Padding::same);
    m.add<Dropout>("dropout" + n, 0.2);
    if (r.pool) m.add<MaxPool>("pool" + n, std::vector<std::size_t>{1, 2, 2});
    ch = f;
  }
  const Shape conv_out = m.output_shape();  // [T', H', W', C]
  if (s.kind == ModelKind::ssi_conv3d) {
    m.add<Flatten>("flatten");
    const std::size_t hidden = s.width_scale.scale(500, "dense unit");
    m.add<Dense>("dense1", m.output_shape()[0], hidden);
    m.add<Dropout>("dropout5", 0.2);
    m.add<Dense>("dense2", hidden, kMelOutputs);
  } else {
    const std::size_t steps = conv_out[0];
    const std::size_t features = conv_out[1] * conv_out[2] * conv_out[3];
    m.add<Reshape>("reshape", Shape{steps, features});
    const std::size_t units = s.width_scale.scale(320, "LSTM unit");
    m.add<BiLSTM>("bilstm", features, units);
    m.add<Dense>("dense", 2 * units, kMelOutputs);
  }
  return m;
}

}  // namespace detail

inline nn::Sequential build_model(const ModelSpec& spec) {
  return spec.is_ssi() ? detail::build_ssi(spec) : detail::build_vad(spec);
}

/// Shape of the named layer's output in a built model.
inline Shape layer_output_shape(const nn::Sequential& m, const std::string& name) {
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    if (m.layers()[i]->name() == name) return m.shapes()[i + 1];
  }
  fail_validation("model has no layer named ", name);
}

}  // namespace utivad::models
