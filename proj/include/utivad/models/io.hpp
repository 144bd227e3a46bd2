#pragma once

// A saved model is a ".wts" weight file plus a JSON sidecar with the same
// stem: {kind, width_scale, input_shape, spatial_kernel, conv3_stride,
// threshold, normalization}.

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "utivad/dsp/mel.hpp"
#include "utivad/models/arch.hpp"
#include "utivad/nn/wts.hpp"

namespace utivad::models {

struct SavedModel {
  ModelSpec spec;
  nn::Sequential model;
  double threshold = 0.5;
  std::optional<dsp::MelStats> normalization;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& wts) {
  auto p = wts;
  return p.replace_extension(".json");
}

inline nlohmann::ordered_json spec_to_json(const ModelSpec& s) {
  return {{"kind", kind_name(s.kind)},
          {"width_scale", {s.width_scale.num, s.width_scale.den}},
          {"input_shape", s.input_shape},
          {"spatial_kernel", s.spatial_kernel},
          {"conv3_stride", s.conv3_stride}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.kind = parse_kind(j.at("kind").get<std::string>());
  const auto ws = j.at("width_scale").get<std::vector<std::uint32_t>>();
  if (ws.size() != 2) fail_validation("width_scale must be [num, den]");
  s.width_scale = {ws[0], ws[1]};
  s.input_shape = j.at("input_shape").get<Shape>();
  s.spatial_kernel = j.at("spatial_kernel").get<std::size_t>();
  s.conv3_stride = j.at("conv3_stride").get<std::array<std::size_t, 3>>();
  return s;
}

inline void save_model(const std::filesystem::path& wts, const ModelSpec& spec,
                       nn::Sequential& model, double threshold = 0.5,
                       const std::optional<dsp::MelStats>& normalization = {}) {
  auto j = spec_to_json(spec);
  j["threshold"] = threshold;
  if (normalization) {
    j["normalization"] = {{"mean", normalization->mean}, {"std", normalization->stddev}};
  } else {
    j["normalization"] = nullptr;
  }
  nn::save_wts(wts, nn::model_tensors(model));
  io::write_file_atomic(sidecar_path(wts), j.dump(2) + "\n");
}

inline SavedModel load_model(const std::filesystem::path& wts) {
  const auto side = sidecar_path(wts);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(side));
  } catch (const nlohmann::json::exception& e) {
    fail_validation(side.string(), ": malformed model sidecar: ", e.what());
  }
  try {
    ModelSpec spec = spec_from_json(j);
    SavedModel m{spec, build_model(spec), j.value("threshold", 0.5), std::nullopt};
    if (j.contains("normalization") && !j["normalization"].is_null()) {
      m.normalization = dsp::MelStats{j["normalization"].at("mean").get<std::vector<double>>(),
                                      j["normalization"].at("std").get<std::vector<double>>()};
    }
    nn::assign_model_tensors(m.model, nn::load_wts(wts));
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail_validation(side.string(), ": bad model sidecar: ", e.what());
  }
}

}  // namespace utivad::models
