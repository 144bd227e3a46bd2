#pragma once

// ".wts" weight container:
//   "WTS1", u32 tensor count, then per tensor:
//   u16 name length, UTF-8 name, u32 ndim, ndim x u32 dims, f32 values.
// All integers and floats little-endian. Values are stored single precision.

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "utivad/core/binio.hpp"
#include "utivad/nn/model.hpp"

namespace utivad::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline std::string encode_wts(const std::vector<NamedTensor>& tensors) {
  io::ByteWriter w;
  w.bytes("WTS1");
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      fail_validation("tensor name too long: ", name.size(), " bytes");
    }
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  return w.str();
}

inline std::vector<NamedTensor> decode_wts(std::string bytes,
                                           const std::string& source = "wts") {
  io::ByteReader r(std::move(bytes), source);
  if (r.bytes(4) != "WTS1") fail_validation(source, ": bad magic, expected WTS1");
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor nt;
    nt.name = r.bytes(r.u16());
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = r.u32();
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = r.f32();
    nt.tensor = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(nt));
  }
  if (!r.at_end()) fail_validation(source, ": trailing bytes after last tensor");
  return out;
}

inline void save_wts(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& tensors) {
  io::write_file_atomic(path, encode_wts(tensors));
}

inline std::vector<NamedTensor> load_wts(const std::filesystem::path& path) {
  return decode_wts(io::read_file(path), path.string());
}

inline std::vector<NamedTensor> model_tensors(Sequential& model) {
  std::vector<NamedTensor> out;
  for (Param* p : model.params()) out.push_back({p->name, p->value});
  return out;
}

/// Loads values by name; every model parameter must be present with a
/// matching shape.
inline void assign_model_tensors(Sequential& model,
                                 const std::vector<NamedTensor>& tensors) {
  for (Param* p : model.params()) {
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const NamedTensor& t) { return t.name == p->name; });
    if (it == tensors.end()) fail_validation("weights missing tensor ", p->name);
    if (it->tensor.shape() != p->value.shape()) {
      fail_dimension("tensor ", p->name, " has shape ", shape_str(it->tensor.shape()),
                     ", model expects ", shape_str(p->value.shape()));
    }
    p->value = it->tensor;
  }
}

}  // namespace utivad::nn
