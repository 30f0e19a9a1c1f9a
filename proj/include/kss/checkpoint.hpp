#pragma once

// Named-tensor checkpoints.
//
// Layout (little-endian):
//   magic "KSSCKPT\0", u32 version, u32 tensor count, then per tensor
//   u32 name length, name bytes, u32 rank, u64 dims[rank],
//   f64 values[prod(dims)] row-major.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kss/error.hpp"
#include "kss/graph.hpp"
#include "kss/model.hpp"

namespace kss {

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  bool operator==(const NamedTensor&) const = default;
};

inline constexpr char kCheckpointMagic[8] = {'K', 'S', 'S', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_tensors(const std::vector<NamedTensor>& tensors, const std::string& path) {
  auto out = text::open_out(path, true);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    const std::size_t count = std::accumulate(t.shape.begin(), t.shape.end(), std::size_t{1},
                                              std::multiplies<>());
    detail::require_shape(count == t.values.size(),
                          "checkpoint: tensor '" + t.name + "' shape does not match its values");
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::write_le<std::uint64_t>(out, d);
    for (double v : t.values) detail::write_le<double>(out, v);
  }
  if (!out) throw Error("checkpoint: write to '" + path + "' failed");
}

inline bool has_checkpoint_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[sizeof(kCheckpointMagic)] = {};
  return in.read(magic, sizeof(magic)) && std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0;
}

inline std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw FormatError("'" + path + "' is not a checkpoint");
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = detail::read_le<std::uint32_t>(in);
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    const auto len = detail::read_le<std::uint32_t>(in);
    t.name.resize(len);
    if (!in.read(t.name.data(), len)) throw FormatError("checkpoint: truncated name");
    const auto rank = detail::read_le<std::uint32_t>(in);
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(detail::read_le<std::uint64_t>(in));
      total *= t.shape.back();
    }
    t.values.resize(total);
    for (auto& v : t.values) v = detail::read_le<double>(in);
  }
  return tensors;
}

template <typename T>
std::vector<NamedTensor> model_tensors(const KssModel<T>& model) {
  std::vector<NamedTensor> out;
  model.for_each_parameter([&](const std::string& name, std::span<const T> v, ParamGroup, bool) {
    out.push_back({name, parameter_shape(model, name), std::vector<double>(v.begin(), v.end())});
  });
  return out;
}

/// Copies tensors into a model of matching architecture. Every parameter
/// must be present with the expected shape; extra tensors are an error.
template <typename T>
void load_model_tensors(KssModel<T>& model, const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors)
    if (!by_name.emplace(t.name, &t).second)
      throw FormatError("checkpoint: duplicate tensor '" + t.name + "'");
  std::size_t used = 0;
  model.for_each_parameter([&](const std::string& name, std::span<T> v, ParamGroup, bool) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ValidationError("checkpoint: missing tensor '" + name + "'");
    if (it->second->shape != parameter_shape(model, name))
      throw ShapeError("checkpoint: tensor '" + name + "' has the wrong shape");
    std::transform(it->second->values.begin(), it->second->values.end(), v.begin(),
                   [](double x) { return static_cast<T>(x); });
    ++used;
  });
  if (used != by_name.size())
    throw ValidationError("checkpoint: holds tensors the model does not have");
}

template <typename T>
void save_model(const KssModel<T>& model, const std::string& path) {
  save_tensors(model_tensors(model), path);
}

template <typename T>
void load_model(KssModel<T>& model, const std::string& path) {
  load_model_tensors(model, load_tensors(path));
}

}  // namespace kss
