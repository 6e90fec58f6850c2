#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "v2s/tensor.hpp"

namespace v2s {

// One binary container backs both artifact kinds: "V2SM" for trained models,
// "V2ST" for learned input-transform checkpoints. Layout (all little-endian):
//   magic[4] | version u32 | int kv | double kv | label lists |
//   tensor table (name, op kind, dims u32) | payload f64 | fnv1a64 checksum
// Strings are u32 length + raw bytes. The checksum covers every byte before
// it; version is validated before the checksum so a future-version file
// reports unsupported-version rather than corrupt.
enum class ContainerKind { kModel, kTheta };

struct TensorEntry {
  std::string name;
  std::string kind;  // op kind this tensor belongs to, e.g. "conv1d"
  Tensor data;
};

struct Container {
  ContainerKind kind = ContainerKind::kModel;
  std::vector<std::pair<std::string, std::int64_t>> int_meta;
  std::vector<std::pair<std::string, double>> double_meta;
  std::vector<std::vector<std::uint32_t>> label_lists;
  std::vector<TensorEntry> tensors;

  void set_int(const std::string& name, std::int64_t v);
  void set_double(const std::string& name, double v);
  bool has_int(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;
  double get_double(const std::string& name) const;
  const TensorEntry& tensor(const std::string& name) const;
};

void save_container(const Container& c, const std::string& path);
Container load_container(const std::string& path);

constexpr std::uint32_t kContainerVersion = 1;

}  // namespace v2s
