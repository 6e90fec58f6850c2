#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "v2s/tensor.hpp"

namespace v2s {

// Named parameter tensors with stable iteration order. Freezing makes every
// mutating accessor throw, which is how "the model weights never change" is
// enforced mechanically rather than by convention.
class ParamSet {
 public:
  void add(std::string name, Tensor t);

  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& mutable_get(const std::string& name);

  std::size_t count() const { return items_.size(); }
  const std::string& name_at(std::size_t i) const { return items_[i].first; }
  const Tensor& at(std::size_t i) const { return items_[i].second; }
  Tensor& mutable_at(std::size_t i);

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t total_size() const;
  // FNV-1a over names and raw little-endian payload bytes, in order.
  std::uint64_t checksum() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  bool frozen_ = false;
};

}  // namespace v2s
