#include "v2s/params.hpp"

#include "v2s/errors.hpp"
#include "v2s/rng.hpp"

namespace v2s {

void ParamSet::add(std::string name, Tensor t) {
  if (frozen_) throw FrozenError("add on frozen ParamSet");
  if (has(name)) throw ArgumentError("duplicate parameter name: " + name);
  items_.emplace_back(std::move(name), std::move(t));
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& [n, _] : items_)
    if (n == name) return true;
  return false;
}

const Tensor& ParamSet::get(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw ArgumentError("unknown parameter: " + name);
}

Tensor& ParamSet::mutable_get(const std::string& name) {
  if (frozen_) throw FrozenError("mutation of frozen parameter: " + name);
  for (auto& [n, t] : items_)
    if (n == name) return t;
  throw ArgumentError("unknown parameter: " + name);
}

Tensor& ParamSet::mutable_at(std::size_t i) {
  if (frozen_)
    throw FrozenError("mutation of frozen parameter: " + items_[i].first);
  return items_[i].second;
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += t.size();
  return n;
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : items_) {
    h = fnv1a64(name.data(), name.size(), h);
    h = fnv1a64(t.data(), t.size() * sizeof(double), h);
  }
  return h;
}

}  // namespace v2s
