#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "v2s/params.hpp"

namespace v2s {

struct GradReport {
  struct Entry {
    std::string name;
    double max_rel_err;
    std::size_t coords_checked;
  };
  std::vector<Entry> per_param;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares an analytic gradient against central finite differences of `loss`.
// A fourth-order five-point stencil keeps truncation error below roundoff so
// tight per-op tolerances are meaningful. At most 64 coordinates per tensor
// are probed (seeded subsample). Relative error uses |a-n| / max(|a|+|n|,
// tiny) with a both-tiny short circuit, so dead units compare as exact.
// The loss is evaluated twice up front; any difference means the caller left
// nondeterminism (e.g. dropout) enabled -> CheckInvalidError.
GradReport grad_check(const std::function<double(const ParamSet&)>& loss,
                      const ParamSet& params, const ParamSet& analytic,
                      double step = 1e-5, double tolerance = 1e-6,
                      std::uint64_t seed = 0x5eed);

}  // namespace v2s
