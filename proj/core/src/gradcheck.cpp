#include "v2s/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "v2s/errors.hpp"
#include "v2s/rng.hpp"

namespace v2s {

namespace {
constexpr double kTiny = 1e-5;
constexpr std::size_t kMaxCoords = 64;

double rel_err(double a, double n) {
  const double aa = std::fabs(a), nn = std::fabs(n);
  if (aa <= kTiny && nn <= kTiny) return 0.0;
  return std::fabs(a - n) / std::max(aa + nn, kTiny);
}
}  // namespace

GradReport grad_check(const std::function<double(const ParamSet&)>& loss,
                      const ParamSet& params, const ParamSet& analytic,
                      double step, double tolerance, std::uint64_t seed) {
  if (analytic.count() != params.count())
    throw ShapeError("grad_check: analytic gradient count mismatch");

  const double l0 = loss(params);
  const double l1 = loss(params);
  if (!(l0 == l1))
    throw CheckInvalidError(
        "grad_check: loss is nondeterministic (two evaluations differ)");

  GradReport report;
  report.tolerance = tolerance;
  ParamSet work;
  for (std::size_t p = 0; p < params.count(); ++p)
    work.add(params.name_at(p), params.at(p));

  for (std::size_t p = 0; p < params.count(); ++p) {
    const Tensor& a = analytic.at(p);
    if (!a.same_shape(params.at(p)))
      throw ShapeError("grad_check: gradient shape mismatch at " +
                       params.name_at(p));
    std::vector<std::size_t> coords(params.at(p).size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > kMaxCoords) {
      Rng rng(derive_seed(seed, "grad_check", p));
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(kMaxCoords);
      std::sort(coords.begin(), coords.end());
    }

    double worst = 0.0;
    Tensor& w = work.mutable_at(p);
    for (std::size_t idx : coords) {
      const double orig = w[idx];
      auto eval = [&](double delta) {
        w[idx] = orig + delta;
        return loss(work);
      };
      // f'(x) ~ [f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)] / 12h
      const double fd = (eval(-2 * step) - 8 * eval(-step) + 8 * eval(step) -
                         eval(2 * step)) /
                        (12 * step);
      w[idx] = orig;
      worst = std::max(worst, rel_err(a[idx], fd));
    }
    report.per_param.push_back({params.name_at(p), worst, coords.size()});
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace v2s
