#include "v2s/optim.hpp"

#include <cmath>

#include "v2s/errors.hpp"

namespace v2s {

AdamState make_adam(const AdamConfig& cfg, const ParamSet& params) {
  AdamState s;
  s.hyper = cfg;
  s.m.reserve(params.count());
  s.v.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    s.m.push_back(Tensor::zeros(params.at(i).dims()));
    s.v.push_back(Tensor::zeros(params.at(i).dims()));
  }
  return s;
}

void adam_step(AdamState& state, ParamSet& params,
               const std::vector<Tensor>& grads) {
  if (params.frozen()) throw FrozenError("adam_step on frozen ParamSet");
  if (grads.size() != params.count() || state.m.size() != params.count())
    throw ShapeError("adam_step: parameter/gradient count mismatch");
  state.t += 1;
  const auto& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.count(); ++p) {
    Tensor& w = params.mutable_at(p);
    const Tensor& g = grads[p];
    if (!w.same_shape(g) || !w.same_shape(state.m[p]))
      throw ShapeError("adam_step: shape mismatch at " + params.name_at(p));
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
    if (!w.all_finite())
      throw NumericError("adam_step produced non-finite parameter " +
                         params.name_at(p));
  }
}

}  // namespace v2s
