#include "v2s/ops.hpp"

#include <algorithm>
#include <cmath>

#include "v2s/errors.hpp"

namespace v2s {

std::size_t conv1d_out_len(std::size_t len, std::size_t k, std::size_t stride) {
  if (len < k) throw ShapeError("conv1d: input shorter than kernel");
  if (stride < 1) throw ShapeError("conv1d: stride must be >= 1");
  return (len - k) / stride + 1;
}

Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      std::size_t stride) {
  if (x.rank() != 3 || w.rank() != 3 || b.rank() != 1)
    throw ShapeError("conv1d: expected x[batch,len,ch], w[co,ci,k], b[co]");
  const std::size_t n = x.dim(0), len = x.dim(1), ci = x.dim(2);
  const std::size_t co = w.dim(0), k = w.dim(2);
  if (w.dim(1) != ci) throw ShapeError("conv1d: channel mismatch");
  if (b.dim(0) != co) throw ShapeError("conv1d: bias size mismatch");
  const std::size_t out_len = conv1d_out_len(len, k, stride);

  Tensor y({n, out_len, co});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < out_len; ++t)
      for (std::size_t o = 0; o < co; ++o) {
        double acc = b[o];
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t j = 0; j < k; ++j)
            acc += x.at(i, t * stride + j, c) * w.at(o, c, j);
        y.at(i, t, o) = acc;
      }
  return y;
}

Tensor matmul_forward(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " +
                     b.shape_str());
  const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor y({n, q});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t kk = 0; kk < p; ++kk) {
      const double av = a.at(i, kk);
      for (std::size_t j = 0; j < q; ++j) y.at(i, j) += av * b.at(kk, j);
    }
  return y;
}

Tensor add_bias_forward(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || x.dim(1) != b.dim(0))
    throw ShapeError("add_bias: expected [n,m] + [m]");
  Tensor y = x;
  const std::size_t n = x.dim(0), m = x.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) y.at(i, j) += b[j];
  return y;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.vec()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("softmax: expected rank-2 input");
  if (!x.all_finite()) throw NumericError("softmax: non-finite input");
  const std::size_t n = x.dim(0), k = x.dim(1);
  Tensor y({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = x.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, x.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = std::exp(x.at(i, j) - mx);
      y.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < k; ++j) y.at(i, j) /= denom;
  }
  return y;
}

AttentionOut attention_pool_forward(const Tensor& h, const Tensor& w,
                                    const Tensor& b, const Tensor& v) {
  if (h.rank() != 3 || w.rank() != 2 || b.rank() != 1 || v.rank() != 1)
    throw ShapeError("attention_pool: expected h[n,s,c], w[a,c], b[a], v[a]");
  const std::size_t n = h.dim(0), steps = h.dim(1), ch = h.dim(2);
  const std::size_t att = w.dim(0);
  if (w.dim(1) != ch || b.dim(0) != att || v.dim(0) != att)
    throw ShapeError("attention_pool: score-parameter shape mismatch");
  if (steps < 1) throw ShapeError("attention_pool: needs at least one step");

  AttentionOut out{Tensor({n, ch}), Tensor({n, steps}), Tensor({n, steps, att})};
  std::vector<double> score(steps);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      double s = 0.0;
      for (std::size_t a = 0; a < att; ++a) {
        double u = b[a];
        for (std::size_t c = 0; c < ch; ++c) u += w.at(a, c) * h.at(i, t, c);
        const double z = std::tanh(u);
        out.z.at(i, t, a) = z;
        s += v[a] * z;
      }
      score[t] = s;
    }
    const double mx = *std::max_element(score.begin(), score.end());
    double denom = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      score[t] = std::exp(score[t] - mx);
      denom += score[t];
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const double a = score[t] / denom;
      out.weights.at(i, t) = a;
      for (std::size_t c = 0; c < ch; ++c)
        out.context.at(i, c) += a * h.at(i, t, c);
    }
  }
  return out;
}

Tensor label_aggregate_forward(const Tensor& probs,
                               const std::vector<std::vector<int>>& groups) {
  if (probs.rank() != 2) throw ShapeError("label_aggregate: expected [n,K]");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  const std::size_t c = groups.size();
  Tensor y({n, c});
  for (std::size_t t = 0; t < c; ++t) {
    if (groups[t].empty()) throw MappingError("label_aggregate: empty group");
    for (int s : groups[t])
      if (s < 0 || static_cast<std::size_t>(s) >= k)
        throw MappingError("label_aggregate: source label out of range");
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < c; ++t) {
      double acc = 0.0;
      for (int s : groups[t]) acc += probs.at(i, static_cast<std::size_t>(s));
      y.at(i, t) = acc / static_cast<double>(groups[t].size());
    }
  return y;
}

NllOut nll_pick_forward(const Tensor& scores, const std::vector<int>& labels,
                        double clamp) {
  if (scores.rank() != 2) throw ShapeError("nll_pick: expected [n,c]");
  const std::size_t n = scores.dim(0), c = scores.dim(1);
  if (labels.size() != n) throw ShapeError("nll_pick: label count mismatch");
  double acc = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw ShapeError("nll_pick: label out of range");
    double s = scores.at(i, static_cast<std::size_t>(y));
    if (s < clamp) {
      s = clamp;
      ++hits;
    }
    acc += std::log(s);
  }
  return {-acc / static_cast<double>(n), hits};
}

}  // namespace v2s
