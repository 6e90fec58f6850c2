#include "v2s/tape.hpp"

#include <cmath>
#include <utility>

#include "v2s/errors.hpp"

namespace v2s {

int Tape::push(Node n) {
  if (!n.value.all_finite())
    throw NumericError("non-finite value produced by tape op");
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::at(int id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw StateError("tape node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

const Tape::Node& Tape::at(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw StateError("tape node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

int Tape::leaf(Tensor v, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(v);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

namespace {
bool any_requires(const std::initializer_list<bool>& xs) {
  for (bool x : xs)
    if (x) return true;
  return false;
}
}  // namespace

int Tape::conv1d(int x, int w, int b, std::size_t stride) {
  Node n;
  n.op = Op::kConv1d;
  n.in = {x, w, b};
  n.stride = stride;
  n.value = conv1d_forward(at(x).value, at(w).value, at(b).value, stride);
  n.needs_grad = any_requires({at(x).needs_grad, at(w).needs_grad, at(b).needs_grad});
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  Node n;
  n.op = Op::kMatmul;
  n.in = {a, b};
  n.value = matmul_forward(at(a).value, at(b).value);
  n.needs_grad = any_requires({at(a).needs_grad, at(b).needs_grad});
  return push(std::move(n));
}

int Tape::add_bias(int x, int b) {
  Node n;
  n.op = Op::kAddBias;
  n.in = {x, b};
  n.value = add_bias_forward(at(x).value, at(b).value);
  n.needs_grad = any_requires({at(x).needs_grad, at(b).needs_grad});
  return push(std::move(n));
}

int Tape::relu(int x) {
  Node n;
  n.op = Op::kRelu;
  n.in = {x};
  n.value = relu_forward(at(x).value);
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

int Tape::softmax(int x) {
  Node n;
  n.op = Op::kSoftmax;
  n.in = {x};
  n.value = softmax_rows(at(x).value);
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

int Tape::attention_pool(int h, int w, int b, int v) {
  AttentionOut out =
      attention_pool_forward(at(h).value, at(w).value, at(b).value, at(v).value);
  Node n;
  n.op = Op::kAttentionPool;
  n.in = {h, w, b, v};
  n.value = std::move(out.context);
  n.aux_weights = std::move(out.weights);
  n.aux_z = std::move(out.z);
  n.needs_grad = any_requires(
      {at(h).needs_grad, at(w).needs_grad, at(b).needs_grad, at(v).needs_grad});
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  if (!at(a).value.same_shape(at(b).value))
    throw ShapeError("add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.in = {a, b};
  n.value = at(a).value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += at(b).value[i];
  n.needs_grad = any_requires({at(a).needs_grad, at(b).needs_grad});
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  if (!at(a).value.same_shape(at(b).value))
    throw ShapeError("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.in = {a, b};
  n.value = at(a).value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= at(b).value[i];
  n.needs_grad = any_requires({at(a).needs_grad, at(b).needs_grad});
  return push(std::move(n));
}

int Tape::scale(int x, double alpha) {
  Node n;
  n.op = Op::kScale;
  n.in = {x};
  n.alpha = alpha;
  n.value = at(x).value;
  for (auto& v : n.value.vec()) v *= alpha;
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

int Tape::repeat_rows(int x, std::size_t rows) {
  const Tensor& v = at(x).value;
  if (v.rank() != 1) throw ShapeError("repeat_rows: expected rank-1 input");
  Node n;
  n.op = Op::kRepeatRows;
  n.in = {x};
  n.value = Tensor({rows, v.dim(0)});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < v.dim(0); ++j) n.value.at(i, j) = v[j];
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

int Tape::reshape(int x, std::vector<std::size_t> dims) {
  Tensor v(std::move(dims), at(x).value.vec());
  Node n;
  n.op = Op::kReshape;
  n.in = {x};
  n.value = std::move(v);
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

int Tape::sum(int x) {
  double acc = 0.0;
  for (double v : at(x).value.vec()) acc += v;
  Node n;
  n.op = Op::kSum;
  n.in = {x};
  n.value = Tensor::scalar(acc);
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

int Tape::mean(int x) {
  if (at(x).value.size() == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (double v : at(x).value.vec()) acc += v;
  Node n;
  n.op = Op::kMean;
  n.in = {x};
  n.value = Tensor::scalar(acc / static_cast<double>(at(x).value.size()));
  n.needs_grad = at(x).needs_grad;
  return push(std::move(n));
}

int Tape::label_aggregate(int probs, std::vector<std::vector<int>> groups) {
  Node n;
  n.op = Op::kLabelAggregate;
  n.in = {probs};
  n.value = label_aggregate_forward(at(probs).value, groups);
  n.groups = std::move(groups);
  n.needs_grad = at(probs).needs_grad;
  return push(std::move(n));
}

int Tape::nll_pick(int scores, std::vector<int> labels) {
  NllOut out = nll_pick_forward(at(scores).value, labels);
  clamp_hits_ += out.clamp_hits;
  Node n;
  n.op = Op::kNllPick;
  n.in = {scores};
  n.value = Tensor::scalar(out.loss);
  n.labels = std::move(labels);
  n.needs_grad = at(scores).needs_grad;
  return push(std::move(n));
}

const Tensor& Tape::value(int id) const { return at(id).value; }

const Tensor& Tape::attention_weights(int id) const {
  const Node& n = at(id);
  if (n.op != Op::kAttentionPool)
    throw StateError("attention_weights: not an attention_pool node");
  return n.aux_weights;
}

Tensor& Tape::ensure_grad(int id) {
  Node& n = at(id);
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.dims());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::backward(int root) {
  if (nodes_.empty()) throw StateError("backward: no recorded forward");
  Node& r = at(root);
  if (r.value.size() != 1)
    throw StateError("backward: root must be scalar, got " +
                     r.value.shape_str());
  ensure_grad(root)[0] = 1.0;
  for (int id = root; id >= 0; --id) {
    const Node& n = at(id);
    if (!n.needs_grad || !n.grad_alloc) continue;
    backward_node(id);
  }
  ran_backward_ = true;
}

void Tape::backward_node(int id) {
  Node& n = at(id);
  const Tensor& g = n.grad;
  auto want = [&](int k) { return at(n.in[k]).needs_grad; };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kConv1d: {
      const Tensor& x = at(n.in[0]).value;
      const Tensor& w = at(n.in[1]).value;
      const std::size_t bn = x.dim(0), ci = x.dim(2);
      const std::size_t co = w.dim(0), k = w.dim(2);
      const std::size_t out_len = n.value.dim(1), s = n.stride;
      Tensor* gx = want(0) ? &ensure_grad(n.in[0]) : nullptr;
      Tensor* gw = want(1) ? &ensure_grad(n.in[1]) : nullptr;
      Tensor* gb = want(2) ? &ensure_grad(n.in[2]) : nullptr;
      for (std::size_t i = 0; i < bn; ++i)
        for (std::size_t t = 0; t < out_len; ++t)
          for (std::size_t o = 0; o < co; ++o) {
            const double go = g.at(i, t, o);
            if (go == 0.0) continue;
            if (gb) (*gb)[o] += go;
            for (std::size_t c = 0; c < ci; ++c)
              for (std::size_t j = 0; j < k; ++j) {
                if (gx) gx->at(i, t * s + j, c) += go * w.at(o, c, j);
                if (gw) gw->at(o, c, j) += go * x.at(i, t * s + j, c);
              }
          }
      break;
    }
    case Op::kMatmul: {
      const Tensor& a = at(n.in[0]).value;
      const Tensor& b = at(n.in[1]).value;
      const std::size_t rows = a.dim(0), p = a.dim(1), q = b.dim(1);
      if (want(0)) {
        Tensor& ga = ensure_grad(n.in[0]);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < q; ++j) {
            const double go = g.at(i, j);
            for (std::size_t kk = 0; kk < p; ++kk)
              ga.at(i, kk) += go * b.at(kk, j);
          }
      }
      if (want(1)) {
        Tensor& gb = ensure_grad(n.in[1]);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t kk = 0; kk < p; ++kk) {
            const double av = a.at(i, kk);
            for (std::size_t j = 0; j < q; ++j)
              gb.at(kk, j) += av * g.at(i, j);
          }
      }
      break;
    }
    case Op::kAddBias: {
      const std::size_t rows = n.value.dim(0), m = n.value.dim(1);
      if (want(0)) {
        Tensor& gx = ensure_grad(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (want(1)) {
        Tensor& gb = ensure_grad(n.in[1]);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < m; ++j) gb[j] += g.at(i, j);
      }
      break;
    }
    case Op::kRelu: {
      if (!want(0)) break;
      const Tensor& x = at(n.in[0]).value;
      Tensor& gx = ensure_grad(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) gx[i] += g[i];
      break;
    }
    case Op::kSoftmax: {
      if (!want(0)) break;
      Tensor& gx = ensure_grad(n.in[0]);
      const std::size_t rows = n.value.dim(0), k = n.value.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += g.at(i, j) * n.value.at(i, j);
        for (std::size_t j = 0; j < k; ++j)
          gx.at(i, j) += n.value.at(i, j) * (g.at(i, j) - dot);
      }
      break;
    }
    case Op::kAttentionPool: {
      const Tensor& h = at(n.in[0]).value;
      const Tensor& w = at(n.in[1]).value;
      const Tensor& v = at(n.in[3]).value;
      const std::size_t bn = h.dim(0), steps = h.dim(1), ch = h.dim(2);
      const std::size_t att = w.dim(0);
      Tensor* gh = want(0) ? &ensure_grad(n.in[0]) : nullptr;
      Tensor* gw = want(1) ? &ensure_grad(n.in[1]) : nullptr;
      Tensor* gb = want(2) ? &ensure_grad(n.in[2]) : nullptr;
      Tensor* gv = want(3) ? &ensure_grad(n.in[3]) : nullptr;
      std::vector<double> ga(steps), gu(att);
      for (std::size_t i = 0; i < bn; ++i) {
        for (std::size_t t = 0; t < steps; ++t) {
          double acc = 0.0;
          for (std::size_t c = 0; c < ch; ++c)
            acc += g.at(i, c) * h.at(i, t, c);
          ga[t] = acc;
        }
        double dot = 0.0;
        for (std::size_t t = 0; t < steps; ++t)
          dot += n.aux_weights.at(i, t) * ga[t];
        for (std::size_t t = 0; t < steps; ++t) {
          const double a_t = n.aux_weights.at(i, t);
          const double gs = a_t * (ga[t] - dot);  // softmax over steps
          for (std::size_t a = 0; a < att; ++a) {
            const double z = n.aux_z.at(i, t, a);
            if (gv) (*gv)[a] += gs * z;
            gu[a] = gs * v[a] * (1.0 - z * z);
            if (gb) (*gb)[a] += gu[a];
          }
          for (std::size_t c = 0; c < ch; ++c) {
            double ghc = a_t * g.at(i, c);
            for (std::size_t a = 0; a < att; ++a) {
              if (gw) gw->at(a, c) += gu[a] * h.at(i, t, c);
              ghc += gu[a] * w.at(a, c);
            }
            if (gh) gh->at(i, t, c) += ghc;
          }
        }
      }
      break;
    }
    case Op::kAdd: {
      for (int k = 0; k < 2; ++k)
        if (want(k)) {
          Tensor& gi = ensure_grad(n.in[k]);
          for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        }
      break;
    }
    case Op::kMul: {
      for (int k = 0; k < 2; ++k)
        if (want(k)) {
          const Tensor& other = at(n.in[1 - k]).value;
          Tensor& gi = ensure_grad(n.in[k]);
          for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * other[i];
        }
      break;
    }
    case Op::kScale: {
      if (!want(0)) break;
      Tensor& gx = ensure_grad(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.alpha * g[i];
      break;
    }
    case Op::kRepeatRows: {
      if (!want(0)) break;
      Tensor& gx = ensure_grad(n.in[0]);
      const std::size_t rows = n.value.dim(0), d = n.value.dim(1);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < d; ++j) gx[j] += g.at(i, j);
      break;
    }
    case Op::kReshape: {
      if (!want(0)) break;
      Tensor& gx = ensure_grad(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      break;
    }
    case Op::kSum: {
      if (!want(0)) break;
      Tensor& gx = ensure_grad(n.in[0]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
      break;
    }
    case Op::kMean: {
      if (!want(0)) break;
      Tensor& gx = ensure_grad(n.in[0]);
      const double inv = 1.0 / static_cast<double>(gx.size());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * inv;
      break;
    }
    case Op::kLabelAggregate: {
      if (!want(0)) break;
      Tensor& gp = ensure_grad(n.in[0]);
      const std::size_t rows = n.value.dim(0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t t = 0; t < n.groups.size(); ++t) {
          const double go =
              g.at(i, t) / static_cast<double>(n.groups[t].size());
          for (int s : n.groups[t])
            gp.at(i, static_cast<std::size_t>(s)) += go;
        }
      break;
    }
    case Op::kNllPick: {
      if (!want(0)) break;
      const Tensor& scores = at(n.in[0]).value;
      Tensor& gs = ensure_grad(n.in[0]);
      const std::size_t rows = scores.dim(0);
      const double inv_n = 1.0 / static_cast<double>(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        const auto y = static_cast<std::size_t>(n.labels[i]);
        const double s = scores.at(i, y);
        if (s >= 1e-12) gs.at(i, y) += g[0] * (-inv_n / s);
      }
      break;
    }
  }
}

const Tensor& Tape::grad(int id) {
  if (!ran_backward_) throw StateError("grad read before backward");
  Tensor& g = ensure_grad(id);
  if (!g.all_finite()) throw NumericError("non-finite gradient");
  return g;
}

}  // namespace v2s
