#include "v2s/source_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "v2s/errors.hpp"
#include "v2s/optim.hpp"
#include "v2s/rng.hpp"
#include "v2s/serialize.hpp"

namespace v2s {

namespace {

Tensor init_normal(std::vector<std::size_t> dims, double stddev,
                   std::uint64_t seed) {
  Tensor t(std::move(dims));
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.vec()) v = dist(rng);
  return t;
}

struct LayerSpec {
  const char* name;
  const char* kind;
};
constexpr LayerSpec kLayers[] = {
    {"conv1.w", "conv1d"}, {"conv1.b", "conv1d"}, {"conv2.w", "conv1d"},
    {"conv2.b", "conv1d"}, {"att.w", "attention"}, {"att.b", "attention"},
    {"att.v", "attention"}, {"dense.w", "dense"},  {"dense.b", "dense"},
};

}  // namespace

SourceModel SourceModel::build(const SourceArchConfig& cfg) {
  if (cfg.class_count < 2) throw ConfigError("source arch: K must be >= 2");
  if (cfg.input_len < 64)
    throw ConfigError("source arch: d_S must be >= 64 (got " +
                      std::to_string(cfg.input_len) + ")");
  const std::size_t l1 = conv1d_out_len(cfg.input_len, cfg.kernel, cfg.stride);
  if (l1 < cfg.kernel)
    throw ConfigError("source arch: d_S too small for two strided convs");
  if (cfg.conv1_ch < 1 || cfg.conv2_ch < 1 || cfg.att_dim < 1)
    throw ConfigError("source arch: channel widths must be >= 1");

  SourceModel m;
  m.cfg_ = cfg;
  const auto k = static_cast<std::size_t>(cfg.class_count);
  auto seed_for = [&](const char* name) {
    return derive_seed(cfg.seed, std::string("init.") + name);
  };
  m.params_.add("conv1.w",
                init_normal({cfg.conv1_ch, 1, cfg.kernel},
                            std::sqrt(2.0 / static_cast<double>(cfg.kernel)),
                            seed_for("conv1.w")));
  m.params_.add("conv1.b", Tensor::zeros({cfg.conv1_ch}));
  m.params_.add(
      "conv2.w",
      init_normal({cfg.conv2_ch, cfg.conv1_ch, cfg.kernel},
                  std::sqrt(2.0 / static_cast<double>(cfg.conv1_ch * cfg.kernel)),
                  seed_for("conv2.w")));
  m.params_.add("conv2.b", Tensor::zeros({cfg.conv2_ch}));
  m.params_.add("att.w",
                init_normal({cfg.att_dim, cfg.conv2_ch},
                            std::sqrt(1.0 / static_cast<double>(cfg.conv2_ch)),
                            seed_for("att.w")));
  m.params_.add("att.b", Tensor::zeros({cfg.att_dim}));
  m.params_.add("att.v",
                init_normal({cfg.att_dim},
                            std::sqrt(1.0 / static_cast<double>(cfg.att_dim)),
                            seed_for("att.v")));
  m.params_.add("dense.w",
                init_normal({cfg.conv2_ch, k},
                            std::sqrt(1.0 / static_cast<double>(cfg.conv2_ch)),
                            seed_for("dense.w")));
  m.params_.add("dense.b", Tensor::zeros({k}));
  return m;
}

SourceModel::GraphIds SourceModel::build_graph(Tape& tape, int input,
                                               const ParamSet& weights,
                                               bool trainable) const {
  GraphIds out;
  std::vector<int> ids;
  ids.reserve(weights.count());
  for (std::size_t i = 0; i < weights.count(); ++i)
    ids.push_back(tape.leaf(weights.at(i), trainable));
  if (trainable) out.weights = ids;
  auto id_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < weights.count(); ++i)
      if (weights.name_at(i) == name) return ids[i];
    throw ArgumentError("missing parameter: " + name);
  };

  int h = tape.conv1d(input, id_of("conv1.w"), id_of("conv1.b"), cfg_.stride);
  h = tape.relu(h);
  h = tape.conv1d(h, id_of("conv2.w"), id_of("conv2.b"), cfg_.stride);
  h = tape.relu(h);
  h = tape.attention_pool(h, id_of("att.w"), id_of("att.b"), id_of("att.v"));
  h = tape.matmul(h, id_of("dense.w"));
  out.logits = tape.add_bias(h, id_of("dense.b"));
  out.probs = tape.softmax(out.logits);
  return out;
}

SourceModel::GraphIds SourceModel::forward(Tape& tape, int input) const {
  return build_graph(tape, input, params_, false);
}

Tensor SourceModel::logits(const Tensor& batch) const {
  if (batch.rank() != 2 || batch.dim(1) != cfg_.input_len)
    throw ShapeError("logits: expected [n, d_S] batch");
  Tape tape;
  const int x = tape.leaf(
      Tensor({batch.dim(0), cfg_.input_len, 1}, batch.vec()), false);
  return tape.value(forward(tape, x).logits);
}

Tensor SourceModel::probs(const Tensor& batch) const {
  if (batch.rank() != 2 || batch.dim(1) != cfg_.input_len)
    throw ShapeError("probs: expected [n, d_S] batch");
  Tape tape;
  const int x = tape.leaf(
      Tensor({batch.dim(0), cfg_.input_len, 1}, batch.vec()), false);
  return tape.value(forward(tape, x).probs);
}

Tensor batch_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Tensor b({idx.size(), ds.length});
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t t = 0; t < ds.length; ++t)
      b.at(i, t) = ds.series[idx[i]].values[t];
  return b;
}

Tensor batch_of(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return batch_of(ds, idx);
}

namespace {

void check_dims(const SourceModel& model, const Dataset& data) {
  if (data.length != model.config().input_len)
    throw ConfigError("dataset length " + std::to_string(data.length) +
                      " != model input " +
                      std::to_string(model.config().input_len));
  if (data.class_count != model.config().class_count)
    throw ConfigError("dataset classes " + std::to_string(data.class_count) +
                      " != model K " +
                      std::to_string(model.config().class_count));
}

double risk_of_probs(const Tensor& probs, const Dataset& ds,
                     const std::vector<std::size_t>& idx) {
  double acc = 0.0;
  const std::size_t k = probs.dim(1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double y = (static_cast<int>(j) == ds.series[idx[i]].label) ? 1.0 : 0.0;
      const double d = probs.at(i, j) - y;
      sq += d * d;
    }
    acc += std::sqrt(sq);
  }
  return acc / static_cast<double>(idx.size());
}

double accuracy_of_probs(const Tensor& probs, const Dataset& ds,
                         const std::vector<std::size_t>& idx) {
  std::size_t hits = 0;
  const std::size_t k = probs.dim(1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (probs.at(i, j) > probs.at(i, best)) best = j;
    if (static_cast<int>(best) == ds.series[idx[i]].label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

// Evaluate probs over an index subset in fixed-size chunks.
Tensor probs_over(const SourceModel& model, const Dataset& ds,
                  const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), static_cast<std::size_t>(model.config().class_count)});
  const std::size_t chunk = 64;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const std::size_t stop = std::min(idx.size(), start + chunk);
    std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                  idx.begin() + static_cast<std::ptrdiff_t>(stop));
    const Tensor p = model.probs(batch_of(ds, part));
    for (std::size_t i = 0; i < part.size(); ++i)
      for (std::size_t j = 0; j < p.dim(1); ++j)
        out.at(start + i, j) = p.at(i, j);
  }
  return out;
}

}  // namespace

SourceRiskEstimate source_risk(const SourceModel& model, const Dataset& data) {
  check_dims(model, data);
  data.validate();
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  const Tensor probs = probs_over(model, data, idx);
  SourceRiskEstimate est;
  est.epsilon_s = risk_of_probs(probs, data, idx);
  est.n_eval = data.size();
  est.dataset = data.name;
  return est;
}

double accuracy(const SourceModel& model, const Dataset& data) {
  check_dims(model, data);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return accuracy_of_probs(probs_over(model, data, idx), data, idx);
}

SourceTrainResult train_source(SourceModel& model, const Dataset& data,
                               const SourceTrainConfig& cfg) {
  check_dims(model, data);
  data.validate();
  if (model.frozen()) throw FrozenError("train_source on a frozen model");

  // Held-out split: fold 0 of a seeded 10-fold split when there is room.
  std::vector<std::size_t> train_idx, eval_idx;
  if (data.size() >= 20) {
    const FoldSplit split = split_kfold(data, 10, derive_seed(cfg.seed, "holdout"));
    eval_idx = split.folds[0];
    for (std::size_t f = 1; f < split.folds.size(); ++f)
      train_idx.insert(train_idx.end(), split.folds[f].begin(),
                       split.folds[f].end());
  } else {
    train_idx.resize(data.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
    eval_idx = train_idx;
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(eval_idx.begin(), eval_idx.end());

  SourceTrainResult result;
  result.n_train = train_idx.size();
  AdamState adam = make_adam({.lr = cfg.lr}, model.params());

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Rng rng(derive_seed(cfg.seed, "epoch", e));
    std::vector<std::size_t> order = train_idx;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      std::vector<std::size_t> part(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(stop));
      std::vector<int> labels;
      labels.reserve(part.size());
      for (auto i : part) labels.push_back(data.series[i].label);

      Tape tape;
      const Tensor xb = batch_of(data, part);
      const int x = tape.leaf(
          Tensor({part.size(), data.length, 1}, xb.vec()), false);
      const auto ids = model.build_graph(tape, x, model.params(), true);
      const int loss = tape.nll_pick(ids.probs, labels);
      tape.backward(loss);
      loss_sum += tape.value(loss).item();
      ++batches;

      std::vector<Tensor> grads;
      grads.reserve(ids.weights.size());
      for (int w : ids.weights) grads.push_back(tape.grad(w));
      adam_step(adam, model.mutable_params(), grads);
    }
    result.epoch_train_loss.push_back(loss_sum /
                                      static_cast<double>(std::max<std::size_t>(batches, 1)));
  }

  model.freeze();
  const Tensor eval_probs = probs_over(model, data, eval_idx);
  result.risk.epsilon_s = risk_of_probs(eval_probs, data, eval_idx);
  result.risk.n_eval = eval_idx.size();
  result.risk.dataset = data.name;
  result.held_out_accuracy = accuracy_of_probs(eval_probs, data, eval_idx);
  return result;
}

void save_model(const SourceModel& model, const std::string& path,
                double epsilon_s, double held_out_accuracy) {
  const auto& cfg = model.config();
  Container c;
  c.kind = ContainerKind::kModel;
  c.set_int("class_count", cfg.class_count);
  c.set_int("input_len", static_cast<std::int64_t>(cfg.input_len));
  c.set_int("conv1_ch", static_cast<std::int64_t>(cfg.conv1_ch));
  c.set_int("conv2_ch", static_cast<std::int64_t>(cfg.conv2_ch));
  c.set_int("att_dim", static_cast<std::int64_t>(cfg.att_dim));
  c.set_int("kernel", static_cast<std::int64_t>(cfg.kernel));
  c.set_int("stride", static_cast<std::int64_t>(cfg.stride));
  c.set_int("seed", static_cast<std::int64_t>(cfg.seed));
  c.set_int("frozen", model.frozen() ? 1 : 0);
  if (epsilon_s >= 0.0) c.set_double("epsilon_s", epsilon_s);
  if (held_out_accuracy >= 0.0)
    c.set_double("held_out_accuracy", held_out_accuracy);
  const ParamSet& ps = model.params();
  for (std::size_t i = 0; i < ps.count(); ++i)
    c.tensors.push_back({ps.name_at(i), kLayers[i].kind, ps.at(i)});
  save_container(c, path);
}

SourceModel load_source_model(const std::string& path) {
  const Container c = load_container(path);
  if (c.kind != ContainerKind::kModel)
    throw CorruptFileError("not a model container: " + path);
  SourceArchConfig cfg;
  cfg.class_count = static_cast<int>(c.get_int("class_count"));
  cfg.input_len = static_cast<std::size_t>(c.get_int("input_len"));
  cfg.conv1_ch = static_cast<std::size_t>(c.get_int("conv1_ch"));
  cfg.conv2_ch = static_cast<std::size_t>(c.get_int("conv2_ch"));
  cfg.att_dim = static_cast<std::size_t>(c.get_int("att_dim"));
  cfg.kernel = static_cast<std::size_t>(c.get_int("kernel"));
  cfg.stride = static_cast<std::size_t>(c.get_int("stride"));
  cfg.seed = static_cast<std::uint64_t>(c.get_int("seed"));

  SourceModel model = SourceModel::build(cfg);
  ParamSet& ps = model.mutable_params();
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const TensorEntry& e = c.tensor(ps.name_at(i));
    if (e.data.dims() != ps.at(i).dims())
      throw ShapeError("parameter " + e.name + " has shape " +
                       e.data.shape_str() + ", expected " +
                       ps.at(i).shape_str());
    ps.mutable_at(i) = e.data;
  }
  if (c.get_int("frozen") != 0) model.freeze();
  return model;
}

double model_file_epsilon(const std::string& path) {
  const Container c = load_container(path);
  for (const auto& [n, v] : c.double_meta)
    if (n == "epsilon_s") return v;
  return -1.0;
}

}  // namespace v2s
