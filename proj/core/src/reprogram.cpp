#include "v2s/reprogram.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "v2s/alignment.hpp"
#include "v2s/errors.hpp"
#include "v2s/optim.hpp"
#include "v2s/serialize.hpp"

namespace v2s {

ReprogramPlan build_plan(std::size_t d_source, std::size_t d_target,
                         std::size_t m, double dropout, double weight_decay,
                         std::uint64_t seed) {
  if (d_source < 1 || d_target < 1)
    throw ConfigError("build_plan: lengths must be positive");
  if (m < 1) throw ConfigError("build_plan: m must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("build_plan: dropout must be in [0, 1)");
  if (!(weight_decay >= 0.0))
    throw ConfigError("build_plan: weight_decay must be >= 0");
  const std::size_t interval = d_source / m;
  if (d_target > interval)
    throw PlacementError(
        "replication m=" + std::to_string(m) + " leaves interval " +
        std::to_string(interval) + " < d_T=" + std::to_string(d_target) +
        "; max feasible m=" + std::to_string(d_source / d_target));

  ReprogramPlan plan;
  plan.d_source = d_source;
  plan.d_target = d_target;
  plan.m = m;
  plan.dropout = dropout;
  plan.weight_decay = weight_decay;
  plan.mask.assign(d_source, 1.0);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t start = j * interval;
    plan.placements.push_back(start);
    for (std::size_t t = 0; t < d_target; ++t) plan.mask[start + t] = 0.0;
  }
  plan.theta.resize(d_source);
  Rng rng(derive_seed(seed, "theta_init"));
  std::normal_distribution<double> dist(0.0, 0.01);
  for (auto& v : plan.theta) v = dist(rng);
  return plan;
}

std::vector<double> pad_replicate(const std::vector<double>& x,
                                  const ReprogramPlan& plan) {
  if (x.size() != plan.d_target)
    throw ShapeError("pad_replicate: series length " +
                     std::to_string(x.size()) + " != d_T " +
                     std::to_string(plan.d_target));
  std::vector<double> out(plan.d_source, 0.0);
  for (std::size_t start : plan.placements)
    for (std::size_t t = 0; t < plan.d_target; ++t) out[start + t] = x[t];
  return out;
}

std::vector<double> sample_drop_scale(const ReprogramPlan& plan, Rng& rng) {
  std::vector<double> scale(plan.d_source, 1.0);
  if (plan.dropout == 0.0) return scale;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - plan.dropout);
  for (auto& s : scale) s = (u(rng) < plan.dropout) ? 0.0 : keep;
  return scale;
}

std::vector<double> transform(const std::vector<double>& x,
                              const ReprogramPlan& plan) {
  std::vector<double> out = pad_replicate(x, plan);
  for (std::size_t i = 0; i < plan.d_source; ++i)
    out[i] += plan.mask[i] * plan.theta[i];
  return out;
}

std::vector<double> transform(const std::vector<double>& x,
                              const ReprogramPlan& plan,
                              const std::vector<double>& drop_scale) {
  if (drop_scale.size() != plan.d_source)
    throw ShapeError("transform: drop_scale length mismatch");
  std::vector<double> out = pad_replicate(x, plan);
  for (std::size_t i = 0; i < plan.d_source; ++i)
    out[i] += plan.mask[i] * plan.theta[i] * drop_scale[i];
  return out;
}

std::vector<double> transform(const std::vector<double>& x,
                              const ReprogramPlan& plan, bool training,
                              Rng& rng) {
  if (!training) return transform(x, plan);
  return transform(x, plan, sample_drop_scale(plan, rng));
}

void LabelMapping::validate() const {
  if (source_classes < target_classes)
    throw MappingError("mapping: fewer source classes than target classes");
  if (static_cast<int>(groups.size()) != target_classes)
    throw MappingError("mapping: group count != target class count");
  const std::size_t want =
      static_cast<std::size_t>(source_classes / target_classes);
  std::vector<bool> seen(static_cast<std::size_t>(source_classes), false);
  for (const auto& g : groups) {
    if (g.size() != want)
      throw MappingError("mapping: group size " + std::to_string(g.size()) +
                         " != floor(K/c) = " + std::to_string(want));
    for (int s : g) {
      if (s < 0 || s >= source_classes)
        throw MappingError("mapping: source label out of range");
      if (seen[static_cast<std::size_t>(s)])
        throw MappingError("mapping: source label " + std::to_string(s) +
                           " assigned twice");
      seen[static_cast<std::size_t>(s)] = true;
    }
  }
}

LabelMapping make_label_mapping(int source_classes, int target_classes,
                                std::uint64_t seed) {
  if (target_classes < 1)
    throw MappingError("mapping: need at least one target class");
  if (source_classes < target_classes)
    throw MappingError("mapping: K=" + std::to_string(source_classes) +
                       " < c=" + std::to_string(target_classes));
  LabelMapping map;
  map.source_classes = source_classes;
  map.target_classes = target_classes;
  map.seed = seed;
  const int per = source_classes / target_classes;
  map.small_sets_warning = per < 3;

  std::vector<int> labels(static_cast<std::size_t>(source_classes));
  std::iota(labels.begin(), labels.end(), 0);
  Rng rng(derive_seed(seed, "label_map"));
  std::shuffle(labels.begin(), labels.end(), rng);
  for (int t = 0; t < target_classes; ++t)
    map.groups.emplace_back(labels.begin() + t * per,
                            labels.begin() + (t + 1) * per);
  map.validate();
  return map;
}

std::vector<double> target_scores(const std::vector<double>& source_probs,
                                  const LabelMapping& mapping) {
  if (source_probs.size() != static_cast<std::size_t>(mapping.source_classes))
    throw ArgumentError("target_scores: probability row length != K");
  double sum = 0.0;
  for (double p : source_probs) sum += p;
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ArgumentError("target_scores: probabilities sum to " +
                        std::to_string(sum) + ", expected 1");
  std::vector<double> scores(mapping.groups.size(), 0.0);
  for (std::size_t t = 0; t < mapping.groups.size(); ++t) {
    double acc = 0.0;
    for (int s : mapping.groups[t])
      acc += source_probs[static_cast<std::size_t>(s)];
    scores[t] = acc / static_cast<double>(mapping.groups[t].size());
  }
  return scores;
}

Tensor reprogrammed_batch(const ReprogramPlan& plan, const Dataset& ds,
                          const std::vector<std::size_t>& idx) {
  if (ds.length != plan.d_target)
    throw ShapeError("reprogrammed_batch: dataset length != d_T");
  Tensor out({idx.size(), plan.d_source});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto row = transform(ds.series[idx[i]].values, plan);
    for (std::size_t t = 0; t < plan.d_source; ++t) out.at(i, t) = row[t];
  }
  return out;
}

LossGraphIds build_v2s_loss_graph(Tape& tape, const SourceModel& model,
                                  const ReprogramPlan& plan,
                                  const LabelMapping& mapping,
                                  const Dataset& ds,
                                  const std::vector<std::size_t>& idx,
                                  const std::vector<double>* drop_scale) {
  if (idx.empty()) throw ArgumentError("v2s loss: empty batch");
  if (ds.length != plan.d_target)
    throw ShapeError("v2s loss: dataset length != d_T");
  if (plan.d_source != model.config().input_len)
    throw ShapeError("v2s loss: plan d_S != model input length");
  if (mapping.source_classes != model.config().class_count)
    throw ArgumentError("v2s loss: mapping K != model K");
  const std::size_t n = idx.size(), d = plan.d_source;

  std::vector<double> eff = plan.mask;
  if (drop_scale != nullptr) {
    if (drop_scale->size() != d)
      throw ShapeError("v2s loss: drop_scale length mismatch");
    for (std::size_t i = 0; i < d; ++i) eff[i] *= (*drop_scale)[i];
  }

  Tensor padded({n, d});
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = pad_replicate(ds.series[idx[i]].values, plan);
    for (std::size_t t = 0; t < d; ++t) padded.at(i, t) = row[t];
    labels[i] = ds.series[idx[i]].label;
  }

  LossGraphIds ids;
  ids.theta = tape.leaf(Tensor({d}, plan.theta), true);
  const int eff_id = tape.leaf(Tensor({d}, std::move(eff)), false);
  const int delta = tape.mul(ids.theta, eff_id);
  const int rep = tape.repeat_rows(delta, n);
  const int pad_id = tape.leaf(std::move(padded), false);
  const int xprime = tape.add(rep, pad_id);
  const int x3 = tape.reshape(xprime, {n, d, 1});
  const auto fwd = model.forward(tape, x3);
  ids.probs = fwd.probs;
  ids.scores = tape.label_aggregate(ids.probs, mapping.groups);
  const int nll = tape.nll_pick(ids.scores, labels);
  const int penalty =
      tape.scale(tape.sum(tape.mul(ids.theta, ids.theta)), plan.weight_decay);
  ids.loss = tape.add(nll, penalty);
  return ids;
}

LossResult v2s_loss(const SourceModel& model, const ReprogramPlan& plan,
                    const LabelMapping& mapping, const Dataset& ds,
                    const std::vector<std::size_t>& idx) {
  Tape tape;
  const auto ids = build_v2s_loss_graph(tape, model, plan, mapping, ds, idx,
                                        nullptr);
  return {tape.value(ids.loss).item(), tape.clamp_hits()};
}

Prediction predict(const SourceModel& model, const ReprogramPlan& plan,
                   const LabelMapping& mapping, const std::vector<double>& x) {
  const auto xprime = transform(x, plan);
  const Tensor probs = model.probs(Tensor({1, plan.d_source}, xprime));
  std::vector<double> row(probs.vec());
  Prediction pred;
  pred.scores = target_scores(row, mapping);
  pred.label = 0;
  for (std::size_t t = 1; t < pred.scores.size(); ++t)
    if (pred.scores[t] > pred.scores[static_cast<std::size_t>(pred.label)])
      pred.label = static_cast<int>(t);
  return pred;
}

namespace {

double subset_accuracy(const SourceModel& model, const ReprogramPlan& plan,
                       const LabelMapping& mapping, const Dataset& ds,
                       const std::vector<std::size_t>& idx) {
  std::size_t hits = 0;
  const std::size_t chunk = 64;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const std::size_t stop = std::min(idx.size(), start + chunk);
    std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                  idx.begin() + static_cast<std::ptrdiff_t>(stop));
    const Tensor probs = model.probs(reprogrammed_batch(plan, ds, part));
    for (std::size_t i = 0; i < part.size(); ++i) {
      std::vector<double> row(probs.vec().begin() + static_cast<std::ptrdiff_t>(i * probs.dim(1)),
                              probs.vec().begin() + static_cast<std::ptrdiff_t>((i + 1) * probs.dim(1)));
      const auto scores = target_scores(row, mapping);
      std::size_t best = 0;
      for (std::size_t t = 1; t < scores.size(); ++t)
        if (scores[t] > scores[best]) best = t;
      if (static_cast<int>(best) == ds.series[part[i]].label) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

}  // namespace

double reprogram_accuracy(const SourceModel& model, const ReprogramPlan& plan,
                          const LabelMapping& mapping, const Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return subset_accuracy(model, plan, mapping, ds, idx);
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "epoch,train_loss,val_loss,val_acc,swd\n";
  char num[64];
  auto fmt = [&](double v) {
    std::snprintf(num, sizeof(num), "%.17g", v);
    return std::string(num);
  };
  for (const auto& e : history.epochs) {
    f << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_loss) << ','
      << fmt(e.val_acc) << ',' << (e.has_swd ? fmt(e.swd) : std::string())
      << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

namespace {

struct FoldOutcome {
  double final_val_loss = 0.0;
  double final_val_acc = 0.0;
  std::vector<double> theta;
  TrainHistory history;
};

struct SwdFixture {
  bool enabled = false;
  Tensor source_logits;  // [n_common, K]
  std::size_t n_common = 0;
  std::size_t projections = 1000;
  std::uint64_t dir_seed = 0;
};

FoldOutcome run_fold(const SourceModel& model, const Dataset& train,
                     const std::vector<std::vector<std::size_t>>& folds,
                     std::size_t fold, std::size_t m, double dropout,
                     const LabelMapping& mapping, const TrainConfig& cfg,
                     std::uint64_t fold_seed, const SwdFixture& swd_fix) {
  std::vector<std::size_t> train_idx, val_idx = folds[fold];
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (f != fold)
      train_idx.insert(train_idx.end(), folds[f].begin(), folds[f].end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  ReprogramPlan plan =
      build_plan(model.config().input_len, train.length, m, dropout,
                 cfg.weight_decay, derive_seed(fold_seed, "theta_init"));

  std::vector<std::size_t> swd_target_idx;
  if (swd_fix.enabled) {
    swd_target_idx = train_idx;
    Rng rng(derive_seed(fold_seed, "swd_target"));
    std::shuffle(swd_target_idx.begin(), swd_target_idx.end(), rng);
    swd_target_idx.resize(swd_fix.n_common);
    std::sort(swd_target_idx.begin(), swd_target_idx.end());
  }

  ParamSet ps;
  ps.add("theta", Tensor({plan.d_source}, plan.theta));
  AdamState adam = make_adam({.lr = cfg.lr}, ps);

  FoldOutcome out;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    Rng order_rng(derive_seed(fold_seed, "order", e));
    Rng drop_rng(derive_seed(fold_seed, "drop", e));
    std::vector<std::size_t> order = train_idx;
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0, clamp_hits = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      std::vector<std::size_t> part(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(stop));
      const std::vector<double> drop = sample_drop_scale(plan, drop_rng);

      Tape tape;
      const auto ids =
          build_v2s_loss_graph(tape, model, plan, mapping, train, part, &drop);
      tape.backward(ids.loss);
      loss_sum += tape.value(ids.loss).item();
      clamp_hits += tape.clamp_hits();
      ++batches;

      std::vector<Tensor> grads{tape.grad(ids.theta)};
      adam_step(adam, ps, grads);
      plan.theta = ps.at(0).vec();
    }

    EpochRecord rec;
    rec.epoch = e;
    rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    rec.clamp_hits = clamp_hits;
    const LossResult val = v2s_loss(model, plan, mapping, train, val_idx);
    rec.val_loss = val.loss;
    rec.clamp_hits += val.clamp_hits;
    rec.val_acc = subset_accuracy(model, plan, mapping, train, val_idx);
    if (swd_fix.enabled) {
      const Tensor tgt_logits =
          model.logits(reprogrammed_batch(plan, train, swd_target_idx));
      rec.swd = swd(tgt_logits, swd_fix.source_logits, swd_fix.projections,
                    2.0, swd_fix.dir_seed)
                    .value;
      rec.has_swd = true;
    }
    out.history.epochs.push_back(rec);
  }

  if (cfg.epochs > 0) {
    out.final_val_loss = out.history.epochs.back().val_loss;
    out.final_val_acc = out.history.epochs.back().val_acc;
  } else {
    out.final_val_loss = v2s_loss(model, plan, mapping, train, val_idx).loss;
    out.final_val_acc = subset_accuracy(model, plan, mapping, train, val_idx);
  }
  out.theta = plan.theta;
  return out;
}

}  // namespace

ReprogramResult train_reprogram(const SourceModel& model, const Dataset& train,
                                const Dataset& test, const TrainConfig& cfg,
                                const Dataset* source_for_swd) {
  if (!model.frozen())
    throw StateError("train_reprogram requires a frozen source model");
  train.validate();
  test.validate();
  if (test.length != train.length || test.class_count != train.class_count)
    throw ConfigError("train/test shape mismatch");
  if (cfg.folds < 2) throw ConfigError("folds must be >= 2");
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  if (cfg.m_grid.empty() || cfg.dropout_grid.empty())
    throw ConfigError("empty hyperparameter grid");

  const std::size_t d_s = model.config().input_len;
  const int K = model.config().class_count;

  ReprogramResult result;
  result.source_checksum_before = model.checksum();
  result.mapping =
      make_label_mapping(K, train.class_count, derive_seed(cfg.seed, "mapping"));
  const FoldSplit split =
      split_kfold(train, cfg.folds, derive_seed(cfg.seed, "folds"));

  SwdFixture swd_fix;
  if (cfg.swd_trace) {
    if (source_for_swd == nullptr)
      throw ConfigError("swd trace requested without source data");
    std::size_t min_train = train.size();
    for (const auto& f : split.folds)
      min_train = std::min(min_train, train.size() - f.size());
    swd_fix.enabled = true;
    swd_fix.n_common =
        std::min({cfg.swd_sample, source_for_swd->size(), min_train});
    swd_fix.projections = cfg.swd_projections;
    swd_fix.dir_seed = derive_seed(cfg.seed, "swd_dirs");
    std::vector<std::size_t> sidx(source_for_swd->size());
    std::iota(sidx.begin(), sidx.end(), 0);
    Rng rng(derive_seed(cfg.seed, "swd_source"));
    std::shuffle(sidx.begin(), sidx.end(), rng);
    sidx.resize(swd_fix.n_common);
    std::sort(sidx.begin(), sidx.end());
    swd_fix.source_logits = model.logits(batch_of(*source_for_swd, sidx));
  }

  struct CellOutcome {
    std::size_t index = 0;
    std::vector<FoldOutcome> folds;
  };
  std::vector<CellOutcome> outcomes;
  std::size_t cell_linear = 0;
  int best_cell = -1;

  for (std::size_t m : cfg.m_grid) {
    const bool feasible = m >= 1 && train.length <= d_s / m;
    for (double p : cfg.dropout_grid) {
      GridCellResult rec;
      rec.m = m;
      rec.dropout = p;
      const std::size_t my_linear = cell_linear++;
      if (!feasible) {
        rec.feasible = false;
        rec.note = "skipped: d_T=" + std::to_string(train.length) +
                   " > floor(d_S/m)=" + std::to_string(d_s / std::max<std::size_t>(m, 1)) +
                   "; max feasible m=" + std::to_string(d_s / train.length);
        result.grid.push_back(rec);
        continue;
      }
      CellOutcome cell;
      cell.index = result.grid.size();
      double loss_sum = 0.0, acc_sum = 0.0;
      for (std::size_t f = 0; f < split.folds.size(); ++f) {
        const std::uint64_t fold_seed =
            derive_seed(cfg.seed, "cell", my_linear * 1000 + f);
        cell.folds.push_back(run_fold(model, train, split.folds, f, m, p,
                                      result.mapping, cfg, fold_seed, swd_fix));
        loss_sum += cell.folds.back().final_val_loss;
        acc_sum += cell.folds.back().final_val_acc;
      }
      rec.mean_val_loss = loss_sum / static_cast<double>(split.folds.size());
      rec.mean_val_acc = acc_sum / static_cast<double>(split.folds.size());
      if (best_cell < 0 ||
          rec.mean_val_loss <
              result.grid[static_cast<std::size_t>(best_cell)].mean_val_loss)
        best_cell = static_cast<int>(result.grid.size());
      result.grid.push_back(rec);
      outcomes.push_back(std::move(cell));
    }
  }
  if (best_cell < 0)
    throw ConfigError("no feasible replication count in the grid (d_T=" +
                      std::to_string(train.length) + ", d_S=" +
                      std::to_string(d_s) + ")");

  const GridCellResult& win =
      result.grid[static_cast<std::size_t>(best_cell)];
  const CellOutcome* win_cell = nullptr;
  for (const auto& c : outcomes)
    if (c.index == static_cast<std::size_t>(best_cell)) win_cell = &c;
  std::size_t best_fold = 0;
  for (std::size_t f = 1; f < win_cell->folds.size(); ++f)
    if (win_cell->folds[f].final_val_loss <
        win_cell->folds[best_fold].final_val_loss)
      best_fold = f;

  result.best_mean_val_loss = win.mean_val_loss;
  result.best_fold = best_fold;
  result.history = win_cell->folds[best_fold].history;
  result.best_plan = build_plan(d_s, train.length, win.m, win.dropout,
                                cfg.weight_decay, derive_seed(cfg.seed, "_"));
  result.best_plan.theta = win_cell->folds[best_fold].theta;
  result.test_accuracy =
      reprogram_accuracy(model, result.best_plan, result.mapping, test);
  result.source_checksum_after = model.checksum();
  return result;
}

void save_theta(const ThetaCheckpoint& ckpt, const std::string& path) {
  Container c;
  c.kind = ContainerKind::kTheta;
  const ReprogramPlan& plan = ckpt.plan;
  c.set_int("d_source", static_cast<std::int64_t>(plan.d_source));
  c.set_int("d_target", static_cast<std::int64_t>(plan.d_target));
  c.set_int("m", static_cast<std::int64_t>(plan.m));
  c.set_int("source_classes", ckpt.mapping.source_classes);
  c.set_int("target_classes", ckpt.mapping.target_classes);
  c.set_int("source_checksum",
            std::bit_cast<std::int64_t>(ckpt.source_checksum));
  c.set_int("mapping_seed", std::bit_cast<std::int64_t>(ckpt.mapping.seed));
  c.set_double("dropout", plan.dropout);
  c.set_double("weight_decay", plan.weight_decay);
  for (const auto& g : ckpt.mapping.groups) {
    std::vector<std::uint32_t> list;
    for (int s : g) list.push_back(static_cast<std::uint32_t>(s));
    c.label_lists.push_back(std::move(list));
  }
  c.tensors.push_back({"theta", "theta", Tensor({plan.d_source}, plan.theta)});
  c.tensors.push_back({"mask", "mask", Tensor({plan.d_source}, plan.mask)});
  std::vector<double> place;
  for (std::size_t p : plan.placements) place.push_back(static_cast<double>(p));
  c.tensors.push_back({"placements", "meta", Tensor({place.size()}, place)});
  save_container(c, path);
}

ThetaCheckpoint load_theta(const std::string& path) {
  const Container c = load_container(path);
  if (c.kind != ContainerKind::kTheta)
    throw CorruptFileError("not a theta container: " + path);
  ThetaCheckpoint ckpt;
  const auto d_s = static_cast<std::size_t>(c.get_int("d_source"));
  const auto d_t = static_cast<std::size_t>(c.get_int("d_target"));
  const auto m = static_cast<std::size_t>(c.get_int("m"));
  // Rebuild the structural fields from (d_S, d_T, m); anything inconsistent
  // in the file is corruption, not configuration.
  ReprogramPlan fresh;
  try {
    fresh = build_plan(d_s, d_t, m, c.get_double("dropout"),
                       c.get_double("weight_decay"), 0);
  } catch (const ValidationError& e) {
    throw CorruptFileError(std::string("theta file invalid: ") + e.what());
  }
  const TensorEntry& theta = c.tensor("theta");
  const TensorEntry& mask = c.tensor("mask");
  if (theta.data.dims() != std::vector<std::size_t>{d_s} ||
      mask.data.dims() != std::vector<std::size_t>{d_s})
    throw CorruptFileError("theta/mask shape mismatch in " + path);
  if (mask.data.vec() != fresh.mask)
    throw CorruptFileError("mask does not match placements in " + path);
  const TensorEntry& place = c.tensor("placements");
  if (place.data.size() != fresh.placements.size())
    throw CorruptFileError("placement count mismatch in " + path);
  for (std::size_t i = 0; i < fresh.placements.size(); ++i)
    if (place.data.vec()[i] != static_cast<double>(fresh.placements[i]))
      throw CorruptFileError("stored placements disagree with (d_S, d_T, m) in " +
                             path);
  ckpt.plan = fresh;
  ckpt.plan.theta = theta.data.vec();

  ckpt.mapping.source_classes = static_cast<int>(c.get_int("source_classes"));
  ckpt.mapping.target_classes = static_cast<int>(c.get_int("target_classes"));
  ckpt.mapping.seed =
      std::bit_cast<std::uint64_t>(c.get_int("mapping_seed"));
  ckpt.mapping.small_sets_warning =
      ckpt.mapping.source_classes / std::max(ckpt.mapping.target_classes, 1) < 3;
  for (const auto& list : c.label_lists) {
    std::vector<int> g;
    for (std::uint32_t v : list) g.push_back(static_cast<int>(v));
    ckpt.mapping.groups.push_back(std::move(g));
  }
  try {
    ckpt.mapping.validate();
  } catch (const ValidationError& e) {
    throw CorruptFileError(std::string("theta file mapping invalid: ") +
                           e.what());
  }
  ckpt.source_checksum =
      std::bit_cast<std::uint64_t>(c.get_int("source_checksum"));
  return ckpt;
}

BaselineResult finetune_baseline(const SourceModel& model,
                                 const Dataset& train, const Dataset& test,
                                 const BaselineConfig& cfg) {
  train.validate();
  test.validate();
  if (test.length != train.length || test.class_count != train.class_count)
    throw ConfigError("train/test shape mismatch");
  const std::size_t d_s = model.config().input_len;
  if (train.length > d_s) throw ConfigError("target longer than source input");
  const auto k = static_cast<std::size_t>(model.config().class_count);
  const auto c = static_cast<std::size_t>(train.class_count);

  // Trainable copy: source weights plus a fresh target head; the frozen
  // original is read, never written.
  ParamSet work;
  for (std::size_t i = 0; i < model.params().count(); ++i)
    work.add(model.params().name_at(i), model.params().at(i));
  {
    Rng rng(derive_seed(cfg.seed, "head"));
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(k)));
    Tensor hw({k, c});
    for (auto& v : hw.vec()) v = dist(rng);
    work.add("head.w", hw);
    work.add("head.b", Tensor::zeros({c}));
  }
  const std::size_t head_w_at = work.count() - 2, head_b_at = work.count() - 1;

  ReprogramPlan pad_plan = build_plan(d_s, train.length, 1, 0.0, 0.0, 0);
  std::fill(pad_plan.theta.begin(), pad_plan.theta.end(), 0.0);
  auto padded_batch = [&](const Dataset& ds, const std::vector<std::size_t>& idx) {
    Tensor b({idx.size(), d_s});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = pad_replicate(ds.series[idx[i]].values, pad_plan);
      for (std::size_t t = 0; t < d_s; ++t) b.at(i, t) = row[t];
    }
    return b;
  };

  auto head_probs = [&](const Dataset& ds, const std::vector<std::size_t>& idx) {
    Tape tape;
    const Tensor xb = padded_batch(ds, idx);
    const int x = tape.leaf(Tensor({idx.size(), d_s, 1}, xb.vec()), false);
    const auto ids = model.build_graph(tape, x, work, false);
    const int logits_c = tape.add_bias(
        tape.matmul(ids.logits, tape.leaf(work.at(head_w_at), false)),
        tape.leaf(work.at(head_b_at), false));
    return tape.value(tape.softmax(logits_c));
  };
  auto eval_acc = [&](const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::size_t hits = 0;
    const std::size_t chunk = 64;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
      const std::size_t stop = std::min(idx.size(), start + chunk);
      std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                    idx.begin() + static_cast<std::ptrdiff_t>(stop));
      const Tensor probs = head_probs(ds, part);
      for (std::size_t i = 0; i < part.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
          if (probs.at(i, j) > probs.at(i, best)) best = j;
        if (static_cast<int>(best) == ds.series[part[i]].label) ++hits;
      }
    }
    return static_cast<double>(hits) / static_cast<double>(idx.size());
  };
  auto eval_loss = [&](const Dataset& ds, const std::vector<std::size_t>& idx) {
    const Tensor probs = head_probs(ds, idx);
    std::vector<int> labels;
    labels.reserve(idx.size());
    for (auto i : idx) labels.push_back(ds.series[i].label);
    return nll_pick_forward(probs, labels).loss;
  };

  std::vector<std::size_t> train_idx, val_idx;
  if (train.size() >= 20) {
    const FoldSplit split =
        split_kfold(train, 10, derive_seed(cfg.seed, "holdout"));
    val_idx = split.folds[0];
    for (std::size_t f = 1; f < split.folds.size(); ++f)
      train_idx.insert(train_idx.end(), split.folds[f].begin(),
                       split.folds[f].end());
  } else {
    train_idx.resize(train.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
    val_idx = train_idx;
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  AdamState adam = make_adam({.lr = cfg.lr}, work);
  BaselineResult result;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
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
      for (auto i : part) labels.push_back(train.series[i].label);

      Tape tape;
      const Tensor xb = padded_batch(train, part);
      const int x = tape.leaf(Tensor({part.size(), d_s, 1}, xb.vec()), false);
      const auto ids = model.build_graph(tape, x, work, true);
      const int logits_c = tape.add_bias(
          tape.matmul(ids.logits, ids.weights[head_w_at]),
          ids.weights[head_b_at]);
      const int probs_c = tape.softmax(logits_c);
      const int loss = tape.nll_pick(probs_c, labels);
      tape.backward(loss);
      loss_sum += tape.value(loss).item();
      ++batches;

      std::vector<Tensor> grads;
      grads.reserve(ids.weights.size());
      for (int w : ids.weights) grads.push_back(tape.grad(w));
      adam_step(adam, work, grads);
    }
    EpochRecord rec;
    rec.epoch = e;
    rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    rec.val_loss = eval_loss(train, val_idx);
    rec.val_acc = eval_acc(train, val_idx);
    result.history.epochs.push_back(rec);
  }

  std::vector<std::size_t> test_idx(test.size());
  std::iota(test_idx.begin(), test_idx.end(), 0);
  result.test_accuracy = eval_acc(test, test_idx);
  return result;
}

}  // namespace v2s
