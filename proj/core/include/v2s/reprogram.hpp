#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2s/dataio.hpp"
#include "v2s/rng.hpp"
#include "v2s/source_model.hpp"
#include "v2s/tape.hpp"

namespace v2s {

// Additive input transform: the target series is replicated at m evenly
// spaced windows of the padded source-length input; every other position
// carries a trainable value. mask is 0 exactly on replica positions, so the
// effective perturbation mask*theta never touches the signal itself.
struct ReprogramPlan {
  std::size_t d_source = 0;
  std::size_t d_target = 0;
  std::size_t m = 1;
  std::vector<std::size_t> placements;  // j * floor(d_source/m)
  std::vector<double> mask;             // length d_source, values 0/1
  std::vector<double> theta;            // length d_source
  double dropout = 0.0;
  double weight_decay = 0.04;
};

// theta drawn from Normal(0, 0.01^2) with `seed`. Throws PlacementError when
// the replicas cannot fit disjointly (d_target > floor(d_source/m)).
ReprogramPlan build_plan(std::size_t d_source, std::size_t d_target,
                         std::size_t m, double dropout, double weight_decay,
                         std::uint64_t seed);

// Pad(x): replicas of x at the plan's placements, zero elsewhere.
std::vector<double> pad_replicate(const std::vector<double>& x,
                                  const ReprogramPlan& plan);

// Per-coordinate inverted-dropout multiplier for theta, resampled per batch:
// kept -> 1/(1-p), dropped -> 0. All ones when p == 0.
std::vector<double> sample_drop_scale(const ReprogramPlan& plan, Rng& rng);

// Eval-mode transform: Pad(x) + mask * theta.
std::vector<double> transform(const std::vector<double>& x,
                              const ReprogramPlan& plan);
// Training-mode transform with an explicit dropout draw.
std::vector<double> transform(const std::vector<double>& x,
                              const ReprogramPlan& plan,
                              const std::vector<double>& drop_scale);
// Convenience: samples the dropout draw from rng when training.
std::vector<double> transform(const std::vector<double>& x,
                              const ReprogramPlan& plan, bool training,
                              Rng& rng);

// Disjoint many-to-one assignment of source labels to target labels; each
// target label receives exactly floor(K/c) source labels.
struct LabelMapping {
  int source_classes = 0;  // K
  int target_classes = 0;  // c
  std::vector<std::vector<int>> groups;
  std::uint64_t seed = 0;
  bool small_sets_warning = false;  // floor(K/c) < 3

  void validate() const;
};

LabelMapping make_label_mapping(int source_classes, int target_classes,
                                std::uint64_t seed);

// Mean source probability over each target label's assigned set. Scores are
// not renormalized; unassigned source mass is simply ignored.
std::vector<double> target_scores(const std::vector<double>& source_probs,
                                  const LabelMapping& mapping);

// Eval-mode reprogrammed inputs for an index subset, as a [n, d_source] batch.
Tensor reprogrammed_batch(const ReprogramPlan& plan, const Dataset& ds,
                          const std::vector<std::size_t>& idx);

struct LossGraphIds {
  int theta = -1;
  int probs = -1;
  int scores = -1;
  int loss = -1;
};

// Records the full training loss on `tape`: transform -> frozen forward ->
// label aggregation -> mean negative log score + weight_decay * ||theta||^2.
// Gradient flows only to the theta leaf. drop_scale == nullptr means eval
// mode (no dropout).
LossGraphIds build_v2s_loss_graph(Tape& tape, const SourceModel& model,
                                  const ReprogramPlan& plan,
                                  const LabelMapping& mapping,
                                  const Dataset& ds,
                                  const std::vector<std::size_t>& idx,
                                  const std::vector<double>* drop_scale);

struct LossResult {
  double loss = 0.0;
  std::size_t clamp_hits = 0;  // scores clamped at 1e-12 before the log
};

// Eval-mode loss over an index subset.
LossResult v2s_loss(const SourceModel& model, const ReprogramPlan& plan,
                    const LabelMapping& mapping, const Dataset& ds,
                    const std::vector<std::size_t>& idx);

struct Prediction {
  int label = 0;
  std::vector<double> scores;
};

// Argmax of target scores; ties break toward the lower class index.
Prediction predict(const SourceModel& model, const ReprogramPlan& plan,
                   const LabelMapping& mapping, const std::vector<double>& x);

double reprogram_accuracy(const SourceModel& model, const ReprogramPlan& plan,
                          const LabelMapping& mapping, const Dataset& ds);

struct TrainConfig {
  double lr = 0.05;
  std::size_t batch = 32;
  std::size_t epochs = 100;
  double weight_decay = 0.04;
  std::vector<double> dropout_grid = {0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<std::size_t> m_grid = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  bool swd_trace = false;  // per-epoch SWD column in the history
  std::size_t swd_projections = 1000;
  std::size_t swd_sample = 256;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double swd = 0.0;
  bool has_swd = false;
  std::size_t clamp_hits = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// Header pinned to: epoch,train_loss,val_loss,val_acc,swd
void write_history_csv(const TrainHistory& history, const std::string& path);

struct GridCellResult {
  std::size_t m = 0;
  double dropout = 0.0;
  bool feasible = true;
  std::string note;
  double mean_val_loss = 0.0;
  double mean_val_acc = 0.0;
};

struct ReprogramResult {
  ReprogramPlan best_plan;  // carries the trained theta
  LabelMapping mapping;
  TrainHistory history;  // winning cell, winning fold
  std::vector<GridCellResult> grid;
  std::size_t best_fold = 0;
  double best_mean_val_loss = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t source_checksum_before = 0;
  std::uint64_t source_checksum_after = 0;
};

// Grid search over (m, dropout) with k-fold validation; Adam on theta only.
// Cells with infeasible m are recorded and skipped. Selection: lowest mean
// final-epoch validation loss, ties toward smaller m then smaller dropout;
// theta* comes from the winning cell's best-validation fold. source_for_swd
// must be provided when cfg.swd_trace is set.
ReprogramResult train_reprogram(const SourceModel& model, const Dataset& train,
                                const Dataset& test, const TrainConfig& cfg,
                                const Dataset* source_for_swd = nullptr);

struct ThetaCheckpoint {
  ReprogramPlan plan;
  LabelMapping mapping;
  std::uint64_t source_checksum = 0;
};

void save_theta(const ThetaCheckpoint& ckpt, const std::string& path);
ThetaCheckpoint load_theta(const std::string& path);

struct BaselineConfig {
  double lr = 0.001;
  std::size_t batch = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
};

struct BaselineResult {
  double test_accuracy = 0.0;
  TrainHistory history;
};

// TF_a: zero-pad the target data to the source length, bolt a fresh dense
// head of width c onto the logits, and train every weight. Works on a
// trainable clone; the passed-in frozen model is never touched.
BaselineResult finetune_baseline(const SourceModel& model,
                                 const Dataset& train, const Dataset& test,
                                 const BaselineConfig& cfg);

}  // namespace v2s
