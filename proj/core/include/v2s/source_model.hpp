#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2s/dataio.hpp"
#include "v2s/params.hpp"
#include "v2s/tape.hpp"
#include "v2s/tensor.hpp"

namespace v2s {

struct SourceArchConfig {
  int class_count = 8;          // K
  std::size_t input_len = 512;  // d_S
  std::size_t conv1_ch = 8;
  std::size_t conv2_ch = 16;
  std::size_t att_dim = 16;
  std::size_t kernel = 9;
  std::size_t stride = 4;
  std::uint64_t seed = 1;
};

struct SourceRiskEstimate {
  double epsilon_s = 0.0;  // RMSE risk, in [0, sqrt(2)]
  std::size_t n_eval = 0;
  std::string dataset;
};

// Strided-conv frontend -> attention pooling -> dense softmax classifier.
// After freeze() any parameter mutation throws, so reprogramming can only
// ever reach the model through its forward pass.
class SourceModel {
 public:
  static SourceModel build(const SourceArchConfig& cfg);

  const SourceArchConfig& config() const { return cfg_; }
  const ParamSet& params() const { return params_; }
  ParamSet& mutable_params() { return params_; }
  bool frozen() const { return params_.frozen(); }
  void freeze() { params_.freeze(); }
  std::uint64_t checksum() const { return params_.checksum(); }
  std::size_t param_count() const { return params_.total_size(); }

  struct GraphIds {
    int logits = -1;
    int probs = -1;
    std::vector<int> weights;  // parallel to ParamSet order (trainable only)
  };
  // input: tape id of a [batch, d_S, 1] tensor. `weights` supplies the
  // parameters to use (defaults to this model's own). Probabilities are
  // softmax(logits) on the same graph: one code path computes both.
  GraphIds build_graph(Tape& tape, int input, const ParamSet& weights,
                       bool trainable) const;
  GraphIds forward(Tape& tape, int input) const;  // own weights, constant

  // Convenience eval on a [n, d_S] batch.
  Tensor logits(const Tensor& batch) const;
  Tensor probs(const Tensor& batch) const;

 private:
  SourceArchConfig cfg_;
  ParamSet params_;
};

struct SourceTrainConfig {
  double lr = 0.003;
  std::size_t batch = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
};

struct SourceTrainResult {
  SourceRiskEstimate risk;  // on the held-out split
  double held_out_accuracy = 0.0;
  std::size_t n_train = 0;
  std::vector<double> epoch_train_loss;
};

// Cross-entropy + Adam; a tenth of the data (fold 0 of a seeded 10-fold
// split) is held out for the risk/accuracy estimate. Freezes the model.
SourceTrainResult train_source(SourceModel& model, const Dataset& data,
                               const SourceTrainConfig& cfg);

// Mean over samples of || probs(x) - onehot(y) ||_2.
SourceRiskEstimate source_risk(const SourceModel& model, const Dataset& data);

double accuracy(const SourceModel& model, const Dataset& data);

void save_model(const SourceModel& model, const std::string& path,
                double epsilon_s = -1.0, double held_out_accuracy = -1.0);
SourceModel load_source_model(const std::string& path);
// epsilon_s stored at save time, if any (< 0 means absent).
double model_file_epsilon(const std::string& path);

// Stack a dataset (or an index subset) into a [n, d] batch tensor.
Tensor batch_of(const Dataset& ds, const std::vector<std::size_t>& idx);
Tensor batch_of(const Dataset& ds);

}  // namespace v2s
