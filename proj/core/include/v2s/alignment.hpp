#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2s/dataio.hpp"
#include "v2s/reprogram.hpp"
#include "v2s/source_model.hpp"
#include "v2s/tensor.hpp"

namespace v2s {

// Equal-size empirical measures over R^K throughout: 1-D distances reduce to
// sorting, exact K-dimensional W1 to a minimum-cost perfect matching.

// Mean absolute difference of sorted samples.
double w1_1d(std::vector<double> a, std::vector<double> b);

// (mean |sorted diff|^p)^(1/p), p >= 1.
double wp_1d(std::vector<double> a, std::vector<double> b, double p);

// Exact empirical W1 between two [n, K] clouds via min-cost assignment on
// the Euclidean cost matrix, divided by n. n <= 256 (OracleSizeError above).
double w1_exact_oracle(const Tensor& a, const Tensor& b);
constexpr std::size_t kOracleMaxN = 256;

struct SWDEstimate {
  double value = 0.0;
  std::size_t n_projections = 0;
  double p = 2.0;
  std::uint64_t seed = 0;
};

// Average wp_1d over seeded uniform random unit directions. Direction t is
// derived from (seed, t) alone, so projections can run in any order.
SWDEstimate swd(const Tensor& a, const Tensor& b, std::size_t n_projections,
                double p, std::uint64_t seed);

struct Lemma1Report {
  double lhs = 0.0;        // all-pairs mean of ||f(x) - f(x')||_2
  double w1_logits = 0.0;  // exact W1 between the logit clouds
  double rhs = 0.0;        // 2 sqrt(K) * w1_logits
  double slack = 0.0;
  int k = 0;
  bool holds = false;  // lhs <= rhs + slack
};

// xs, xs_prime: [n, d_S] raw input batches for the frozen model.
Lemma1Report lemma1_check(const SourceModel& model, const Tensor& xs,
                          const Tensor& xs_prime, double slack);

enum class W1Estimator { kExactOracle, kSwdProxy };

struct RiskBoundReport {
  double epsilon_s = 0.0;
  int k = 0;
  double w1 = 0.0;
  std::string estimator;  // "exact-oracle" | "swd-proxy"
  double bound = 0.0;     // epsilon_s + 2 sqrt(K) * w1
  double measured_target_risk = 0.0;
  bool satisfied = false;  // measured <= bound + slack
  double slack = 0.0;
  std::size_t n = 0;  // per-side sample count of the alignment estimate
  // The RMSE term uses a one-to-one sub-mapping (first source label of each
  // assigned set); true whenever any set has more than one member.
  bool assumption2_mismatch = false;
};

// Alignment term between reprogrammed-target logits and source logits
// (both subsampled to n per side, seeded); measured risk over the full
// target set against the mapped one-hot source labels.
RiskBoundReport theorem1_report(const SourceRiskEstimate& risk,
                                const SourceModel& model,
                                const ReprogramPlan& plan,
                                const LabelMapping& mapping,
                                const Dataset& source, const Dataset& target,
                                W1Estimator estimator, std::size_t n,
                                double slack, std::uint64_t seed,
                                std::size_t swd_projections = 1000);

struct DatasetScore {
  std::string name;
  double accuracy = 0.0;
  int class_count = 0;
};

struct MetricsReport {
  std::vector<DatasetScore> rows;
  std::vector<double> pce;  // 100 * (1 - acc_j) / c_j
  double mpce = 0.0;        // mean of pce
  double mean_acc = 0.0;
  double median_acc = 0.0;
};

MetricsReport metrics(const std::vector<DatasetScore>& rows);

}  // namespace v2s
