#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace v2s {

struct TimeSeries {
  std::vector<double> values;
  int label = 0;
};

struct Dataset {
  std::string name;
  std::vector<TimeSeries> series;
  std::size_t length = 0;  // shared series length
  int class_count = 0;
  std::string role;  // "source" | "target"

  std::size_t size() const { return series.size(); }
  void validate() const;  // non-empty, uniform length, labels in range, finite
};

enum class SynthKind { kSinusoid, kBump };

struct SynthSpec {
  SynthKind kind = SynthKind::kSinusoid;
  int class_count = 2;
  std::size_t length = 64;
  std::size_t samples_per_class = 30;
  double noise_std = 0.1;
  std::uint64_t seed = 1;

  void validate() const;  // class_count >= 2, length >= 8, noise_std >= 0
};

struct FoldSplit {
  std::size_t fold_count = 0;
  std::vector<std::vector<std::size_t>> folds;
};

// One record per line: label, then d_T values, separated by `delimiter`.
// Arbitrary integer labels are remapped to [0, c) preserving sorted order.
Dataset load_ucr(const std::string& path, char delimiter = '\t');
void save_ucr(const Dataset& ds, const std::string& path,
              char delimiter = '\t');

// K sinusoid classes; class k has frequency proportional to (k+1). Random
// phase per sample, Gaussian amplitude noise.
Dataset synth_source(const SynthSpec& spec);

// Localized-bump classes; class k superposes (k+1) Gaussian bumps with
// alternating signs, plus per-sample center jitter and noise.
Dataset synth_target(const SynthSpec& spec);

// Deterministic shuffled partition; fold sizes differ by at most one.
FoldSplit split_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed);

enum class NormalizePolicy { kNone, kPerSeriesZ };

// per-series-z: subtract per-series mean, divide by per-series std; series
// with std < 1e-8 pass through unchanged.
Dataset normalize(const Dataset& ds, NormalizePolicy policy);

}  // namespace v2s
