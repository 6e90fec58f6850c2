#include "v2s/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "v2s/errors.hpp"
#include "v2s/rng.hpp"

namespace v2s {

namespace {

void check_pair_sizes(std::size_t na, std::size_t nb) {
  if (na != nb)
    throw ArgumentError("equal-size empirical measures required (" +
                        std::to_string(na) + " vs " + std::to_string(nb) + ")");
  if (na == 0) throw ArgumentError("empty sample set");
}

// Min-cost perfect matching on a square cost matrix (Hungarian algorithm
// with potentials, O(n^3)).
double assignment_cost(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = a[static_cast<std::size_t>(i0 - 1)]
                            [static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    total += a[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)]
              [static_cast<std::size_t>(j - 1)];
  return total;
}

}  // namespace

double w1_1d(std::vector<double> a, std::vector<double> b) {
  check_pair_sizes(a.size(), b.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double wp_1d(std::vector<double> a, std::vector<double> b, double p) {
  if (!(p >= 1.0)) throw ArgumentError("wp_1d: p must be >= 1");
  if (p == 1.0) return w1_1d(std::move(a), std::move(b));
  check_pair_sizes(a.size(), b.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += std::pow(std::fabs(a[i] - b[i]), p);
  return std::pow(acc / static_cast<double>(a.size()), 1.0 / p);
}

double w1_exact_oracle(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ArgumentError("w1_exact_oracle: expected [n,K] clouds");
  if (a.dim(1) != b.dim(1))
    throw ArgumentError("w1_exact_oracle: dimension mismatch");
  check_pair_sizes(a.dim(0), b.dim(0));
  const std::size_t n = a.dim(0), k = a.dim(1);
  if (n > kOracleMaxN)
    throw OracleSizeError("w1_exact_oracle: n=" + std::to_string(n) +
                          " exceeds limit " + std::to_string(kOracleMaxN));
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t d = 0; d < k; ++d) {
        const double diff = a.at(i, d) - b.at(j, d);
        sq += diff * diff;
      }
      cost[i][j] = std::sqrt(sq);
    }
  return assignment_cost(cost) / static_cast<double>(n);
}

SWDEstimate swd(const Tensor& a, const Tensor& b, std::size_t n_projections,
                double p, std::uint64_t seed) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ArgumentError("swd: expected [n,K] clouds");
  if (a.dim(1) != b.dim(1)) throw ArgumentError("swd: dimension mismatch");
  check_pair_sizes(a.dim(0), b.dim(0));
  if (n_projections < 1) throw ArgumentError("swd: need >= 1 projection");
  if (!(p >= 1.0)) throw ArgumentError("swd: p must be >= 1");
  const std::size_t n = a.dim(0), k = a.dim(1);

  double acc = 0.0;
  std::vector<double> dir(k), pa(n), pb(n);
  for (std::size_t t = 0; t < n_projections; ++t) {
    // Per-projection counter-based stream: direction t never depends on how
    // many draws earlier projections consumed.
    Rng rng(derive_seed(seed, "proj", t));
    std::normal_distribution<double> gauss(0.0, 1.0);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& d : dir) {
        d = gauss(rng);
        norm += d * d;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (auto& d : dir) d /= norm;

    for (std::size_t i = 0; i < n; ++i) {
      double da = 0.0, db = 0.0;
      for (std::size_t d = 0; d < k; ++d) {
        da += a.at(i, d) * dir[d];
        db += b.at(i, d) * dir[d];
      }
      pa[i] = da;
      pb[i] = db;
    }
    acc += wp_1d(pa, pb, p);
  }
  SWDEstimate est;
  est.value = acc / static_cast<double>(n_projections);
  est.n_projections = n_projections;
  est.p = p;
  est.seed = seed;
  return est;
}

Lemma1Report lemma1_check(const SourceModel& model, const Tensor& xs,
                          const Tensor& xs_prime, double slack) {
  if (xs.rank() != 2 || xs_prime.rank() != 2)
    throw ArgumentError("lemma1_check: expected [n, d_S] batches");
  check_pair_sizes(xs.dim(0), xs_prime.dim(0));
  const std::size_t n = xs.dim(0);
  const auto k = static_cast<std::size_t>(model.config().class_count);

  const Tensor pa = model.probs(xs);
  const Tensor pb = model.probs(xs_prime);
  double lhs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t d = 0; d < k; ++d) {
        const double diff = pa.at(i, d) - pb.at(j, d);
        sq += diff * diff;
      }
      lhs += std::sqrt(sq);
    }
  lhs /= static_cast<double>(n) * static_cast<double>(n);

  Lemma1Report report;
  report.k = model.config().class_count;
  report.lhs = lhs;
  report.w1_logits = w1_exact_oracle(model.logits(xs), model.logits(xs_prime));
  report.rhs = 2.0 * std::sqrt(static_cast<double>(k)) * report.w1_logits;
  report.slack = slack;
  report.holds = lhs <= report.rhs + slack;
  return report;
}

namespace {

std::vector<std::size_t> seeded_subsample(std::size_t total, std::size_t take,
                                          std::uint64_t seed) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

RiskBoundReport theorem1_report(const SourceRiskEstimate& risk,
                                const SourceModel& model,
                                const ReprogramPlan& plan,
                                const LabelMapping& mapping,
                                const Dataset& source, const Dataset& target,
                                W1Estimator estimator, std::size_t n,
                                double slack, std::uint64_t seed,
                                std::size_t swd_projections) {
  source.validate();
  target.validate();
  mapping.validate();
  if (n < 1) throw ArgumentError("theorem1_report: n must be >= 1");
  if (estimator == W1Estimator::kExactOracle && n > kOracleMaxN)
    throw OracleSizeError("theorem1_report: exact oracle limited to n <= " +
                          std::to_string(kOracleMaxN) + ", requested " +
                          std::to_string(n));
  const auto k = static_cast<std::size_t>(model.config().class_count);
  const std::size_t n_eff = std::min({n, source.size(), target.size()});

  const auto t_idx =
      seeded_subsample(target.size(), n_eff, derive_seed(seed, "tgt_sub"));
  const auto s_idx =
      seeded_subsample(source.size(), n_eff, derive_seed(seed, "src_sub"));
  const Tensor target_logits =
      model.logits(reprogrammed_batch(plan, target, t_idx));
  const Tensor source_logits = model.logits(batch_of(source, s_idx));

  RiskBoundReport report;
  report.epsilon_s = risk.epsilon_s;
  report.k = model.config().class_count;
  report.n = n_eff;
  report.slack = slack;
  if (estimator == W1Estimator::kExactOracle) {
    report.w1 = w1_exact_oracle(target_logits, source_logits);
    report.estimator = "exact-oracle";
  } else {
    report.w1 = swd(target_logits, source_logits, swd_projections, 2.0,
                    derive_seed(seed, "swd_dirs"))
                    .value;
    report.estimator = "swd-proxy";
  }
  report.bound =
      report.epsilon_s + 2.0 * std::sqrt(static_cast<double>(k)) * report.w1;

  // Measured risk in the theorem's RMSE form, over the full target set. The
  // label each target sample must hit is a single source label; with
  // many-to-one sets the first assigned member stands in (mismatch flagged).
  for (const auto& g : mapping.groups)
    if (g.size() > 1) report.assumption2_mismatch = true;
  double acc = 0.0;
  const std::size_t chunk = 64;
  std::vector<std::size_t> all(target.size());
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t start = 0; start < all.size(); start += chunk) {
    const std::size_t stop = std::min(all.size(), start + chunk);
    std::vector<std::size_t> part(all.begin() + static_cast<std::ptrdiff_t>(start),
                                  all.begin() + static_cast<std::ptrdiff_t>(stop));
    const Tensor probs = model.probs(reprogrammed_batch(plan, target, part));
    for (std::size_t i = 0; i < part.size(); ++i) {
      const int y_t = target.series[part[i]].label;
      const auto y_s = static_cast<std::size_t>(
          mapping.groups[static_cast<std::size_t>(y_t)][0]);
      double sq = 0.0;
      for (std::size_t d = 0; d < k; ++d) {
        const double want = d == y_s ? 1.0 : 0.0;
        const double diff = probs.at(i, d) - want;
        sq += diff * diff;
      }
      acc += std::sqrt(sq);
    }
  }
  report.measured_target_risk = acc / static_cast<double>(target.size());
  report.satisfied = report.measured_target_risk <= report.bound + slack;
  return report;
}

MetricsReport metrics(const std::vector<DatasetScore>& rows) {
  if (rows.empty()) throw ArgumentError("metrics: no datasets");
  MetricsReport report;
  report.rows = rows;
  std::vector<double> accs;
  for (const auto& r : rows) {
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
      throw ArgumentError("metrics: accuracy out of [0,1] for " + r.name);
    if (r.class_count < 2)
      throw ArgumentError("metrics: class count < 2 for " + r.name);
    report.pce.push_back(100.0 * (1.0 - r.accuracy) /
                         static_cast<double>(r.class_count));
    accs.push_back(r.accuracy);
  }
  report.mpce = std::accumulate(report.pce.begin(), report.pce.end(), 0.0) /
                static_cast<double>(report.pce.size());
  report.mean_acc = std::accumulate(accs.begin(), accs.end(), 0.0) /
                    static_cast<double>(accs.size());
  std::sort(accs.begin(), accs.end());
  const std::size_t mid = accs.size() / 2;
  report.median_acc = accs.size() % 2 == 1
                          ? accs[mid]
                          : 0.5 * (accs[mid - 1] + accs[mid]);
  return report;
}

}  // namespace v2s
