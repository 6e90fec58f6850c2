// Acceptance gate: ten numbered criteria, one PASS/FAIL line each, nonzero
// exit if any fail. Tolerances and runtime limits are pinned inline.
// V2S_CLI_PATH (the built `v2s` binary) comes from the build system.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "v2s/alignment.hpp"
#include "v2s/dataio.hpp"
#include "v2s/errors.hpp"
#include "v2s/reprogram.hpp"
#include "v2s/rng.hpp"
#include "v2s/source_model.hpp"
#include "v2s/tape.hpp"
#include "v2s/tensor.hpp"

namespace fs = std::filesystem;
using namespace v2s;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
  int id = 0;
  std::string name;
  bool ok = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

SourceModel random_frozen_model(int classes, std::size_t input_len,
                                std::uint64_t seed) {
  SourceArchConfig cfg;
  cfg.class_count = classes;
  cfg.input_len = input_len;
  cfg.conv1_ch = 4;
  cfg.conv2_ch = 6;
  cfg.att_dim = 5;
  cfg.seed = seed;
  SourceModel m = SourceModel::build(cfg);
  m.freeze();
  return m;
}

Tensor uniform_cloud(std::size_t n, std::size_t k, double lo, double hi,
                     Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t({n, k});
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

double brute_w1_1d(const std::vector<double>& a, std::vector<double> b) {
  std::vector<std::size_t> idx(b.size());
  std::iota(idx.begin(), idx.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      cost += std::fabs(a[i] - b[idx[i]]);
    best = std::min(best, cost / static_cast<double>(a.size()));
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

// ---- criterion 1: gradient fidelity --------------------------------------

Criterion check_gradients() {
  const auto t0 = Clock::now();
  const double h = 1e-5;
  double worst = 0.0;

  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const std::uint64_t base = derive_seed(4242, "accept_grad", trial);
    const SourceModel model = random_frozen_model(4, 64, base);
    ReprogramPlan plan =
        build_plan(64, 16, 1 + trial % 4, 0.0, 0.04, derive_seed(base, "plan"));
    const LabelMapping mapping = make_label_mapping(4, 2, derive_seed(base, "map"));

    Dataset ds;
    ds.name = "grad";
    ds.length = 16;
    ds.class_count = 2;
    Rng rng(derive_seed(base, "data"));
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 6; ++i) {
      TimeSeries s;
      s.label = i % 2;
      s.values.resize(16);
      for (auto& v : s.values) v = u(rng);
      ds.series.push_back(std::move(s));
    }
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);

    Tape tape;
    const LossGraphIds ids =
        build_v2s_loss_graph(tape, model, plan, mapping, ds, idx, nullptr);
    tape.backward(ids.loss);
    const Tensor analytic = tape.grad(ids.theta);

    const auto loss_at = [&](std::size_t coord, double delta) {
      ReprogramPlan p = plan;
      p.theta[coord] += delta;
      return v2s_loss(model, p, mapping, ds, idx).loss;
    };
    for (std::size_t j = 0; j < plan.theta.size(); ++j) {
      const double fd = (loss_at(j, -2 * h) - 8 * loss_at(j, -h) +
                         8 * loss_at(j, h) - loss_at(j, 2 * h)) /
                        (12 * h);
      const double rel =
          std::fabs(analytic.vec()[j] - fd) / std::max(std::fabs(fd), 1e-6);
      worst = std::max(worst, rel);
    }
  }

  const double elapsed = seconds_since(t0);
  Criterion c{1, "gradient fidelity (full loss vs finite differences)"};
  c.ok = worst <= 1e-4 && elapsed < 30.0;
  c.detail = "max rel err " + fmt(worst) + " (tol 1e-4), " + fmt(elapsed) +
             "s (limit 30s)";
  return c;
}

// ---- criterion 2: OT oracle equivalence -----------------------------------

Criterion check_ot_oracles() {
  const auto t0 = Clock::now();
  double worst_brute = 0.0, worst_assign = 0.0;

  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(derive_seed(4243, "accept_brute", s));
    std::uniform_int_distribution<std::size_t> nd(1, 6);
    std::uniform_real_distribution<double> u(-5, 5);
    const std::size_t n = nd(rng);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    worst_brute =
        std::max(worst_brute, std::fabs(w1_1d(a, b) - brute_w1_1d(a, b)));
  }

  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(derive_seed(4243, "accept_assign", s));
    std::uniform_int_distribution<std::size_t> nd(1, 64);
    std::uniform_real_distribution<double> u(-10, 10);
    const std::size_t n = nd(rng);
    Tensor a({n, 1}), b({n, 1});
    std::vector<double> av(n), bv(n);
    for (std::size_t i = 0; i < n; ++i) {
      av[i] = u(rng);
      bv[i] = u(rng);
      a.at(i, 0) = av[i];
      b.at(i, 0) = bv[i];
    }
    worst_assign = std::max(
        worst_assign, std::fabs(w1_exact_oracle(a, b) - w1_1d(av, bv)));
  }

  const double elapsed = seconds_since(t0);
  Criterion c{2, "exact W1 vs brute-force coupling and assignment oracles"};
  c.ok = worst_brute <= 1e-12 && worst_assign <= 1e-9 && elapsed < 30.0;
  c.detail = "coupling err " + fmt(worst_brute) + " (tol 1e-12), 1-D err " +
             fmt(worst_assign) + " (tol 1e-9), " + fmt(elapsed) +
             "s (limit 30s)";
  return c;
}

// ---- criterion 3: estimator ordering and SWD sanity -----------------------

Criterion check_estimators() {
  const auto t0 = Clock::now();
  bool ordered = true;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Rng rng(derive_seed(4244, "accept_order", s));
    std::uniform_int_distribution<std::size_t> nd(1, 24);
    std::uniform_real_distribution<double> u(-4, 4);
    const std::size_t n = nd(rng);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    if (wp_1d(a, b, 1.0) > wp_1d(a, b, 2.0) + 1e-12) ordered = false;
  }

  Rng rng(derive_seed(4244, "accept_swd"));
  const Tensor a = uniform_cloud(32, 4, -2, 2, rng);
  const Tensor b = uniform_cloud(32, 4, -2, 2, rng);
  const bool self_zero = swd(a, a, 128, 2.0, 11).value == 0.0;
  const bool deterministic =
      swd(a, b, 128, 2.0, 11).value == swd(a, b, 128, 2.0, 11).value &&
      swd(a, b, 128, 2.0, 11).value == swd(a, b, 128, 2.0, 11).value;

  const double elapsed = seconds_since(t0);
  Criterion c{3, "W1 <= W2 ordering; SWD self-distance and determinism"};
  c.ok = ordered && self_zero && deterministic && elapsed < 30.0;
  c.detail = std::string("ordering ") + (ordered ? "held" : "VIOLATED") +
             " on 1000 pairs, swd(A,A)=" + (self_zero ? "0" : "NONZERO") +
             ", seeded repeat " + (deterministic ? "identical" : "DIFFERS") +
             ", " + fmt(elapsed) + "s (limit 30s)";
  return c;
}

// ---- criterion 4: probability/logit cloud inequality ----------------------

Criterion check_cloud_inequality() {
  const auto t0 = Clock::now();
  int held = 0;
  const int trials = 50;
  for (int i = 0; i < trials; ++i) {
    const int k = i % 3 == 0 ? 2 : (i % 3 == 1 ? 4 : 8);
    const SourceModel model =
        random_frozen_model(k, 64, derive_seed(4245, "accept_model", i));
    Rng rng(derive_seed(4245, "accept_inputs", i));
    const Tensor xs = uniform_cloud(64, 64, -1.5, 1.5, rng);
    const Tensor xp = uniform_cloud(64, 64, -1.5, 1.5, rng);
    if (lemma1_check(model, xs, xp, 0.05).holds) ++held;
  }
  const double elapsed = seconds_since(t0);
  Criterion c{4, "probability-gap bound vs 2 sqrt(K) W1 on logit clouds"};
  c.ok = held == trials && elapsed < 120.0;
  c.detail = std::to_string(held) + "/" + std::to_string(trials) +
             " trials held (slack 0.05), " + fmt(elapsed) + "s (limit 120s)";
  return c;
}

// ---- criteria 5/6/7: the toy pipeline -------------------------------------

struct Pipeline {
  Dataset source;
  Dataset target_train;
  Dataset target_test;
  SourceModel model;
  SourceTrainResult train_result;
  ReprogramResult reprogram_result;
  double source_seconds = 0.0;
  double reprogram_seconds = 0.0;
};

Pipeline run_pipeline() {
  Pipeline p;

  SynthSpec src;
  src.kind = SynthKind::kSinusoid;
  src.class_count = 8;
  src.length = 512;
  src.samples_per_class = 200;
  src.noise_std = 0.1;
  src.seed = derive_seed(1, "synth_source");
  p.source = synth_source(src);

  SynthSpec tgt;
  tgt.kind = SynthKind::kBump;
  tgt.class_count = 2;
  tgt.length = 64;
  tgt.samples_per_class = 30;
  tgt.noise_std = 0.05;
  tgt.seed = derive_seed(1, "synth_target");
  p.target_train = synth_target(tgt);
  tgt.samples_per_class = 50;
  tgt.seed = derive_seed(1, "synth_target_test");
  p.target_test = synth_target(tgt);

  SourceArchConfig arch;
  arch.class_count = 8;
  arch.input_len = 512;
  arch.seed = 1;
  p.model = SourceModel::build(arch);
  auto t0 = Clock::now();
  p.train_result = train_source(p.model, p.source, SourceTrainConfig{});
  p.source_seconds = seconds_since(t0);

  TrainConfig cfg;  // lr 0.05, batch 32, 100 epochs, weight decay 0.04
  cfg.m_grid = {1};
  cfg.dropout_grid = {0.0};
  cfg.seed = 1;
  t0 = Clock::now();
  p.reprogram_result =
      train_reprogram(p.model, p.target_train, p.target_test, cfg);
  p.reprogram_seconds = seconds_since(t0);
  return p;
}

Criterion check_pipeline(const Pipeline& p) {
  Criterion c{6, "toy pipeline: source training and reprogramming targets"};
  const double acc_src = p.train_result.held_out_accuracy;
  const double acc_tgt = p.reprogram_result.test_accuracy;
  const bool checksum_ok = p.reprogram_result.source_checksum_before ==
                           p.reprogram_result.source_checksum_after;
  c.ok = acc_src >= 0.95 && p.source_seconds < 120.0 && acc_tgt >= 0.90 &&
         p.reprogram_seconds < 60.0 && checksum_ok;
  c.detail = "source acc " + fmt(acc_src) + " in " + fmt(p.source_seconds) +
             "s (>=0.95, <120s); target acc " + fmt(acc_tgt) + " in " +
             fmt(p.reprogram_seconds) + "s (>=0.90, <60s); checksum " +
             (checksum_ok ? "unchanged" : "CHANGED");
  return c;
}

Criterion check_risk_bound(const Pipeline& p) {
  const auto t0 = Clock::now();
  const RiskBoundReport rep = theorem1_report(
      p.train_result.risk, p.model, p.reprogram_result.best_plan,
      p.reprogram_result.mapping, p.source, p.target_train,
      W1Estimator::kExactOracle, 64, 0.05, derive_seed(1, "accept_bound"));
  const double elapsed = seconds_since(t0);
  Criterion c{5, "measured target risk within the alignment bound"};
  c.ok = rep.satisfied && rep.estimator == "exact-oracle" && elapsed < 60.0;
  c.detail = "measured " + fmt(rep.measured_target_risk) + " <= bound " +
             fmt(rep.bound) + " + 0.05: " + (rep.satisfied ? "yes" : "NO") +
             "; label-set mismatch flag " +
             (rep.assumption2_mismatch ? "true" : "false") + "; " +
             fmt(elapsed) + "s (limit 60s)";
  return c;
}

Criterion check_training_trend(const Pipeline& p) {
  const auto t0 = Clock::now();
  int swd_down = 0, loss_down = 0;
  const int runs = 10;
  for (int i = 0; i < runs; ++i) {
    const std::uint64_t seed = 101 + static_cast<std::uint64_t>(i);
    SynthSpec tgt;
    tgt.kind = SynthKind::kBump;
    tgt.class_count = 2;
    tgt.length = 64;
    tgt.samples_per_class = 30;
    tgt.noise_std = 0.05;
    tgt.seed = derive_seed(seed, "synth_target");
    const Dataset train = synth_target(tgt);
    tgt.samples_per_class = 50;
    tgt.seed = derive_seed(seed, "synth_target_test");
    const Dataset test = synth_target(tgt);

    TrainConfig cfg;
    cfg.m_grid = {1};
    cfg.dropout_grid = {0.0};
    cfg.folds = 2;
    cfg.swd_trace = true;
    cfg.seed = seed;
    const ReprogramResult r =
        train_reprogram(p.model, train, test, cfg, &p.source);
    const auto& epochs = r.history.epochs;
    if (epochs.size() >= 2 && epochs.front().has_swd &&
        epochs.back().has_swd) {
      if (epochs.back().swd < epochs.front().swd) ++swd_down;
      if (epochs.back().val_loss < epochs.front().val_loss) ++loss_down;
    }
  }
  const double elapsed = seconds_since(t0);
  Criterion c{7, "alignment and validation loss decrease across seeds"};
  c.ok = swd_down >= 8 && loss_down >= 8;
  c.detail = "final < first SWD in " + std::to_string(swd_down) +
             "/10, val loss in " + std::to_string(loss_down) + "/10 (need " +
             ">=8 each), " + fmt(elapsed) + "s";
  return c;
}

// ---- criterion 8: mapping arithmetic ---------------------------------------

Criterion check_mapping() {
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 100 && ok; ++seed) {
    const LabelMapping map = make_label_mapping(35, 6, seed);
    if (map.groups.size() != 6) ok = false;
    std::set<int> used;
    for (const auto& g : map.groups) {
      if (g.size() != 5) ok = false;
      for (int lbl : g) {
        if (lbl < 0 || lbl >= 35) ok = false;
        if (!used.insert(lbl).second) ok = false;  // overlap
      }
    }
    if (used.size() != 30) ok = false;  // exactly 5 source labels unassigned
  }
  Criterion c{8, "35 source labels over 6 targets: six disjoint fives"};
  c.ok = ok;
  c.detail = ok ? "verified over 100 seeds" : "floor rule VIOLATED";
  return c;
}

// ---- criterion 9: metrics arithmetic ---------------------------------------

Criterion check_metrics() {
  const MetricsReport hand = metrics({{"hand", 0.87, 2}});
  const bool hand_ok = hand.pce.size() == 1 &&
                       std::fabs(hand.pce[0] - 6.5) <= 1e-12 &&
                       std::fabs(hand.mpce - 6.5) <= 1e-12;
  const MetricsReport perfect = metrics({{"a", 1.0, 2}, {"b", 1.0, 9}});
  const bool perfect_ok = perfect.mpce == 0.0 && perfect.pce[0] == 0.0 &&
                          perfect.pce[1] == 0.0;
  Criterion c{9, "per-class error metrics reproduce hand examples"};
  c.ok = hand_ok && perfect_ok;
  c.detail = "acc 0.87 / 2 classes -> " + fmt(hand.pce.empty() ? -1 : hand.pce[0]) +
             " (want 6.5, tol 1e-12); all-correct -> " + fmt(perfect.mpce) +
             " (want 0 exactly)";
  return c;
}

// ---- criterion 10: CLI determinism -----------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(V2S_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

bool read_file(const fs::path& p, std::string& out) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return false;
  std::ostringstream ss;
  ss << f.rdbuf();
  out = ss.str();
  return true;
}

Criterion check_cli_determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "v2s-acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  std::string failure;
  const auto twice = [&](const std::string& label, const std::string& args,
                         const std::vector<std::string>& files) {
    if (!failure.empty()) return;
    const fs::path a = root / (label + "-a"), b = root / (label + "-b");
    if (run_cli(args + " --out " + a.string()) != 0 ||
        run_cli(args + " --out " + b.string()) != 0) {
      failure = label + " did not exit 0";
      return;
    }
    for (const auto& f : files) {
      std::string va, vb;
      if (!read_file(a / f, va) || !read_file(b / f, vb)) {
        failure = label + " missing " + f;
        return;
      }
      if (va != vb) {
        failure = label + " differs in " + f;
        return;
      }
    }
  };

  const fs::path work = root / "work";
  twice("gen-source", "gen-data --kind source --classes 4 --len 128 --n 10",
        {"source.tsv"});
  twice("gen-target", "gen-data --kind target --classes 2 --len 64 --n 5",
        {"target.tsv"});

  if (failure.empty()) {
    if (run_cli("gen-data --kind source --classes 4 --len 128 --n 10 --out " +
                work.string()) != 0)
      failure = "workspace gen-data failed";
  }
  const std::string src_tsv = (work / "source.tsv").string();
  twice("train-source",
        "train-source --data " + src_tsv + " --epochs 2 --batch 8",
        {"source.v2sm", "source_risk.json"});

  if (failure.empty()) {
    if (run_cli("train-source --data " + src_tsv +
                " --epochs 2 --batch 8 --out " + work.string()) != 0)
      failure = "workspace train-source failed";
  }
  const std::string model = (work / "source.v2sm").string();
  const std::string tiny_target =
      " --synth-train-n 5 --synth-test-n 5 --epochs 2 --folds 2 --batch 8";
  twice("reprogram", "reprogram --model " + model + tiny_target,
        {"theta.v2st", "history.csv", "metrics.json"});

  if (failure.empty()) {
    if (run_cli("reprogram --model " + model + tiny_target + " --out " +
                work.string()) != 0)
      failure = "workspace reprogram failed";
  }
  const std::string theta = (work / "theta.v2st").string();
  twice("baseline",
        "baseline --model " + model +
            " --synth-train-n 5 --synth-test-n 5 --epochs 1 --batch 8",
        {"baseline_metrics.json"});
  twice("diagnose",
        "diagnose --model " + model + " --theta " + theta + " --source-data " +
            src_tsv +
            " --synth-train-n 5 --synth-test-n 5 --estimator exact --n 8",
        {"diagnose.json"});
  twice("dump-logits",
        "dump-logits --model " + model + " --theta " + theta +
            " --synth-train-n 5 --synth-test-n 5",
        {"logits.csv"});

  const double elapsed = seconds_since(t0);
  Criterion c{10, "every subcommand is byte-identical across reruns"};
  c.ok = failure.empty();
  c.detail = failure.empty()
                 ? "6 subcommands, all primary outputs matched, " +
                       fmt(elapsed) + "s"
                 : failure;
  return c;
}

}  // namespace

int main() {
  std::vector<Criterion> results;
  const auto progress = [](const char* label) {
    std::fprintf(stderr, "[acceptance] %s...\n", label);
  };

  try {
    progress("gradient fidelity");
    results.push_back(check_gradients());
    progress("OT oracles");
    results.push_back(check_ot_oracles());
    progress("estimator ordering");
    results.push_back(check_estimators());
    progress("cloud inequality");
    results.push_back(check_cloud_inequality());
    progress("toy pipeline (source + reprogram)");
    const Pipeline p = run_pipeline();
    results.push_back(check_pipeline(p));
    progress("risk bound");
    results.push_back(check_risk_bound(p));
    progress("training trend across seeds");
    results.push_back(check_training_trend(p));
    progress("label mapping arithmetic");
    results.push_back(check_mapping());
    progress("metrics arithmetic");
    results.push_back(check_metrics());
    progress("CLI determinism");
    results.push_back(check_cli_determinism());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "[acceptance] aborted: %s\n", e.what());
    std::printf("FAIL  acceptance run aborted: %s\n", e.what());
    return 1;
  }

  std::sort(results.begin(), results.end(),
            [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
  int failures = 0;
  for (const auto& r : results) {
    std::printf("%s  criterion %2d  %s -- %s\n", r.ok ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str());
    if (!r.ok) ++failures;
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(results.size()) - failures, results.size());
  return failures == 0 ? 0 : 1;
}
