// v2s: reprogram a frozen audio-style classifier for new time-series tasks.
//
// Subcommands: gen-data, train-source, reprogram, baseline, diagnose,
// dump-logits. Exit codes: 0 success, 1 validation error, 2 runtime error,
// 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "v2s/alignment.hpp"
#include "v2s/dataio.hpp"
#include "v2s/errors.hpp"
#include "v2s/reprogram.hpp"
#include "v2s/rng.hpp"
#include "v2s/source_model.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw v2s::IoError("cannot open for writing: " + path);
  f << content;
  if (!f) throw v2s::IoError("write failed: " + path);
}

std::string out_path(const std::string& out_dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw v2s::IoError("cannot create output dir: " + out_dir);
  return (fs::path(out_dir) / name).string();
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw v2s::ArgumentError("bad list element: '" + tok + "'");
    }
  }
  if (out.empty()) throw v2s::ArgumentError("empty list: '" + s + "'");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(s)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw v2s::ArgumentError("expected non-negative integers: '" + s + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

v2s::NormalizePolicy parse_normalize(const std::string& s) {
  if (s == "none") return v2s::NormalizePolicy::kNone;
  if (s == "zscore") return v2s::NormalizePolicy::kPerSeriesZ;
  throw v2s::ArgumentError("unknown normalize policy: " + s);
}

// Shared synthetic defaults: an 8-class sinusoid source task and a 2-class
// bump target task, small enough for CPU-only runs.
v2s::SynthSpec toy_source_spec(std::uint64_t seed) {
  v2s::SynthSpec spec;
  spec.kind = v2s::SynthKind::kSinusoid;
  spec.class_count = 8;
  spec.length = 512;
  spec.samples_per_class = 200;
  spec.noise_std = 0.1;
  spec.seed = seed;
  return spec;
}

// Stand-in source data synthesized after the fact must run through an
// already-trained model, so it has to adopt that model's geometry.
v2s::SynthSpec matched_source_spec(const v2s::SourceModel& model,
                                   std::uint64_t seed) {
  v2s::SynthSpec spec = toy_source_spec(seed);
  spec.class_count = model.config().class_count;
  spec.length = model.config().input_len;
  return spec;
}

v2s::SynthSpec toy_target_spec(std::uint64_t seed, std::size_t per_class) {
  v2s::SynthSpec spec;
  spec.kind = v2s::SynthKind::kBump;
  spec.class_count = 2;
  spec.length = 64;
  spec.samples_per_class = per_class;
  spec.noise_std = 0.05;
  spec.seed = seed;
  return spec;
}

struct TargetDataOpts {
  std::string data_path;
  std::string test_path;
  std::string normalize = "none";
  std::size_t synth_train_per_class = 30;
  std::size_t synth_test_per_class = 50;
};

void add_target_data_flags(CLI::App* cmd, TargetDataOpts& opts) {
  cmd->add_option("--data", opts.data_path,
                  "target training set (UCR text); synthesized when omitted");
  cmd->add_option("--test", opts.test_path,
                  "target test set (UCR text); synthesized when omitted");
  cmd->add_option("--normalize", opts.normalize,
                  "per-series normalization: none|zscore")
      ->check(CLI::IsMember({"none", "zscore"}));
  cmd->add_option("--synth-train-n", opts.synth_train_per_class,
                  "synthetic train samples per class (when --data omitted)");
  cmd->add_option("--synth-test-n", opts.synth_test_per_class,
                  "synthetic test samples per class (when --test omitted)");
}

std::pair<v2s::Dataset, v2s::Dataset> load_target_pair(
    const TargetDataOpts& opts, std::uint64_t seed) {
  const auto policy = parse_normalize(opts.normalize);
  v2s::Dataset train, test;
  if (opts.data_path.empty()) {
    train = v2s::synth_target(
        toy_target_spec(v2s::derive_seed(seed, "synth_target"),
                        opts.synth_train_per_class));
  } else {
    train = v2s::normalize(v2s::load_ucr(opts.data_path), policy);
  }
  if (opts.test_path.empty()) {
    if (!opts.data_path.empty())
      throw v2s::ConfigError("--data given without --test");
    test = v2s::synth_target(
        toy_target_spec(v2s::derive_seed(seed, "synth_target_test"),
                        opts.synth_test_per_class));
  } else {
    test = v2s::normalize(v2s::load_ucr(opts.test_path), policy);
  }
  return {std::move(train), std::move(test)};
}

void check_theta_against(const v2s::SourceModel& model,
                         const v2s::ThetaCheckpoint& ckpt,
                         const v2s::Dataset& target) {
  if (ckpt.source_checksum != model.checksum())
    std::cerr << "warning: theta checkpoint was trained against a different "
                 "source model (checksum mismatch)\n";
  if (ckpt.plan.d_source != model.config().input_len)
    throw v2s::ConfigError("theta input length does not match the model");
  if (ckpt.mapping.source_classes != model.config().class_count)
    throw v2s::ConfigError("theta mapping does not match the model classes");
  if (ckpt.plan.d_target != target.length)
    throw v2s::ConfigError("target length does not match the theta plan");
  if (ckpt.mapping.target_classes != target.class_count)
    throw v2s::ConfigError("target classes do not match the theta mapping");
}

json metrics_json(const v2s::MetricsReport& rep) {
  json j;
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back(json{{"name", r.name},
                        {"accuracy", r.accuracy},
                        {"class_count", r.class_count}});
  j["rows"] = rows;
  j["pce"] = rep.pce;
  j["mpce"] = rep.mpce;
  j["mean_acc"] = rep.mean_acc;
  j["median_acc"] = rep.median_acc;
  return j;
}

int cmd_gen_data(const std::string& kind, int classes, std::size_t len,
                 std::size_t n_per_class, double noise, std::uint64_t seed,
                 const std::string& out_dir, const std::string& name) {
  v2s::SynthSpec spec;
  spec.kind =
      kind == "source" ? v2s::SynthKind::kSinusoid : v2s::SynthKind::kBump;
  spec.class_count = classes;
  spec.length = len;
  spec.samples_per_class = n_per_class;
  spec.noise_std = noise;
  spec.seed = seed;
  const v2s::Dataset ds =
      kind == "source" ? v2s::synth_source(spec) : v2s::synth_target(spec);
  const std::string file =
      out_path(out_dir, name.empty() ? kind + ".tsv" : name);
  v2s::save_ucr(ds, file);
  std::cout << file << ": " << ds.size() << " series, length " << ds.length
            << ", " << ds.class_count << " classes\n";
  return 0;
}

int cmd_train_source(const std::string& data_path, const std::string& norm,
                     v2s::SourceArchConfig arch, v2s::SourceTrainConfig train,
                     std::uint64_t seed, const std::string& out_dir) {
  v2s::Dataset data;
  if (data_path.empty()) {
    data = v2s::synth_source(toy_source_spec(v2s::derive_seed(seed, "synth_source")));
  } else {
    data = v2s::normalize(v2s::load_ucr(data_path), parse_normalize(norm));
  }
  arch.class_count = data.class_count;
  arch.input_len = data.length;
  arch.seed = seed;
  train.seed = seed;

  v2s::SourceModel model = v2s::SourceModel::build(arch);
  const v2s::SourceTrainResult result = v2s::train_source(model, data, train);

  const std::string model_file = out_path(out_dir, "source.v2sm");
  v2s::save_model(model, model_file, result.risk.epsilon_s,
                  result.held_out_accuracy);

  json j;
  j["epsilon_s"] = result.risk.epsilon_s;
  j["n_eval"] = result.risk.n_eval;
  j["dataset"] = result.risk.dataset;
  j["held_out_accuracy"] = result.held_out_accuracy;
  j["n_train"] = result.n_train;
  j["params"] = model.param_count();
  j["checksum"] = model.checksum();
  write_text(out_path(out_dir, "source_risk.json"), j.dump(2) + "\n");

  std::cout << "epsilon_s " << fmt17(result.risk.epsilon_s)
            << "  held-out accuracy " << fmt17(result.held_out_accuracy)
            << "\n";
  return 0;
}

int cmd_reprogram(const std::string& model_path, const TargetDataOpts& data,
                  v2s::TrainConfig cfg, std::uint64_t seed,
                  const std::string& out_dir) {
  const v2s::SourceModel model = v2s::load_source_model(model_path);
  cfg.seed = seed;
  auto [train, test] = load_target_pair(data, seed);

  std::optional<v2s::Dataset> source;
  if (cfg.swd_trace)
    source = v2s::synth_source(
        matched_source_spec(model, v2s::derive_seed(seed, "synth_source")));
  const v2s::ReprogramResult result = v2s::train_reprogram(
      model, train, test, cfg, source ? &*source : nullptr);

  if (result.mapping.small_sets_warning)
    std::cerr << "warning: fewer than 3 source classes per target class; "
                 "aggregated scores may be noisy\n";

  v2s::ThetaCheckpoint ckpt;
  ckpt.plan = result.best_plan;
  ckpt.mapping = result.mapping;
  ckpt.source_checksum = result.source_checksum_before;
  v2s::save_theta(ckpt, out_path(out_dir, "theta.v2st"));
  v2s::write_history_csv(result.history, out_path(out_dir, "history.csv"));

  const v2s::MetricsReport rep = v2s::metrics(
      {{train.name, result.test_accuracy, train.class_count}});
  json j = metrics_json(rep);
  j["test_accuracy"] = result.test_accuracy;
  j["best_m"] = result.best_plan.m;
  j["best_dropout"] = result.best_plan.dropout;
  j["best_fold"] = result.best_fold;
  j["best_mean_val_loss"] = result.best_mean_val_loss;
  j["source_checksum_unchanged"] =
      result.source_checksum_before == result.source_checksum_after;
  json grid = json::array();
  for (const auto& cell : result.grid) {
    json g{{"m", cell.m}, {"dropout", cell.dropout},
           {"feasible", cell.feasible}};
    if (cell.feasible) {
      g["mean_val_loss"] = cell.mean_val_loss;
      g["mean_val_acc"] = cell.mean_val_acc;
    } else {
      g["note"] = cell.note;
    }
    grid.push_back(std::move(g));
  }
  j["grid"] = grid;
  json groups = json::array();
  for (const auto& g : result.mapping.groups) groups.push_back(g);
  j["label_mapping"] = groups;
  write_text(out_path(out_dir, "metrics.json"), j.dump(2) + "\n");

  std::cout << "test accuracy " << fmt17(result.test_accuracy) << "  (m="
            << result.best_plan.m << ", dropout "
            << fmt17(result.best_plan.dropout) << ")\n";
  return 0;
}

int cmd_baseline(const std::string& model_path, const TargetDataOpts& data,
                 v2s::BaselineConfig cfg, std::uint64_t seed,
                 const std::string& out_dir) {
  const v2s::SourceModel model = v2s::load_source_model(model_path);
  cfg.seed = seed;
  auto [train, test] = load_target_pair(data, seed);
  const std::uint64_t before = model.checksum();
  const v2s::BaselineResult result =
      v2s::finetune_baseline(model, train, test, cfg);

  const v2s::MetricsReport rep = v2s::metrics(
      {{train.name, result.test_accuracy, train.class_count}});
  json j = metrics_json(rep);
  j["test_accuracy"] = result.test_accuracy;
  j["original_checksum_unchanged"] = model.checksum() == before;
  write_text(out_path(out_dir, "baseline_metrics.json"), j.dump(2) + "\n");

  std::cout << "baseline test accuracy " << fmt17(result.test_accuracy)
            << "\n";
  return 0;
}

int cmd_diagnose(const std::string& model_path, const std::string& theta_path,
                 const std::string& source_path, const TargetDataOpts& data,
                 const std::string& estimator, std::size_t n, double slack,
                 std::size_t swd_projections, const std::string& history_path,
                 std::uint64_t seed, const std::string& out_dir) {
  const v2s::SourceModel model = v2s::load_source_model(model_path);
  const v2s::ThetaCheckpoint ckpt = v2s::load_theta(theta_path);

  v2s::Dataset source;
  if (source_path.empty()) {
    source = v2s::synth_source(
        matched_source_spec(model, v2s::derive_seed(seed, "synth_source")));
  } else {
    source = v2s::load_ucr(source_path);
  }
  auto [target, target_test] = load_target_pair(data, seed);
  (void)target_test;
  check_theta_against(model, ckpt, target);

  v2s::SourceRiskEstimate risk;
  const double stored = v2s::model_file_epsilon(model_path);
  if (stored >= 0.0) {
    risk.epsilon_s = stored;
    risk.dataset = "stored-at-train-time";
  } else {
    risk = v2s::source_risk(model, source);
  }

  const auto est = estimator == "exact" ? v2s::W1Estimator::kExactOracle
                                        : v2s::W1Estimator::kSwdProxy;
  const v2s::RiskBoundReport report = v2s::theorem1_report(
      risk, model, ckpt.plan, ckpt.mapping, source, target, est, n, slack,
      v2s::derive_seed(seed, "diagnose"), swd_projections);

  json j;
  j["epsilon_s"] = report.epsilon_s;
  j["k"] = report.k;
  j["w1"] = report.w1;
  j["estimator"] = report.estimator;
  j["bound"] = report.bound;
  j["measured_target_risk"] = report.measured_target_risk;
  j["satisfied"] = report.satisfied;
  j["slack"] = report.slack;
  j["n"] = report.n;
  j["assumption2_mismatch"] = report.assumption2_mismatch;

  if (!history_path.empty()) {
    // Pass through the per-epoch SWD column of a reprogram --swd-trace run.
    std::ifstream f(history_path);
    if (!f) throw v2s::IoError("cannot open: " + history_path);
    std::string line;
    json trace = json::array();
    bool first = true;
    while (std::getline(f, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (first) {
        first = false;
        continue;
      }
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() < 5 || cells[4].empty()) continue;
      try {
        trace.push_back(json{{"epoch", std::stoul(cells[0])},
                             {"swd", std::stod(cells[4])}});
      } catch (const std::exception&) {
        throw v2s::ParseError("bad history row: " + line);
      }
    }
    j["swd_trace"] = trace;
  }
  write_text(out_path(out_dir, "diagnose.json"), j.dump(2) + "\n");

  std::cout << "bound " << fmt17(report.bound) << "  measured "
            << fmt17(report.measured_target_risk) << "  satisfied "
            << (report.satisfied ? "true" : "false") << "\n";
  return 0;
}

int cmd_dump_logits(const std::string& model_path,
                    const std::string& theta_path, const TargetDataOpts& data,
                    bool before, std::uint64_t seed,
                    const std::string& out_dir) {
  const v2s::SourceModel model = v2s::load_source_model(model_path);
  v2s::ThetaCheckpoint ckpt = v2s::load_theta(theta_path);
  auto [target, target_test] = load_target_pair(data, seed);
  (void)target_test;
  check_theta_against(model, ckpt, target);
  if (before)
    std::fill(ckpt.plan.theta.begin(), ckpt.plan.theta.end(), 0.0);

  std::string csv;
  const std::size_t chunk = 64;
  std::vector<std::size_t> idx(target.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const std::size_t stop = std::min(idx.size(), start + chunk);
    const std::vector<std::size_t> part(
        idx.begin() + static_cast<std::ptrdiff_t>(start),
        idx.begin() + static_cast<std::ptrdiff_t>(stop));
    const v2s::Tensor z =
        model.logits(v2s::reprogrammed_batch(ckpt.plan, target, part));
    for (std::size_t i = 0; i < part.size(); ++i) {
      csv += std::to_string(target.series[part[i]].label);
      for (std::size_t d = 0; d < z.dim(1); ++d)
        csv += "," + fmt17(z.at(i, d));
      csv += "\n";
    }
  }
  write_text(out_path(out_dir, "logits.csv"), csv);
  std::cout << "wrote " << target.size() << " rows\n";
  return 0;
}

// Flat key=value config support: the file's pairs become --key=value tokens
// inserted just after the subcommand, so explicit flags (parsed later,
// take-last) override it.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::string config_file;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size())
        throw v2s::ArgumentError("--config needs a file path");
      config_file = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_file = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  if (config_file.empty()) return args;

  std::ifstream f(config_file);
  if (!f) throw v2s::IoError("cannot open config: " + config_file);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    const std::string t = strip(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw v2s::ParseError("config line " + std::to_string(line_no) +
                            ": expected key=value");
    const std::string key = strip(t.substr(0, eq));
    const std::string value = strip(t.substr(eq + 1));
    if (key.empty())
      throw v2s::ParseError("config line " + std::to_string(line_no) +
                            ": empty key");
    tokens.push_back("--" + key + "=" + value);
  }

  // Insert after the subcommand name (the first non-flag token).
  auto pos = args.begin();
  while (pos != args.end() && !pos->empty() && (*pos)[0] == '-') ++pos;
  if (pos != args.end()) ++pos;
  args.insert(pos, tokens.begin(), tokens.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voice-to-series reprogramming toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::uint64_t seed = 1;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "master seed; all stages derive from it");
  app.add_option("--out", out_dir, "output directory");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  std::string gd_kind;
  int gd_classes = 8;
  std::size_t gd_len = 512, gd_n = 200;
  double gd_noise = 0.1;
  std::string gd_name;
  gen->add_option("--kind", gd_kind, "source (sinusoids) | target (bumps)")
      ->required()
      ->check(CLI::IsMember({"source", "target"}));
  gen->add_option("--classes", gd_classes, "number of classes");
  gen->add_option("--len", gd_len, "series length");
  gen->add_option("--n", gd_n, "samples per class");
  gen->add_option("--noise", gd_noise, "noise standard deviation");
  gen->add_option("--name", gd_name, "output file name (default <kind>.tsv)");

  // train-source
  auto* ts = app.add_subcommand("train-source",
                                "train and freeze the source classifier");
  std::string ts_data, ts_norm = "none";
  v2s::SourceArchConfig ts_arch;
  v2s::SourceTrainConfig ts_train;
  ts->add_option("--data", ts_data,
                 "source training set (UCR text); synthesized when omitted");
  ts->add_option("--normalize", ts_norm, "none|zscore")
      ->check(CLI::IsMember({"none", "zscore"}));
  ts->add_option("--epochs", ts_train.epochs, "training epochs");
  ts->add_option("--lr", ts_train.lr, "Adam learning rate");
  ts->add_option("--batch", ts_train.batch, "batch size");
  ts->add_option("--conv1-ch", ts_arch.conv1_ch, "first conv width");
  ts->add_option("--conv2-ch", ts_arch.conv2_ch, "second conv width");
  ts->add_option("--att-dim", ts_arch.att_dim, "attention dimension");
  ts->add_option("--kernel", ts_arch.kernel, "conv kernel size");
  ts->add_option("--stride", ts_arch.stride, "conv stride");

  // reprogram
  auto* rp = app.add_subcommand("reprogram",
                                "train the input transform on a frozen model");
  std::string rp_model;
  TargetDataOpts rp_data;
  v2s::TrainConfig rp_cfg;
  std::string rp_m_grid = "1", rp_drop_grid = "0";
  rp->add_option("--model", rp_model, "source model file (.v2sm)")->required();
  add_target_data_flags(rp, rp_data);
  rp->add_option("--epochs", rp_cfg.epochs, "epochs per fold");
  rp->add_option("--lr", rp_cfg.lr, "Adam learning rate");
  rp->add_option("--batch", rp_cfg.batch, "batch size");
  rp->add_option("--weight-decay", rp_cfg.weight_decay, "L2 penalty on theta");
  rp->add_option("--m-grid", rp_m_grid,
                 "comma-separated replication counts (full sweep: 1..10)");
  rp->add_option("--dropout-grid", rp_drop_grid,
                 "comma-separated dropout rates (full sweep: 0,0.1,...,0.4)");
  rp->add_option("--folds", rp_cfg.folds, "validation folds");
  rp->add_flag("--swd-trace", rp_cfg.swd_trace,
               "record per-epoch sliced Wasserstein distance to the source");
  rp->add_option("--swd-projections", rp_cfg.swd_projections,
                 "projections per SWD estimate");
  rp->add_option("--swd-sample", rp_cfg.swd_sample,
                 "per-side sample cap for the SWD trace");

  // baseline
  auto* bl = app.add_subcommand(
      "baseline", "fine-tune all weights on zero-padded target data");
  std::string bl_model;
  TargetDataOpts bl_data;
  v2s::BaselineConfig bl_cfg;
  bl->add_option("--model", bl_model, "source model file (.v2sm)")->required();
  add_target_data_flags(bl, bl_data);
  bl->add_option("--epochs", bl_cfg.epochs, "training epochs");
  bl->add_option("--lr", bl_cfg.lr, "Adam learning rate");
  bl->add_option("--batch", bl_cfg.batch, "batch size");

  // diagnose
  auto* dg = app.add_subcommand(
      "diagnose", "evaluate the target-risk bound for a reprogrammed model");
  std::string dg_model, dg_theta, dg_source, dg_estimator = "exact";
  std::string dg_history;
  TargetDataOpts dg_data;
  std::size_t dg_n = 64, dg_proj = 1000;
  double dg_slack = 0.05;
  dg->add_option("--model", dg_model, "source model file (.v2sm)")->required();
  dg->add_option("--theta", dg_theta, "theta checkpoint (.v2st)")->required();
  dg->add_option("--source-data", dg_source,
                 "source dataset (UCR text); synthesized when omitted");
  add_target_data_flags(dg, dg_data);
  dg->add_option("--estimator", dg_estimator, "exact|swd")
      ->check(CLI::IsMember({"exact", "swd"}));
  dg->add_option("--n", dg_n, "per-side samples for the alignment estimate");
  dg->add_option("--slack", dg_slack, "tolerance added to the bound");
  dg->add_option("--swd-projections", dg_proj, "projections (swd estimator)");
  dg->add_option("--history", dg_history,
                 "history.csv from a --swd-trace run; its SWD column is "
                 "embedded in the report");

  // dump-logits
  auto* dl = app.add_subcommand("dump-logits",
                                "export logit rows for target samples");
  std::string dl_model, dl_theta;
  TargetDataOpts dl_data;
  bool dl_before = false;
  dl->add_option("--model", dl_model, "source model file (.v2sm)")->required();
  dl->add_option("--theta", dl_theta, "theta checkpoint (.v2st)")->required();
  add_target_data_flags(dl, dl_data);
  dl->add_flag("--before", dl_before,
               "use the zeroed transform (before reprogramming)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config(std::move(args));
    // CLI11 consumes reversed argv-style vectors.
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));

    if (gen->parsed())
      return cmd_gen_data(gd_kind, gd_classes, gd_len, gd_n, gd_noise, seed,
                          out_dir, gd_name);
    if (ts->parsed())
      return cmd_train_source(ts_data, ts_norm, ts_arch, ts_train, seed,
                              out_dir);
    if (rp->parsed()) {
      rp_cfg.m_grid = parse_size_list(rp_m_grid);
      rp_cfg.dropout_grid = parse_double_list(rp_drop_grid);
      return cmd_reprogram(rp_model, rp_data, rp_cfg, seed, out_dir);
    }
    if (bl->parsed()) return cmd_baseline(bl_model, bl_data, bl_cfg, seed, out_dir);
    if (dg->parsed())
      return cmd_diagnose(dg_model, dg_theta, dg_source, dg_data, dg_estimator,
                          dg_n, dg_slack, dg_proj, dg_history, seed, out_dir);
    if (dl->parsed())
      return cmd_dump_logits(dl_model, dl_theta, dl_data, dl_before, seed,
                             out_dir);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 1;
  } catch (const v2s::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const v2s::RuntimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const v2s::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
