#include "v2s/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "v2s/errors.hpp"
#include "v2s/rng.hpp"

namespace v2s {

void Dataset::validate() const {
  if (series.empty()) throw EmptyDatasetError("dataset " + name + " is empty");
  if (class_count < 1) throw ShapeError("dataset class_count < 1");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    if (s.values.size() != length)
      throw ShapeError("series " + std::to_string(i) + " length " +
                       std::to_string(s.values.size()) + " != " +
                       std::to_string(length));
    if (s.label < 0 || s.label >= class_count)
      throw ShapeError("series " + std::to_string(i) + " label out of range");
    for (double v : s.values)
      if (!std::isfinite(v))
        throw ShapeError("series " + std::to_string(i) + " has non-finite value");
  }
}

void SynthSpec::validate() const {
  if (class_count < 2) throw ConfigError("synth: class_count must be >= 2");
  if (length < 8) throw ConfigError("synth: length must be >= 8");
  if (samples_per_class < 1)
    throw ConfigError("synth: samples_per_class must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("synth: noise_std must be >= 0");
}

namespace {

std::string basename_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

bool parse_int(const std::string& tok, long long& out) {
  if (tok.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stoll(tok, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == tok.size();
}

bool parse_real(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(tok, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == tok.size();
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      toks.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  toks.push_back(cur);
  return toks;
}

}  // namespace

Dataset load_ucr(const std::string& path, char delimiter) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);

  Dataset ds;
  ds.name = basename_stem(path);
  std::vector<long long> raw_labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    const auto toks = split(line, delimiter);
    if (toks.size() < 2)
      throw FormatError("line " + std::to_string(line_no) +
                        ": need a label and at least one value");
    long long label;
    if (!parse_int(toks[0], label))
      throw ParseError("line " + std::to_string(line_no) +
                       ": bad label token '" + toks[0] + "'");
    TimeSeries s;
    s.values.reserve(toks.size() - 1);
    for (std::size_t i = 1; i < toks.size(); ++i) {
      double v;
      if (!parse_real(toks[i], v))
        throw ParseError("line " + std::to_string(line_no) +
                         ": bad value token '" + toks[i] + "'");
      if (!std::isfinite(v))
        throw ParseError("line " + std::to_string(line_no) +
                         ": non-finite value");
      s.values.push_back(v);
    }
    if (ds.series.empty()) {
      ds.length = s.values.size();
    } else if (s.values.size() != ds.length) {
      throw FormatError("line " + std::to_string(line_no) + ": ragged record (" +
                        std::to_string(s.values.size()) + " values, expected " +
                        std::to_string(ds.length) + ")");
    }
    raw_labels.push_back(label);
    ds.series.push_back(std::move(s));
  }
  if (ds.series.empty()) throw EmptyDatasetError("no records in " + path);

  std::vector<long long> distinct = raw_labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::map<long long, int> remap;
  for (std::size_t i = 0; i < distinct.size(); ++i)
    remap[distinct[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < ds.series.size(); ++i)
    ds.series[i].label = remap[raw_labels[i]];
  ds.class_count = static_cast<int>(distinct.size());
  ds.validate();
  return ds;
}

void save_ucr(const Dataset& ds, const std::string& path, char delimiter) {
  ds.validate();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  char num[64];
  for (const auto& s : ds.series) {
    f << s.label;
    for (double v : s.values) {
      std::snprintf(num, sizeof(num), "%.17g", v);
      f << delimiter << num;
    }
    f << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

Dataset synth_source(const SynthSpec& spec) {
  spec.validate();
  const double base = std::max(1.0, std::floor(static_cast<double>(spec.length) / 64.0));
  if (base * spec.class_count >= static_cast<double>(spec.length) / 2.0)
    throw ConfigError("synth_source: length too small for class count");

  Dataset ds;
  ds.name = "synth-source";
  ds.role = "source";
  ds.length = spec.length;
  ds.class_count = spec.class_count;
  Rng rng(derive_seed(spec.seed, "synth_source"));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int k = 0; k < spec.class_count; ++k) {
    const double cycles = base * (k + 1);
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      TimeSeries ts;
      ts.label = k;
      ts.values.resize(spec.length);
      const double ph = phase(rng);
      for (std::size_t t = 0; t < spec.length; ++t) {
        const double x = 2.0 * std::numbers::pi * cycles *
                             static_cast<double>(t) /
                             static_cast<double>(spec.length) +
                         ph;
        ts.values[t] = std::sin(x) + spec.noise_std * noise(rng);
      }
      ds.series.push_back(std::move(ts));
    }
  }
  ds.validate();
  return ds;
}

Dataset synth_target(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.name = "synth-target";
  ds.role = "target";
  ds.length = spec.length;
  ds.class_count = spec.class_count;
  Rng rng(derive_seed(spec.seed, "synth_target"));
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double len = static_cast<double>(spec.length);
  const double width = len / 20.0;
  for (int k = 0; k < spec.class_count; ++k) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      TimeSeries ts;
      ts.label = k;
      ts.values.assign(spec.length, 0.0);
      for (int b = 0; b <= k; ++b) {
        const double center = len * static_cast<double>(b + 1) /
                                  static_cast<double>(k + 2) +
                              jitter(rng) * len / 64.0;
        const double sign = (b % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t t = 0; t < spec.length; ++t) {
          const double d = (static_cast<double>(t) - center) / width;
          ts.values[t] += sign * std::exp(-0.5 * d * d);
        }
      }
      for (std::size_t t = 0; t < spec.length; ++t)
        ts.values[t] += spec.noise_std * noise(rng);
      ds.series.push_back(std::move(ts));
    }
  }
  ds.validate();
  return ds;
}

FoldSplit split_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("split_kfold: k must be >= 2");
  if (k > ds.size())
    throw ArgumentError("split_kfold: k = " + std::to_string(k) +
                        " exceeds dataset size " + std::to_string(ds.size()));
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, "kfold"));
  std::shuffle(idx.begin(), idx.end(), rng);

  FoldSplit split;
  split.fold_count = k;
  const std::size_t base = ds.size() / k, rem = ds.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t take = base + (f < rem ? 1 : 0);
    split.folds.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                             idx.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
  }
  return split;
}

Dataset normalize(const Dataset& ds, NormalizePolicy policy) {
  if (policy == NormalizePolicy::kNone) return ds;
  Dataset out = ds;
  for (auto& s : out.series) {
    const double n = static_cast<double>(s.values.size());
    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : s.values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (sd < 1e-8) continue;
    for (double& v : s.values) v = (v - mean) / sd;
  }
  return out;
}

}  // namespace v2s
