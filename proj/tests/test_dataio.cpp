#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "v2s/dataio.hpp"
#include "v2s/errors.hpp"

using namespace v2s;

namespace {

std::string write_tmp(const std::string& name, const std::string& content) {
  std::ofstream f(name, std::ios::binary);
  f << content;
  return name;
}

// DFT magnitude peak index over positive frequencies (independent oracle).
std::size_t dft_peak(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::size_t best = 1;
  double best_mag = -1;
  for (std::size_t f = 1; f < n / 2; ++f) {
    std::complex<double> acc{0, 0};
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * M_PI *
                                        static_cast<double>(f * t) /
                                        static_cast<double>(n));
    const double mag = std::abs(acc);
    if (mag > best_mag) {
      best_mag = mag;
      best = f;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("load_ucr basic parse and label remap") {
  const auto path = write_tmp("ucr_basic.tsv", "1\t0.5\t-0.5\n2\t1.0\t0.0\n");
  const Dataset ds = load_ucr(path);
  CHECK(ds.class_count == 2);
  CHECK(ds.length == 2);
  REQUIRE(ds.size() == 2);
  CHECK(ds.series[0].label == 0);  // 1 -> 0
  CHECK(ds.series[1].label == 1);  // 2 -> 1
  CHECK(ds.series[0].values == std::vector<double>{0.5, -0.5});
  std::filesystem::remove(path);
}

TEST_CASE("load_ucr handles CRLF, blank lines, negative labels") {
  const auto path =
      write_tmp("ucr_crlf.tsv", "-5\t1\t2\r\n\r\n7\t3\t4\r\n-5\t0\t1\n");
  const Dataset ds = load_ucr(path);
  CHECK(ds.size() == 3);
  CHECK(ds.class_count == 2);
  CHECK(ds.series[0].label == 0);  // -5 sorts before 7
  CHECK(ds.series[1].label == 1);
  std::filesystem::remove(path);
}

TEST_CASE("load_ucr error taxonomy") {
  const auto ragged = write_tmp("ucr_ragged.tsv", "0\t1\t2\t3\n1\t1\t2\n");
  CHECK_THROWS_AS(load_ucr(ragged), FormatError);
  CHECK_THROWS_WITH_AS(load_ucr(ragged),
                       doctest::Contains("line 2"), FormatError);

  const auto badtok = write_tmp("ucr_badtok.tsv", "0\t1\tpotato\n");
  CHECK_THROWS_AS(load_ucr(badtok), ParseError);

  const auto badlabel = write_tmp("ucr_badlabel.tsv", "zero\t1\t2\n");
  CHECK_THROWS_AS(load_ucr(badlabel), ParseError);

  const auto empty = write_tmp("ucr_empty.tsv", "");
  CHECK_THROWS_AS(load_ucr(empty), EmptyDatasetError);

  const auto short_line = write_tmp("ucr_short.tsv", "3\n");
  CHECK_THROWS_AS(load_ucr(short_line), FormatError);

  CHECK_THROWS_AS(load_ucr("does_not_exist.tsv"), IoError);

  for (const auto* p : {"ucr_ragged.tsv", "ucr_badtok.tsv", "ucr_badlabel.tsv",
                        "ucr_empty.tsv", "ucr_short.tsv"})
    std::filesystem::remove(p);
}

TEST_CASE("load_ucr accepts an ECG200-shaped file") {
  std::string content;
  for (int i = 0; i < 100; ++i) {
    content += std::to_string(i % 2 == 0 ? -1 : 1);
    for (int j = 0; j < 96; ++j)
      content += "\t" + std::to_string(0.01 * j + i * 0.001);
    content += "\n";
  }
  const auto path = write_tmp("ucr_ecg_shape.tsv", content);
  const Dataset ds = load_ucr(path);
  CHECK(ds.size() == 100);
  CHECK(ds.length == 96);
  CHECK(ds.class_count == 2);
  std::filesystem::remove(path);
}

TEST_CASE("save/load round trip preserves values") {
  SynthSpec spec;
  spec.kind = SynthKind::kBump;
  spec.class_count = 3;
  spec.length = 32;
  spec.samples_per_class = 4;
  spec.seed = 5;
  const Dataset ds = synth_target(spec);
  save_ucr(ds, "ucr_rt.tsv");
  const Dataset r = load_ucr("ucr_rt.tsv");
  REQUIRE(r.size() == ds.size());
  CHECK(r.class_count == ds.class_count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(r.series[i].label == ds.series[i].label);
    CHECK(r.series[i].values == ds.series[i].values);  // %.17g is lossless
  }
  std::filesystem::remove("ucr_rt.tsv");
}

TEST_CASE("synth_source counts and determinism") {
  SynthSpec spec;
  spec.kind = SynthKind::kSinusoid;
  spec.class_count = 8;
  spec.length = 512;
  spec.samples_per_class = 200;
  spec.noise_std = 0.1;
  spec.seed = 7;
  const Dataset a = synth_source(spec);
  CHECK(a.size() == 1600);
  CHECK(a.class_count == 8);
  CHECK(a.length == 512);

  spec.noise_std = 0.0;
  const Dataset b = synth_source(spec);
  const Dataset c = synth_source(spec);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(b.series[i].values == c.series[i].values);
}

TEST_CASE("synth_source class frequencies follow the (k+1) ladder") {
  SynthSpec spec;
  spec.kind = SynthKind::kSinusoid;
  spec.class_count = 8;
  spec.length = 512;
  spec.samples_per_class = 4;
  spec.noise_std = 0.0;
  spec.seed = 3;
  const Dataset ds = synth_source(spec);
  // base cycles = floor(512/64) = 8; class k peaks at 8*(k+1).
  for (const auto& s : ds.series) {
    const std::size_t peak = dft_peak(s.values);
    const std::size_t want = 8 * static_cast<std::size_t>(s.label + 1);
    CHECK(peak == want);
  }
}

TEST_CASE("synth_source rejects unresolvable frequencies") {
  SynthSpec spec;
  spec.kind = SynthKind::kSinusoid;
  spec.class_count = 40;  // base 1, 40 cycles > 64/2 fails Nyquist
  spec.length = 64;
  spec.samples_per_class = 1;
  CHECK_THROWS_AS(synth_source(spec), ConfigError);
}

TEST_CASE("synth_target counts, shapes, seed behavior") {
  SynthSpec spec;
  spec.kind = SynthKind::kBump;
  spec.class_count = 2;
  spec.length = 64;
  spec.samples_per_class = 30;
  spec.seed = 1;
  const Dataset a = synth_target(spec);
  CHECK(a.size() == 60);
  CHECK(a.class_count == 2);
  CHECK(a.length == 64);

  spec.seed = 2;
  const Dataset b = synth_target(spec);
  CHECK(b.size() == a.size());
  CHECK(b.length == a.length);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.series[i].values != b.series[i].values) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("synth_target classes separate under nearest centroid") {
  SynthSpec spec;
  spec.kind = SynthKind::kBump;
  spec.class_count = 2;
  spec.length = 64;
  spec.samples_per_class = 100;
  spec.noise_std = 0.1;
  spec.seed = 9;
  const Dataset ds = synth_target(spec);

  // Leave-nothing-out centroid classifier; independent of the library.
  std::vector<std::vector<double>> centroid(2, std::vector<double>(64, 0.0));
  std::vector<std::size_t> count(2, 0);
  for (const auto& s : ds.series) {
    const auto l = static_cast<std::size_t>(s.label);
    for (std::size_t i = 0; i < 64; ++i) centroid[l][i] += s.values[i];
    ++count[l];
  }
  for (std::size_t l = 0; l < 2; ++l)
    for (auto& v : centroid[l]) v /= static_cast<double>(count[l]);
  std::size_t hits = 0;
  for (const auto& s : ds.series) {
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      d0 += (s.values[i] - centroid[0][i]) * (s.values[i] - centroid[0][i]);
      d1 += (s.values[i] - centroid[1][i]) * (s.values[i] - centroid[1][i]);
    }
    const int pred = d0 <= d1 ? 0 : 1;
    hits += pred == s.label ? 1 : 0;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(ds.size()) > 0.9);
}

TEST_CASE("synth spec validation") {
  SynthSpec spec;
  spec.class_count = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.class_count = 2;
  spec.length = 4;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.length = 64;
  spec.noise_std = -0.1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.noise_std = 0;
  spec.samples_per_class = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("split_kfold partitions with balanced sizes") {
  SynthSpec spec;
  spec.kind = SynthKind::kBump;
  spec.class_count = 2;
  spec.length = 16;
  spec.samples_per_class = 50;
  const Dataset ds100 = synth_target(spec);

  const FoldSplit even = split_kfold(ds100, 10, 4);
  REQUIRE(even.folds.size() == 10);
  for (const auto& f : even.folds) CHECK(f.size() == 10);

  Dataset ds103 = ds100;  // 103-sample variant, both classes present
  ds103.series.resize(0);
  for (std::size_t i = 0; i < 103; ++i) {
    TimeSeries s;
    s.values.assign(16, 0.01 * static_cast<double>(i));
    s.label = static_cast<int>(i % 2);
    ds103.series.push_back(std::move(s));
  }
  const FoldSplit odd = split_kfold(ds103, 10, 4);
  std::vector<std::size_t> sizes;
  for (const auto& f : odd.folds) sizes.push_back(f.size());
  CHECK(std::count(sizes.begin(), sizes.end(), 11) == 3);
  CHECK(std::count(sizes.begin(), sizes.end(), 10) == 7);

  // Partition: disjoint and covering.
  std::set<std::size_t> seen;
  for (const auto& f : odd.folds)
    for (std::size_t i : f) {
      CHECK(seen.insert(i).second);
      CHECK(i < 103);
    }
  CHECK(seen.size() == 103);

  const FoldSplit again = split_kfold(ds103, 10, 4);
  CHECK(again.folds == odd.folds);
  const FoldSplit other = split_kfold(ds103, 10, 5);
  CHECK(other.folds != odd.folds);
}

TEST_CASE("split_kfold argument errors") {
  SynthSpec spec;
  spec.kind = SynthKind::kBump;
  spec.class_count = 2;
  spec.length = 16;
  spec.samples_per_class = 3;
  const Dataset ds = synth_target(spec);  // n=6
  CHECK_THROWS_AS(split_kfold(ds, 1, 0), ArgumentError);
  CHECK_THROWS_AS(split_kfold(ds, 7, 0), ArgumentError);
  CHECK_NOTHROW(split_kfold(ds, 6, 0));
}

TEST_CASE("normalize policies") {
  Dataset ds;
  ds.name = "norm";
  ds.length = 3;
  ds.class_count = 2;
  ds.role = "target";
  ds.series = {{{1.0, 2.0, 3.0}, 0}, {{5.0, 5.0, 5.0}, 1}};

  const Dataset id = normalize(ds, NormalizePolicy::kNone);
  CHECK(id.series[0].values == ds.series[0].values);

  const Dataset z = normalize(ds, NormalizePolicy::kPerSeriesZ);
  const auto& v = z.series[0].values;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 3.0;
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= 3.0;
  CHECK(std::fabs(mean) <= 1e-12);
  CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-12);
  CHECK(z.series[1].values == std::vector<double>{5.0, 5.0, 5.0});  // guard
  CHECK(z.series[0].label == 0);
  CHECK(z.series[1].label == 1);
}

TEST_CASE("dataset validate catches inconsistencies") {
  Dataset ds;
  ds.name = "bad";
  ds.length = 2;
  ds.class_count = 2;
  ds.role = "target";
  SUBCASE("empty") { CHECK_THROWS_AS(ds.validate(), EmptyDatasetError); }
  SUBCASE("ragged member") {
    ds.series = {{{1.0, 2.0}, 0}, {{1.0}, 1}};
    CHECK_THROWS_AS(ds.validate(), ShapeError);
  }
  SUBCASE("label out of range") {
    ds.series = {{{1.0, 2.0}, 0}, {{1.0, 2.0}, 2}};
    CHECK_THROWS_AS(ds.validate(), ShapeError);
  }
  SUBCASE("non-finite value") {
    ds.series = {{{1.0, std::nan("")}, 0}, {{1.0, 2.0}, 1}};
    CHECK_THROWS_AS(ds.validate(), ShapeError);
  }
}
