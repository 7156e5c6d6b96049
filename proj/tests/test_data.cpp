#include <cmath>

#include "doctest.h"
#include "poolid/data.hpp"
#include "poolid/errors.hpp"
#include "poolid/rng.hpp"
#include "test_util.hpp"

using namespace poolid;
using Eigen::MatrixXd;

namespace {

SignalFrame make_frame(Eigen::Index n, Eigen::Index n_in, Eigen::Index n_out,
                       std::uint64_t seed, UnixTime start = 0,
                       std::int64_t period = 600) {
  SignalFrame f;
  f.start_time = start;
  f.sample_period = period;
  for (Eigen::Index c = 0; c < n_in; ++c) {
    f.channels.push_back({"u" + std::to_string(c), "", ChannelRole::kInput});
  }
  for (Eigen::Index c = 0; c < n_out; ++c) {
    f.channels.push_back({"y" + std::to_string(c), "", ChannelRole::kOutput});
  }
  f.values.resize(n, n_in + n_out);
  Rng rng(seed);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
      f.values(r, c) = rng.normal();
    }
  }
  return f;
}

}  // namespace

TEST_CASE("clean_faults leaves smooth clean frames untouched") {
  // A smooth signal has no robust-sigma outliers, so cleaning is the
  // identity (a white-noise frame can trip the rolling-MAD detector).
  SignalFrame f = make_frame(200, 2, 1, 1);
  for (Eigen::Index r = 0; r < f.n_samples(); ++r) {
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
      f.values(r, c) = std::sin(0.05 * (double)r + (double)c);
    }
  }
  CleanOutcome out = clean_faults(f);
  REQUIRE(out.ok());
  CHECK(out.frame->values == f.values);
}

TEST_CASE("clean_faults interpolates short gaps linearly") {
  // Ramp values so the neighbors 10 and 12 are in-distribution.
  SignalFrame f = make_frame(50, 1, 1, 2);
  for (Eigen::Index r = 0; r < 50; ++r) f.values.row(r).setConstant((double)r);
  f.values(11, 0) = std::nan("");
  CleanOutcome out = clean_faults(f);
  REQUIRE(out.ok());
  CHECK(out.frame->values(11, 0) == doctest::Approx(11.0).epsilon(1e-12));
  CHECK_FALSE(out.frame->has_missing());
}

TEST_CASE("clean_faults reports long gaps for splitting") {
  SignalFrame f = make_frame(100, 1, 1, 3);
  for (Eigen::Index r = 40; r < 50; ++r) {
    f.values.row(r).setConstant(std::nan(""));
  }
  CleanOutcome out = clean_faults(f, /*max_gap=*/5);
  CHECK_FALSE(out.ok());
  REQUIRE(out.long_gaps.size() == 1);
  CHECK(out.long_gaps[0].first == 40);
  CHECK(out.long_gaps[0].second == 50);

  auto pieces = clean_and_split(f, 5);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].n_samples() == 40);
  CHECK(pieces[1].n_samples() == 50);
  CHECK(pieces[1].start_time == f.time_at(50));
}

TEST_CASE("clean_faults replaces an injected 50-sigma spike") {
  SignalFrame f = make_frame(400, 1, 1, 4);
  double spike = 50.0;
  f.values(200, 0) = spike;
  CleanOutcome out = clean_faults(f);
  REQUIRE(out.ok());
  // Replaced value must be near the local median, not the spike.
  CHECK(std::abs(out.frame->values(200, 0)) < 1.5);
}

TEST_CASE("cleaning is idempotent") {
  SignalFrame f = make_frame(300, 2, 1, 5);
  f.values(100, 0) = 60.0;  // spike
  f.values(150, 1) = std::nan("");
  SignalFrame once = *clean_faults(f).frame;
  SignalFrame twice = *clean_faults(once).frame;
  CHECK(once.values == twice.values);
}

TEST_CASE("resample_moving_average basics") {
  SignalFrame f = make_frame(25, 1, 1, 6);

  SUBCASE("factor 1 is the identity") {
    SignalFrame g = resample_moving_average(f, 1);
    CHECK(g.values == f.values);
    CHECK(g.sample_period == f.sample_period);
  }

  SUBCASE("ramp 0..9 with factor 10 gives 4.5") {
    SignalFrame r = make_frame(10, 1, 0, 0);
    for (Eigen::Index i = 0; i < 10; ++i) r.values(i, 0) = (double)i;
    SignalFrame g = resample_moving_average(r, 10);
    REQUIRE(g.n_samples() == 1);
    CHECK(g.values(0, 0) == doctest::Approx(4.5).epsilon(1e-15));
    CHECK(g.sample_period == 6000);
  }

  SUBCASE("constant signal stays constant, remainder dropped") {
    SignalFrame c = make_frame(25, 1, 0, 0);
    c.values.setConstant(3.25);
    SignalFrame g = resample_moving_average(c, 10);
    REQUIRE(g.n_samples() == 2);
    CHECK(g.values(0, 0) == 3.25);
    CHECK(g.values(1, 0) == 3.25);
  }

  SUBCASE("factor < 1 is a config error") {
    CHECK_THROWS_AS(resample_moving_average(f, 0), ConfigError);
  }

  SUBCASE("resampling is linear") {
    SignalFrame a = make_frame(40, 2, 1, 7);
    SignalFrame b = make_frame(40, 2, 1, 8);
    SignalFrame sum = a;
    sum.values = 2.0 * a.values + 3.0 * b.values;
    SignalFrame lhs = resample_moving_average(sum, 4);
    MatrixXd rhs = 2.0 * resample_moving_average(a, 4).values +
                   3.0 * resample_moving_average(b, 4).values;
    CHECK((lhs.values - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("normalization statistics and round trip") {
  SUBCASE("two-point channel gives mean 1 scale 1") {
    SignalFrame f = make_frame(2, 1, 0, 0);
    f.values(0, 0) = 0.0;
    f.values(1, 0) = 2.0;
    NormalizationStats s = fit_normalization({f});
    CHECK(s.mean(0) == doctest::Approx(1.0));
    CHECK(s.scale(0) == doctest::Approx(1.0));
  }

  SUBCASE("constant channel scale is floored") {
    SignalFrame f = make_frame(10, 1, 0, 0);
    f.values.setConstant(42.0);
    NormalizationStats s = fit_normalization({f});
    CHECK(s.scale(0) == NormalizationStats::kMinScale);
  }

  SUBCASE("applied to its own fit: mean 0 std 1") {
    SignalFrame f = make_frame(500, 3, 2, 9);
    NormalizationStats s = fit_normalization({f});
    SignalFrame z = apply_normalization(f, s);
    for (Eigen::Index c = 0; c < z.values.cols(); ++c) {
      CHECK(std::abs(z.values.col(c).mean()) < 1e-12);
      // Population standard deviation (matches the {0, 2} -> scale 1 fixture).
      double var = (z.values.col(c).array() - z.values.col(c).mean())
                       .square()
                       .mean();
      CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("round trip within 1e-12") {
    SignalFrame f = make_frame(200, 4, 2, 10);
    f.values *= 37.5;
    f.values.array() += 250.0;
    NormalizationStats s = fit_normalization({f});
    SignalFrame back = invert_normalization(apply_normalization(f, s), s);
    CHECK((back.values - f.values).cwiseAbs().maxCoeff() <= 1e-12 * 250.0);
  }

  SUBCASE("channel-count mismatch throws") {
    SignalFrame f = make_frame(20, 2, 1, 11);
    NormalizationStats s = fit_normalization({make_frame(20, 1, 1, 12)});
    CHECK_THROWS_AS(apply_normalization(f, s), DataError);
  }

  SUBCASE("empty input throws") {
    CHECK_THROWS_AS(fit_normalization({}), DataError);
  }
}

TEST_CASE("anchor window construction") {
  const Eigen::Index past_len = 4, P = 3;

  SUBCASE("boundary count: exactly one window") {
    SignalFrame f = make_frame(past_len + P, 2, 1, 13);
    auto ws = make_anchor_windows(f, past_len, P, 1);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].anchor_index == past_len - 1);
  }

  SUBCASE("count formula: past_len + P + 9 gives 10 windows") {
    SignalFrame f = make_frame(past_len + P + 9, 2, 1, 14);
    auto ws = make_anchor_windows(f, past_len, P, 1);
    CHECK(ws.size() == 10);
  }

  SUBCASE("stride reduces count per the formula") {
    SignalFrame f = make_frame(50, 2, 1, 15);
    auto ws = make_anchor_windows(f, past_len, P, 5);
    CHECK((Eigen::Index)ws.size() == (50 - past_len - P) / 5 + 1);
  }

  SUBCASE("too-short frame gives an empty list") {
    SignalFrame f = make_frame(past_len + P - 1, 2, 1, 16);
    CHECK(make_anchor_windows(f, past_len, P, 1).empty());
  }

  SUBCASE("window contents match the frame slices") {
    SignalFrame f = make_frame(20, 2, 1, 17);
    auto ws = make_anchor_windows(f, past_len, P, 1);
    const AnchorWindow& w = ws[2];
    Eigen::Index a = w.anchor_index;
    CHECK(a == past_len - 1 + 2);
    CHECK(w.past == f.values.block(a - past_len + 1, 0, past_len, 3));
    CHECK(w.past_inputs == f.inputs().block(a - past_len + 1, 0, past_len, 2));
    CHECK(w.past_outputs ==
          f.outputs().block(a - past_len + 1, 0, past_len, 1));
    CHECK(w.future_inputs == f.inputs().block(a, 0, P, 2));
    CHECK(w.future_outputs == f.outputs().block(a + 1, 0, P, 1));
  }
}

TEST_CASE("split invariants") {
  auto section = [](UnixTime start, Eigen::Index n, const std::string& label) {
    Section s;
    s.label = label;
    s.frame = make_frame(n, 1, 1, 18, start);
    return s;
  };
  DatasetSplit split;
  split.test.push_back(section(0, 10, "t0"));          // 0 .. 6000
  split.train.push_back(section(6000, 10, "tr"));      // 6000 .. 12000
  split.validation.push_back(section(12000, 5, "v"));  // 12000 .. 15000
  split.test.push_back(section(15000, 10, "t1"));      // 15000 .. 21000

  CHECK_NOTHROW(check_split_invariants(split));

  SUBCASE("overlap is rejected") {
    split.train.push_back(section(13000, 5, "bad"));
    CHECK_THROWS_AS(check_split_invariants(split), DataError);
  }

  SUBCASE("non-test temporal extreme is rejected") {
    split.train.push_back(section(30000, 5, "late"));
    CHECK_THROWS_AS(check_split_invariants(split), DataError);
  }
}

TEST_CASE("manifest round trip and application") {
  TempDir dir("manifest");
  std::vector<ManifestEntry> entries = {
      {"t0", "test", 0, 6000},
      {"tr", "train", 6000, 12000},
      {"sc", "scenario", 12000, 15000},
      {"t1", "test", 15000, 21000},
  };
  save_manifest(entries, dir.file("m.json"));
  auto loaded = load_manifest(dir.file("m.json"));
  REQUIRE(loaded.size() == entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    CHECK(loaded[i].label == entries[i].label);
    CHECK(loaded[i].role == entries[i].role);
    CHECK(loaded[i].start == entries[i].start);
    CHECK(loaded[i].end == entries[i].end);
  }

  SignalFrame timeline = make_frame(35, 1, 1, 19, 0);
  DatasetSplit split = apply_manifest({timeline}, loaded);
  REQUIRE(split.test.size() == 2);
  REQUIRE(split.train.size() == 1);
  REQUIRE(split.scenarios.size() == 1);
  CHECK(split.train[0].frame.n_samples() == 10);
  CHECK(split.train[0].frame.start_time == 6000);
  CHECK_NOTHROW(check_split_invariants(split));
}

TEST_CASE("normalization stats serialization round trip") {
  TempDir dir("stats");
  SignalFrame f = make_frame(100, 2, 1, 20);
  NormalizationStats s = fit_normalization({f});
  save_stats(s, f.channels, dir.file("stats.json"));
  NormalizationStats t = load_stats(dir.file("stats.json"));
  CHECK(t.mean == s.mean);
  CHECK(t.scale == s.scale);
}
