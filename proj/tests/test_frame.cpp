#include <cmath>

#include "doctest.h"
#include "poolid/errors.hpp"
#include "poolid/frame.hpp"
#include "test_util.hpp"

using namespace poolid;

namespace {

std::vector<ChannelSpec> tiny_schema() {
  return {{"a", "u", ChannelRole::kInput},
          {"b", "u", ChannelRole::kInput},
          {"y", "u", ChannelRole::kOutput}};
}

}  // namespace

TEST_CASE("benchmark schema has 10 inputs and 2 outputs in fixed order") {
  auto schema = benchmark_schema();
  REQUIRE(schema.size() == 12);
  CHECK(schema[0].name == "boiler_power_kw");
  CHECK(schema[9].name == "hall_energy_kw");
  CHECK(schema[10].name == "pool1_temp_c");
  CHECK(schema[11].name == "pool2_temp_c");
  int inputs = 0, outputs = 0;
  for (const auto& c : schema) {
    (c.role == ChannelRole::kInput ? inputs : outputs)++;
  }
  CHECK(inputs == 10);
  CHECK(outputs == 2);
}

TEST_CASE("load_frame parses a hand-checked fixture") {
  TempDir dir("frame");
  // Shuffled column order vs schema; hand-computed reference parse.
  write_file(dir.file("f.csv"),
             "timestamp,y,a,b\n"
             "2020-01-01T00:00:00Z,7.5,1,2\n"
             "2020-01-01T00:01:00Z,8,3,4\n"
             "2020-01-01T00:02:00Z,8.5,5,6\n"
             "2020-01-01T00:03:00Z,9,7,8\n"
             "2020-01-01T00:04:00Z,9.5,9,10\n");
  SignalFrame f = load_frame(dir.file("f.csv"), tiny_schema());
  CHECK(f.n_samples() == 5);
  CHECK(f.n_channels() == 3);
  CHECK(f.start_time == parse_iso8601("2020-01-01T00:00:00Z"));
  CHECK(f.sample_period == 60);
  // Columns reordered to schema order a, b, y.
  CHECK(f.values(0, 0) == 1.0);
  CHECK(f.values(0, 1) == 2.0);
  CHECK(f.values(0, 2) == 7.5);
  CHECK(f.values(4, 0) == 9.0);
  CHECK(f.values(4, 2) == 9.5);
}

TEST_CASE("load_frame fills timestamp gaps with missing rows") {
  TempDir dir("frame_gap");
  write_file(dir.file("f.csv"),
             "timestamp,a,b,y\n"
             "2020-01-01T00:00:00Z,1,2,3\n"
             "2020-01-01T00:01:00Z,4,5,6\n"
             "2020-01-01T00:03:00Z,7,8,9\n");  // one row missing in between
  SignalFrame f = load_frame(dir.file("f.csv"), tiny_schema());
  REQUIRE(f.n_samples() == 4);
  CHECK(std::isnan(f.values(2, 0)));
  CHECK(std::isnan(f.values(2, 2)));
  CHECK(f.values(3, 0) == 7.0);
}

TEST_CASE("load_frame treats empty fields as missing") {
  TempDir dir("frame_missing");
  write_file(dir.file("f.csv"),
             "timestamp,a,b,y\n"
             "2020-01-01T00:00:00Z,1,,3\n"
             "2020-01-01T00:01:00Z,4,5,6\n");
  SignalFrame f = load_frame(dir.file("f.csv"), tiny_schema());
  CHECK(std::isnan(f.values(0, 1)));
  CHECK(f.values(0, 0) == 1.0);
  CHECK(f.has_missing());
}

TEST_CASE("load_frame errors carry line information") {
  TempDir dir("frame_err");
  auto schema = tiny_schema();

  write_file(dir.file("unknown.csv"),
             "timestamp,a,b,z\n2020-01-01T00:00:00Z,1,2,3\n");
  CHECK_THROWS_AS(load_frame(dir.file("unknown.csv"), schema), DataError);

  write_file(dir.file("nonmono.csv"),
             "timestamp,a,b,y\n"
             "2020-01-01T00:01:00Z,1,2,3\n"
             "2020-01-01T00:00:00Z,4,5,6\n");
  CHECK_THROWS_AS(load_frame(dir.file("nonmono.csv"), schema), DataError);

  write_file(dir.file("badnum.csv"),
             "timestamp,a,b,y\n2020-01-01T00:00:00Z,1,two,3\n");
  try {
    load_frame(dir.file("badnum.csv"), schema);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);  // line 2
  }

  CHECK_THROWS_AS(load_frame(dir.file("does_not_exist.csv"), schema),
                  DataError);
}

TEST_CASE("save/load round trip preserves values and missing cells") {
  TempDir dir("frame_rt");
  SignalFrame f;
  f.start_time = parse_iso8601("2021-06-01T12:00:00Z");
  f.sample_period = 600;
  f.channels = tiny_schema();
  f.values.resize(4, 3);
  f.values << 1.25, -2.5, 0.1, 3, 4, 5, std::nan(""), 7, 8, 9, 10, 1e-7;
  save_frame(f, dir.file("f.csv"));
  SignalFrame g = load_frame(dir.file("f.csv"), tiny_schema());
  REQUIRE(g.n_samples() == 4);
  CHECK(g.start_time == f.start_time);
  CHECK(g.sample_period == 600);
  for (Eigen::Index r = 0; r < 4; ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      if (std::isnan(f.values(r, c))) {
        CHECK(std::isnan(g.values(r, c)));
      } else {
        CHECK(g.values(r, c) == f.values(r, c));  // exact round trip
      }
    }
  }
}

TEST_CASE("slice and slice_time") {
  SignalFrame f;
  f.start_time = 1000;
  f.sample_period = 10;
  f.channels = tiny_schema();
  f.values.resize(6, 3);
  for (Eigen::Index r = 0; r < 6; ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) f.values(r, c) = (double)(10 * r + c);
  }
  SignalFrame s = f.slice(2, 5);
  CHECK(s.n_samples() == 3);
  CHECK(s.start_time == 1020);
  CHECK(s.values(0, 0) == 20.0);

  SignalFrame t = f.slice_time(1020, 1050);
  CHECK(t.n_samples() == 3);
  CHECK(t.start_time == 1020);
  CHECK(t.values(2, 2) == 42.0);
}

TEST_CASE("input/output helpers follow channel roles") {
  SignalFrame f;
  f.start_time = 0;
  f.sample_period = 60;
  f.channels = tiny_schema();
  f.values.resize(2, 3);
  f.values << 1, 2, 3, 4, 5, 6;
  CHECK(f.n_inputs() == 2);
  CHECK(f.n_outputs() == 1);
  CHECK(f.inputs()(1, 1) == 5.0);
  CHECK(f.outputs()(0, 0) == 3.0);
  CHECK(f.channel_index("y") == 2);
  CHECK_THROWS_AS(f.channel_index("nope"), DataError);
}
