#include <filesystem>

#include "doctest.h"
#include "poolid/errors.hpp"
#include "poolid/eval.hpp"
#include "poolid/pipeline.hpp"
#include "test_util.hpp"

using namespace poolid;
namespace fs = std::filesystem;

TEST_CASE("run config round trip and validation") {
  TempDir dir("cfg");

  SUBCASE("save/load preserves every field") {
    RunConfig c;
    c.data_dir = "raw";
    c.out_dir = "out";
    c.seed = 77;
    c.months = 3;
    c.resample_factor = 5;
    c.family = "nlarx";
    c.ss.n_x = 4;
    c.ss.focus = SubspaceFocus::kPrediction;
    c.nn.hidden_layers = {32, 16};
    c.nn.learning_rate = 2.5e-4;
    c.H = 24;
    c.models = {"a.json", "b.json"};
    c.budget = 3;
    c.folds = 2;
    save_run_config(c, dir.file("c.json"));
    RunConfig t = load_run_config(dir.file("c.json"));
    CHECK(t.data_dir == c.data_dir);
    CHECK(t.seed == c.seed);
    CHECK(t.months == c.months);
    CHECK(t.resample_factor == c.resample_factor);
    CHECK(t.family == c.family);
    CHECK(t.ss.n_x == c.ss.n_x);
    CHECK(t.ss.focus == c.ss.focus);
    CHECK(t.ss.stabilize == c.ss.stabilize);
    CHECK(t.nn.hidden_layers == c.nn.hidden_layers);
    CHECK(t.nn.learning_rate == c.nn.learning_rate);
    CHECK(t.H == c.H);
    CHECK(t.models == c.models);
    CHECK(t.budget == c.budget);
    CHECK(t.folds == c.folds);
  }

  SUBCASE("unknown family is a config error") {
    write_file(dir.file("bad.json"), "{\"family\": \"arima\"}\n");
    CHECK_THROWS_AS(load_run_config(dir.file("bad.json")), ConfigError);
  }

  SUBCASE("missing or malformed files are config errors") {
    CHECK_THROWS_AS(load_run_config(dir.file("absent.json")), ConfigError);
    write_file(dir.file("broken.json"), "{not json");
    CHECK_THROWS_AS(load_run_config(dir.file("broken.json")), ConfigError);
  }
}

TEST_CASE("end-to-end pipeline on a short synthetic run") {
  TempDir dir("pipe");

  RunConfig sim;
  sim.seed = 5;
  sim.months = 2;
  sim.out_dir = dir.file("raw");
  cmd_simulate(sim);

  SUBCASE("simulate writes monthly files, scenario files and the manifest") {
    CHECK(fs::exists(dir.file("raw") + "/data_2019-09.csv"));
    CHECK(fs::exists(dir.file("raw") + "/data_2019-10.csv"));
    for (int s = 1; s <= 4; ++s) {
      CHECK(fs::exists(dir.file("raw") + "/scenario_scenario" +
                       std::to_string(s) + ".csv"));
    }
    CHECK(fs::exists(dir.file("raw") + "/manifest.json"));
  }

  SUBCASE("simulate output is byte-identical for the same seed") {
    RunConfig sim2 = sim;
    sim2.out_dir = dir.file("raw2");
    cmd_simulate(sim2);
    CHECK(read_file(dir.file("raw2") + "/data_2019-09.csv") ==
          read_file(dir.file("raw") + "/data_2019-09.csv"));
    CHECK(read_file(dir.file("raw2") + "/manifest.json") ==
          read_file(dir.file("raw") + "/manifest.json"));
  }

  RunConfig prep;
  prep.data_dir = dir.file("raw");
  prep.out_dir = dir.file("bundle");
  cmd_prepare(prep);

  SUBCASE("prepare produces a loadable 10-minute bundle") {
    Bundle bundle = load_bundle(dir.file("bundle"));
    CHECK_FALSE(bundle.split.train.empty());
    CHECK_FALSE(bundle.split.test.empty());
    CHECK(bundle.split.scenarios.size() == 4);
    for (const auto& s : bundle.split.train) {
      CHECK(s.frame.sample_period == 600);
      CHECK_FALSE(s.frame.has_missing());
    }
    CHECK_NOTHROW(check_split_invariants(bundle.split));
    CHECK(bundle.stats.mean.size() == 12);
  }

  SUBCASE("prepare is idempotent") {
    RunConfig prep2 = prep;
    prep2.out_dir = dir.file("bundle2");
    cmd_prepare(prep2);
    CHECK(read_file(dir.file("bundle2") + "/bundle.json") ==
          read_file(dir.file("bundle") + "/bundle.json"));
    CHECK(read_file(dir.file("bundle2") + "/stats.json") ==
          read_file(dir.file("bundle") + "/stats.json"));
    Bundle b = load_bundle(dir.file("bundle"));
    std::string one =
        "/sections/train_" + b.split.train.front().label + ".csv";
    CHECK(read_file(dir.file("bundle2") + one) ==
          read_file(dir.file("bundle") + one));
  }

  RunConfig train_cfg;
  train_cfg.data_dir = dir.file("bundle");
  train_cfg.out_dir = dir.file("model");
  train_cfg.family = "lss";
  train_cfg.ss.n_x = 2;
  cmd_train(train_cfg);
  const std::string model_path = dir.file("model") + "/model_lss.json";

  SUBCASE("the trained model round-trips with its options and stats") {
    REQUIRE(fs::exists(model_path));
    SubspaceOptions opts;
    StateSpaceModel m = load_state_space(model_path, &opts);
    CHECK(m.n_x == 2);
    CHECK(opts.stabilize);  // pipeline default for closed-loop data
    REQUIRE(m.stats.has_value());
    CHECK(m.stats->mean.size() == 12);
    CHECK(m.spectral_radius() <= 0.999 + 1e-12);
  }

  SUBCASE("eval and report emit the comparison artifacts") {
    RunConfig ev;
    ev.data_dir = dir.file("bundle");
    ev.out_dir = dir.file("report");
    ev.models = {model_path};
    ev.stride = 4;
    cmd_report(ev);

    std::string table = read_file(dir.file("report") + "/criteria.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);  // header + row
    CHECK(table.find("model_lss,") != std::string::npos);
    CHECK(fs::exists(dir.file("report") + "/curve_model_lss.csv"));
    std::string md = read_file(dir.file("report") + "/summary.md");
    CHECK(md.find("| model_lss |") != std::string::npos);

    RunConfig bad = ev;
    bad.models = {};
    CHECK_THROWS_AS(cmd_eval(bad), ConfigError);
  }

  SUBCASE("train on a non-bundle directory is a data error") {
    RunConfig bad = train_cfg;
    bad.data_dir = dir.file("raw");
    CHECK_THROWS_AS(cmd_train(bad), DataError);
  }
}
