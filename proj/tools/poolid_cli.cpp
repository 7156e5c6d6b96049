// Command-line front end: simulate | prepare | train | eval | hyperopt |
// report, driven by a JSON config file with flag overrides.
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "poolid/errors.hpp"
#include "poolid/pipeline.hpp"
#include "poolid/timeutil.hpp"

namespace {

std::string default_run_dir(const std::string& command) {
  auto now = std::chrono::system_clock::now();
  poolid::UnixTime t = std::chrono::duration_cast<std::chrono::seconds>(
                           now.time_since_epoch())
                           .count();
  std::string stamp = poolid::format_iso8601(t);
  for (char& c : stamp) {
    if (c == ':') c = '-';
  }
  if (!stamp.empty() && stamp.back() == 'Z') stamp.pop_back();
  return "runs/" + command + "_" + stamp;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"System identification toolkit for pool thermal dynamics"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may appear after the subcommand

  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::string family;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> models;
  int budget = -1;
  int folds = -1;
  int months = -1;
  int parallelism = -1;

  app.add_option("--config", config_path, "JSON run configuration")
      ->envname("POOLID_CONFIG");
  app.add_option("--out", out_dir, "output directory (default: timestamped)")
      ->envname("POOLID_OUT");
  app.add_option("--data", data_dir, "input data / bundle directory")
      ->envname("POOLID_DATA");
  app.add_option_function<std::uint64_t>(
         "--seed",
         [&](std::uint64_t v) {
           seed = v;
           seed_set = true;
         },
         "random seed override")
      ->envname("POOLID_SEED");
  app.add_option("--family", family, "model family: lss | nlarx")
      ->envname("POOLID_FAMILY");

  auto* sim = app.add_subcommand("simulate", "generate the synthetic suite");
  sim->add_option("--months", months, "episode length in months");
  app.add_subcommand("prepare", "clean, resample and split raw data");
  app.add_subcommand("train", "fit one model on a prepared bundle");
  auto* ev = app.add_subcommand("eval", "evaluate models on test/scenarios");
  ev->add_option("--model", models, "model file (repeatable)");
  auto* rep = app.add_subcommand("report", "eval plus a summary table");
  rep->add_option("--model", models, "model file (repeatable)");
  auto* hyp = app.add_subcommand("hyperopt", "cross-validated search");
  hyp->add_option("--budget", budget, "number of trials");
  hyp->add_option("--folds", folds, "cross-validation folds");
  hyp->add_option("--parallelism", parallelism, "concurrent trials");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    poolid::RunConfig cfg;
    if (!config_path.empty()) cfg = poolid::load_run_config(config_path);
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) cfg.seed = seed;
    if (!family.empty()) {
      if (family != "lss" && family != "nlarx") {
        throw poolid::ConfigError("unknown family '" + family +
                                  "' (lss|nlarx)");
      }
      cfg.family = family;
    }
    if (!models.empty()) cfg.models = models;
    if (budget > 0) cfg.budget = budget;
    if (folds > 0) cfg.folds = folds;
    if (months > 0) cfg.months = months;
    if (parallelism > 0) cfg.parallelism = parallelism;
    if (cfg.out_dir.empty()) cfg.out_dir = default_run_dir(command);

    std::filesystem::create_directories(cfg.out_dir);
    poolid::save_run_config(
        cfg, (std::filesystem::path(cfg.out_dir) / "resolved_config.json")
                 .string());

    if (command == "simulate") {
      poolid::cmd_simulate(cfg);
    } else if (command == "prepare") {
      poolid::cmd_prepare(cfg);
    } else if (command == "train") {
      poolid::cmd_train(cfg);
    } else if (command == "eval") {
      poolid::cmd_eval(cfg);
    } else if (command == "report") {
      poolid::cmd_report(cfg);
    } else if (command == "hyperopt") {
      poolid::cmd_hyperopt(cfg);
    }
    std::cout << command << ": done -> " << cfg.out_dir << '\n';
    return poolid::kExitOk;
  } catch (const poolid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return poolid::kExitConfigError;
  } catch (const poolid::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return poolid::kExitDataError;
  } catch (const poolid::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return poolid::kExitNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return poolid::kExitFailure;
  }
}
