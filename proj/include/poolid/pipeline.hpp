#ifndef POOLID_PIPELINE_HPP
#define POOLID_PIPELINE_HPP

#include <string>
#include <vector>

#include "poolid/data.hpp"
#include "poolid/hyperopt.hpp"
#include "poolid/linid.hpp"
#include "poolid/nlarx.hpp"

namespace poolid {

// Resolved run configuration shared by all commands. Loaded from a JSON
// file; command-line flags override individual keys.
struct RunConfig {
  std::string data_dir;  // raw files (prepare) or prepared bundle (train/eval)
  std::string out_dir;
  std::uint64_t seed = 1;

  // simulate
  int months = 12;

  // prepare
  int resample_factor = 10;  // 60 s -> 10 min
  int max_gap = 5;
  double spike_sigma = 6.0;

  // model family + options
  std::string family = "lss";
  SubspaceOptions ss;
  NlarxConfig nn;

  // eval
  int H = 48;
  int past_len = 20;
  int stride = 1;
  std::vector<std::string> models;

  // hyperopt
  int budget = 8;
  int folds = 4;
  int parallelism = 1;

  // Closed-loop operational data often yields marginally unstable subspace
  // estimates; the pipeline enables eigenvalue projection by default.
  RunConfig() { ss.stabilize = true; }
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

// Prepared dataset bundle: cleaned, resampled sections plus the train-only
// normalization statistics. Sections are stored in engineering units; every
// consumer normalizes with `stats`.
struct Bundle {
  DatasetSplit split;
  NormalizationStats stats;
  std::vector<ChannelSpec> schema;
};

Bundle load_bundle(const std::string& dir);

// simulate: writes monthly raw CSV files, one CSV per off-nominal scenario
// section, and the split manifest under config.out_dir.
void cmd_simulate(const RunConfig& config);

// prepare: cleans, resamples and splits the raw files in config.data_dir
// into a bundle under config.out_dir (section CSVs + stats.json +
// bundle.json).
void cmd_prepare(const RunConfig& config);

// train: fits the configured family on the bundle in config.data_dir and
// writes the model file (plus a training log for the network family).
void cmd_train(const RunConfig& config);

// eval: evaluates every model in config.models on the bundle's test and
// scenario sections and writes criteria.csv + per-model curve files.
void cmd_eval(const RunConfig& config);

// report: eval plus a human-readable summary.md comparison table.
void cmd_report(const RunConfig& config);

// hyperopt: cross-validated search over the configured family's space;
// writes the trial ledger (resumable) and best_config.json.
void cmd_hyperopt(const RunConfig& config);

}  // namespace poolid

#endif
