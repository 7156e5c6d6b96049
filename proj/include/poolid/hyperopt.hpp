#ifndef POOLID_HYPEROPT_HPP
#define POOLID_HYPEROPT_HPP

#include <string>
#include <variant>
#include <vector>

#include "poolid/data.hpp"
#include "poolid/linid.hpp"
#include "poolid/nlarx.hpp"

namespace poolid {

enum class ModelFamily { kStateSpace, kNlarx };

// One sampled configuration: exactly one of the two option sets is active.
struct TrialConfig {
  ModelFamily family = ModelFamily::kStateSpace;
  SubspaceOptions ss;
  NlarxConfig nn;

  std::string key() const;        // canonical text form (tie-break order)
  long parameter_count() const;   // tie-break: fewer parameters win
};

// The hyperparameter search spaces. Discrete dimensions are enumerated as a
// grid; continuous ones (learning rate log-uniform, batch size log-uniform
// integer) are sampled per trial from the seed stream.
struct SearchSpace {
  ModelFamily family = ModelFamily::kStateSpace;

  // NLARX grid
  std::vector<int> n_layers = {1, 2, 3};
  std::vector<int> units_per_layer = {8, 16, 32, 64};
  std::vector<double> l2 = {0.0, 1e-4, 1e-3};
  std::vector<int> loss_horizon = {3, 5, 8, 15};
  double lr_min = 1e-5, lr_max = 1e-2;
  int batch_min = 16, batch_max = 256;

  // State-space grid
  std::vector<int> n_x = {2, 3, 4};
  std::vector<SubspaceFocus> focus = {SubspaceFocus::kSimulation,
                                      SubspaceFocus::kPrediction};
  std::vector<int> block_horizon = {48, 24, 0};  // 0 = auto
  std::vector<NoiseModel> noise = {NoiseModel::kNone, NoiseModel::kEstimate};

  // Defaults applied to every sampled config (lags, epoch budget, strides).
  NlarxConfig nn_defaults;
  SubspaceOptions ss_defaults;
};

// Section-based cross-validation plan over the train sections. Sections are
// subdivided by time when there are fewer sections than folds.
struct CvFold {
  std::vector<Section> train;
  std::vector<Section> validation;
};

struct CvPlan {
  std::vector<CvFold> folds;
};

CvPlan make_cv_plan(const DatasetSplit& split, int n_folds);

struct TrialResult {
  int trial_id = -1;
  TrialConfig config;
  std::vector<double> fold_scores;  // validation full-horizon acc per fold
  double mean_score = 0;            // inf when a fold diverged
  std::uint64_t seed = 0;
};

struct SearchResult {
  TrialConfig best;
  int best_trial = -1;
  std::vector<TrialResult> trials;
};

struct SearchSettings {
  int budget = 8;
  std::uint64_t seed = 1;
  int parallelism = 1;        // trials are independent jobs
  Eigen::Index eval_H = 48;
  Eigen::Index eval_past_len = 20;
  Eigen::Index eval_stride = 4;
  std::string ledger_path;    // optional append-only trial ledger (resume)
};

// Enumerates/samples `budget` configs deterministically from the seed, runs
// each over the CV plan, and returns the argmin of the mean validation
// full-horizon accuracy. Diverged trials score infinity. When a ledger path
// is set, completed trial ids found there are not re-run.
SearchResult run_search(const SearchSpace& space, const CvPlan& plan,
                        const NormalizationStats& stats,
                        const SearchSettings& settings);

// Deterministic config sampling used by run_search (exposed for tests).
std::vector<TrialConfig> sample_configs(const SearchSpace& space, int budget,
                                        std::uint64_t seed);

}  // namespace poolid

#endif
