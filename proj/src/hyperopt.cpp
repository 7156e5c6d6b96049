#include "poolid/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "poolid/errors.hpp"
#include "poolid/eval.hpp"
#include "poolid/rng.hpp"
#include "poolid/timeutil.hpp"

namespace poolid {

namespace {

const char* focus_name(SubspaceFocus f) {
  return f == SubspaceFocus::kSimulation ? "simulation" : "prediction";
}

const char* noise_name(NoiseModel n) {
  return n == NoiseModel::kNone ? "none" : "estimate";
}

}  // namespace

std::string TrialConfig::key() const {
  std::ostringstream out;
  if (family == ModelFamily::kStateSpace) {
    out << "ss n_x=" << ss.n_x << " focus=" << focus_name(ss.focus)
        << " horizon=" << ss.block_horizon << " noise=" << noise_name(ss.noise_model);
  } else {
    out << "nlarx layers=";
    for (size_t i = 0; i < nn.hidden_layers.size(); ++i) {
      if (i) out << 'x';
      out << nn.hidden_layers[i];
    }
    out << " l2=" << format_double(nn.l2) << " P=" << nn.loss_horizon
        << " lr=" << format_double(nn.learning_rate)
        << " batch=" << nn.batch_size;
  }
  return out.str();
}

long TrialConfig::parameter_count() const {
  if (family == ModelFamily::kStateSpace) {
    long n_x = ss.n_x;
    long n_u = nn.n_u;  // channel counts are shared plumbing defaults
    long n_y = nn.n_y;
    long count = n_x * n_x + n_x * n_u + n_y * n_x;
    if (ss.noise_model == NoiseModel::kEstimate) count += n_x * n_y;
    return count;
  }
  return (long)make_params(nn).n_params();
}

CvPlan make_cv_plan(const DatasetSplit& split, int n_folds) {
  if (n_folds < 2) throw ConfigError("make_cv_plan: need at least 2 folds");
  if (split.train.empty()) throw DataError("make_cv_plan: no train sections");

  // Work with contiguous time units; subdivide sections when there are fewer
  // sections than folds so every fold gets a non-empty validation block.
  std::vector<Section> units;
  int per_section = 1;
  if ((int)split.train.size() < n_folds) {
    per_section = (n_folds + (int)split.train.size() - 1) /
                  (int)split.train.size();
  }
  for (const auto& sec : split.train) {
    if (per_section == 1) {
      units.push_back(sec);
      continue;
    }
    Eigen::Index n = sec.frame.values.rows();
    Eigen::Index chunk = n / per_section;
    if (chunk < 2) {
      units.push_back(sec);
      continue;
    }
    for (int p = 0; p < per_section; ++p) {
      Eigen::Index begin = (Eigen::Index)p * chunk;
      Eigen::Index end = (p == per_section - 1) ? n : begin + chunk;
      Section piece;
      piece.label = sec.label + "/" + std::to_string(p);
      piece.frame = sec.frame.slice(begin, end);
      units.push_back(std::move(piece));
    }
  }
  if ((int)units.size() < n_folds) {
    throw DataError("make_cv_plan: train data too short for fold count");
  }

  CvPlan plan;
  plan.folds.resize((size_t)n_folds);
  for (size_t i = 0; i < units.size(); ++i) {
    for (int f = 0; f < n_folds; ++f) {
      auto& fold = plan.folds[(size_t)f];
      if ((int)(i % (size_t)n_folds) == f) {
        fold.validation.push_back(units[i]);
      } else {
        fold.train.push_back(units[i]);
      }
    }
  }
  return plan;
}

std::vector<TrialConfig> sample_configs(const SearchSpace& space, int budget,
                                        std::uint64_t seed) {
  if (budget < 1) throw ConfigError("sample_configs: budget must be >= 1");

  // Enumerate the discrete grid, shuffle it with the seed, then fill the
  // continuous dimensions from a per-trial stream so a config's continuous
  // draws do not depend on the budget.
  std::vector<TrialConfig> grid;
  if (space.family == ModelFamily::kStateSpace) {
    for (int n_x : space.n_x) {
      for (SubspaceFocus f : space.focus) {
        for (int h : space.block_horizon) {
          for (NoiseModel nm : space.noise) {
            TrialConfig c;
            c.family = ModelFamily::kStateSpace;
            c.ss = space.ss_defaults;
            c.nn = space.nn_defaults;
            c.ss.n_x = n_x;
            c.ss.focus = f;
            c.ss.block_horizon = h;
            c.ss.noise_model = nm;
            grid.push_back(std::move(c));
          }
        }
      }
    }
  } else {
    for (int layers : space.n_layers) {
      for (int units : space.units_per_layer) {
        for (double l2 : space.l2) {
          for (int P : space.loss_horizon) {
            TrialConfig c;
            c.family = ModelFamily::kNlarx;
            c.ss = space.ss_defaults;
            c.nn = space.nn_defaults;
            c.nn.hidden_layers.assign((size_t)layers, units);
            c.nn.l2 = l2;
            c.nn.loss_horizon = P;
            grid.push_back(std::move(c));
          }
        }
      }
    }
  }
  if (grid.empty()) throw ConfigError("sample_configs: empty search space");

  Rng rng(Rng::derive(seed, "grid-shuffle"));
  for (size_t i = grid.size(); i > 1; --i) {
    size_t j = (size_t)rng.uniform_int(0, (long)i - 1);
    std::swap(grid[i - 1], grid[j]);
  }

  std::vector<TrialConfig> out;
  out.reserve((size_t)budget);
  for (int t = 0; t < budget; ++t) {
    TrialConfig c = grid[(size_t)t % grid.size()];
    if (c.family == ModelFamily::kNlarx) {
      Rng draw(Rng::derive(seed, "trial-" + std::to_string(t)));
      c.nn.learning_rate =
          std::exp(draw.uniform(std::log(space.lr_min), std::log(space.lr_max)));
      double lb = std::exp(
          draw.uniform(std::log((double)space.batch_min),
                       std::log((double)space.batch_max)));
      c.nn.batch_size = std::clamp((int)std::lround(lb), space.batch_min,
                                   space.batch_max);
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

std::vector<Section> normalize_sections(const std::vector<Section>& sections,
                                        const NormalizationStats& stats) {
  std::vector<Section> out;
  out.reserve(sections.size());
  for (const auto& s : sections) {
    out.push_back({s.label, apply_normalization(s.frame, stats)});
  }
  return out;
}

double run_fold(const TrialConfig& config, const CvFold& fold,
                const NormalizationStats& stats,
                const SearchSettings& settings, std::uint64_t fold_seed) {
  try {
    if (config.family == ModelFamily::kNlarx) {
      NlarxConfig nn = config.nn;
      nn.seed = fold_seed;
      DatasetSplit split;
      split.train = fold.train;
      split.validation = fold.validation;
      TrainResult result = train(nn, split, stats);
      return result.best_val_score;
    }
    std::vector<SignalFrame> train_frames;
    for (const auto& s : normalize_sections(fold.train, stats)) {
      train_frames.push_back(s.frame);
    }
    StateSpaceModel model = estimate_subspace(train_frames, config.ss);
    StateSpaceForecaster fc(model, "cv", config.ss.past_len);
    HorizonMetrics m = horizon_rmse_sections(
        fc, normalize_sections(fold.validation, stats), settings.eval_H,
        settings.eval_past_len, settings.eval_stride);
    return criterion(m, 1, settings.eval_H);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const DataError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

SearchResult run_search(const SearchSpace& space, const CvPlan& plan,
                        const NormalizationStats& stats,
                        const SearchSettings& settings) {
  if (plan.folds.empty()) throw ConfigError("run_search: empty CV plan");
  std::vector<TrialConfig> configs =
      sample_configs(space, settings.budget, settings.seed);

  // Resume: trial ids already scored in the ledger are reused verbatim.
  std::map<int, TrialResult> done;
  if (!settings.ledger_path.empty()) {
    std::ifstream in(settings.ledger_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.rfind("trial_id,", 0) == 0) continue;
      std::istringstream row(line);
      TrialResult r;
      std::string field;
      std::getline(row, field, ',');
      r.trial_id = std::stoi(field);
      std::getline(row, field, ',');  // config key (informational)
      std::getline(row, field, ',');
      r.mean_score = field == "inf"
                         ? std::numeric_limits<double>::infinity()
                         : std::stod(field);
      while (std::getline(row, field, ',')) {
        r.fold_scores.push_back(
            field == "inf" ? std::numeric_limits<double>::infinity()
                           : std::stod(field));
      }
      if (r.trial_id >= 0 && r.trial_id < (int)configs.size()) {
        r.config = configs[(size_t)r.trial_id];
        done[r.trial_id] = std::move(r);
      }
    }
  }

  std::vector<int> pending;
  for (int t = 0; t < (int)configs.size(); ++t) {
    if (!done.count(t)) pending.push_back(t);
  }

  std::vector<TrialResult> fresh(pending.size());
  auto run_trial = [&](size_t idx) {
    int t = pending[idx];
    TrialResult r;
    r.trial_id = t;
    r.config = configs[(size_t)t];
    r.seed = Rng::derive(settings.seed, "trial-run-" + std::to_string(t));
    double sum = 0;
    for (size_t f = 0; f < plan.folds.size(); ++f) {
      double score = run_fold(
          r.config, plan.folds[f], stats, settings,
          Rng::derive(r.seed, "fold-" + std::to_string(f)));
      r.fold_scores.push_back(score);
      sum += score;
    }
    r.mean_score = std::isfinite(sum) ? sum / (double)plan.folds.size()
                                      : std::numeric_limits<double>::infinity();
    fresh[idx] = std::move(r);
  };
  if (settings.parallelism > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(settings.parallelism)
    for (long idx = 0; idx < (long)pending.size(); ++idx) run_trial((size_t)idx);
  } else {
    for (size_t idx = 0; idx < pending.size(); ++idx) run_trial(idx);
  }

  // Append fresh trials in id order so the ledger is reproducible.
  if (!settings.ledger_path.empty() && !fresh.empty()) {
    bool empty = done.empty();
    std::ofstream out(settings.ledger_path, std::ios::app);
    if (!out) throw DataError("run_search: cannot write trial ledger");
    if (empty) out << "trial_id,config,mean_score,fold_scores\n";
    for (const auto& r : fresh) {
      out << r.trial_id << ",\"" << r.config.key() << "\",";
      out << (std::isfinite(r.mean_score) ? format_double(r.mean_score)
                                          : std::string("inf"));
      for (double s : r.fold_scores) {
        out << ',' << (std::isfinite(s) ? format_double(s)
                                        : std::string("inf"));
      }
      out << '\n';
    }
  }

  SearchResult result;
  for (auto& [id, r] : done) result.trials.push_back(std::move(r));
  for (auto& r : fresh) result.trials.push_back(std::move(r));
  std::sort(result.trials.begin(), result.trials.end(),
            [](const TrialResult& a, const TrialResult& b) {
              return a.trial_id < b.trial_id;
            });

  // Argmin; ties break towards fewer parameters, then the canonical key.
  const TrialResult* best = nullptr;
  for (const auto& r : result.trials) {
    if (!best) {
      best = &r;
      continue;
    }
    if (r.mean_score < best->mean_score) {
      best = &r;
    } else if (r.mean_score == best->mean_score) {
      long pa = r.config.parameter_count();
      long pb = best->config.parameter_count();
      if (pa < pb || (pa == pb && r.config.key() < best->config.key())) {
        best = &r;
      }
    }
  }
  if (!best || !std::isfinite(best->mean_score)) {
    throw NumericError("run_search: every trial diverged");
  }
  result.best = best->config;
  result.best_trial = best->trial_id;
  return result;
}

}  // namespace poolid
