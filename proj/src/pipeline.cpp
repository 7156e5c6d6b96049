#include "poolid/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>

#include "poolid/errors.hpp"
#include "poolid/eval.hpp"
#include "poolid/simulator.hpp"
#include "poolid/timeutil.hpp"

namespace poolid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

SubspaceFocus parse_focus(const std::string& s) {
  if (s == "simulation") return SubspaceFocus::kSimulation;
  if (s == "prediction") return SubspaceFocus::kPrediction;
  throw ConfigError("unknown focus '" + s + "' (simulation|prediction)");
}

NoiseModel parse_noise(const std::string& s) {
  if (s == "none") return NoiseModel::kNone;
  if (s == "estimate") return NoiseModel::kEstimate;
  throw ConfigError("unknown noise model '" + s + "' (none|estimate)");
}

std::string focus_string(SubspaceFocus f) {
  return f == SubspaceFocus::kSimulation ? "simulation" : "prediction";
}

std::string noise_string(NoiseModel n) {
  return n == NoiseModel::kNone ? "none" : "estimate";
}

void from_json_ss(const json& j, SubspaceOptions& ss) {
  ss.n_x = j.value("n_x", ss.n_x);
  ss.block_horizon = j.value("block_horizon", ss.block_horizon);
  if (j.contains("focus")) ss.focus = parse_focus(j["focus"].get<std::string>());
  if (j.contains("noise")) {
    ss.noise_model = parse_noise(j["noise"].get<std::string>());
  }
  ss.max_hankel_columns = j.value("max_hankel_columns", ss.max_hankel_columns);
  ss.stabilize = j.value("stabilize", ss.stabilize);
  ss.past_len = j.value("past_len", ss.past_len);
}

void from_json_nn(const json& j, NlarxConfig& nn) {
  nn.n_a = j.value("n_a", nn.n_a);
  nn.n_b = j.value("n_b", nn.n_b);
  if (j.contains("hidden_layers")) {
    nn.hidden_layers = j["hidden_layers"].get<std::vector<int>>();
  }
  nn.l2 = j.value("l2", nn.l2);
  nn.loss_horizon = j.value("loss_horizon", nn.loss_horizon);
  nn.learning_rate = j.value("learning_rate", nn.learning_rate);
  nn.batch_size = j.value("batch_size", nn.batch_size);
  nn.epochs = j.value("epochs", nn.epochs);
  nn.patience = j.value("patience", nn.patience);
  nn.window_stride = j.value("window_stride", nn.window_stride);
  nn.val_horizon = j.value("val_horizon", nn.val_horizon);
  nn.val_stride = j.value("val_stride", nn.val_stride);
  nn.val_every = j.value("val_every", nn.val_every);
}

json to_json_ss(const SubspaceOptions& ss) {
  return {{"n_x", ss.n_x},
          {"block_horizon", ss.block_horizon},
          {"focus", focus_string(ss.focus)},
          {"noise", noise_string(ss.noise_model)},
          {"max_hankel_columns", ss.max_hankel_columns},
          {"stabilize", ss.stabilize},
          {"past_len", ss.past_len}};
}

json to_json_nn(const NlarxConfig& nn) {
  return {{"n_a", nn.n_a},
          {"n_b", nn.n_b},
          {"hidden_layers", nn.hidden_layers},
          {"l2", nn.l2},
          {"loss_horizon", nn.loss_horizon},
          {"learning_rate", nn.learning_rate},
          {"batch_size", nn.batch_size},
          {"epochs", nn.epochs},
          {"patience", nn.patience},
          {"window_stride", nn.window_stride},
          {"val_horizon", nn.val_horizon},
          {"val_stride", nn.val_stride},
          {"val_every", nn.val_every}};
}

std::vector<Section> normalized(const std::vector<Section>& sections,
                                const NormalizationStats& stats) {
  std::vector<Section> out;
  out.reserve(sections.size());
  for (const auto& s : sections) {
    out.push_back({s.label, apply_normalization(s.frame, stats)});
  }
  return out;
}

DatasetSplit normalized_split(const DatasetSplit& split,
                              const NormalizationStats& stats) {
  DatasetSplit out;
  out.train = normalized(split.train, stats);
  out.validation = normalized(split.validation, stats);
  out.test = normalized(split.test, stats);
  out.scenarios = normalized(split.scenarios, stats);
  return out;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  RunConfig c;
  c.data_dir = j.value("data_dir", c.data_dir);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.months = j.value("months", c.months);
  c.resample_factor = j.value("resample_factor", c.resample_factor);
  c.max_gap = j.value("max_gap", c.max_gap);
  c.spike_sigma = j.value("spike_sigma", c.spike_sigma);
  c.family = j.value("family", c.family);
  if (c.family != "lss" && c.family != "nlarx") {
    throw ConfigError("unknown model family '" + c.family + "' (lss|nlarx)");
  }
  if (j.contains("lss")) from_json_ss(j["lss"], c.ss);
  if (j.contains("nlarx")) from_json_nn(j["nlarx"], c.nn);
  if (j.contains("eval")) {
    const json& e = j["eval"];
    c.H = e.value("H", c.H);
    c.past_len = e.value("past_len", c.past_len);
    c.stride = e.value("stride", c.stride);
  }
  if (j.contains("models")) {
    c.models = j["models"].get<std::vector<std::string>>();
  }
  if (j.contains("hyperopt")) {
    const json& h = j["hyperopt"];
    c.budget = h.value("budget", c.budget);
    c.folds = h.value("folds", c.folds);
    c.parallelism = h.value("parallelism", c.parallelism);
  }
  return c;
}

void save_run_config(const RunConfig& c, const std::string& path) {
  json j;
  j["data_dir"] = c.data_dir;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["months"] = c.months;
  j["resample_factor"] = c.resample_factor;
  j["max_gap"] = c.max_gap;
  j["spike_sigma"] = c.spike_sigma;
  j["family"] = c.family;
  j["lss"] = to_json_ss(c.ss);
  j["nlarx"] = to_json_nn(c.nn);
  j["eval"] = {{"H", c.H}, {"past_len", c.past_len}, {"stride", c.stride}};
  j["models"] = c.models;
  j["hyperopt"] = {{"budget", c.budget},
                   {"folds", c.folds},
                   {"parallelism", c.parallelism}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config: " + path);
  out << j.dump(2) << '\n';
}

void cmd_simulate(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  BenchmarkSuite suite =
      generate_benchmark_suite(default_plant_config(), config.seed,
                               config.months);

  // Monthly raw files: split the continuous timeline at civil month
  // boundaries.
  int y, m, d;
  civil_from_days(suite.raw.start_time / 86400, y, m, d);
  UnixTime cursor = suite.raw.start_time;
  const UnixTime end = suite.raw.end_time();
  while (cursor < end) {
    int ny = y, nm = m + 1;
    if (nm > 12) {
      nm = 1;
      ++ny;
    }
    UnixTime next = days_from_civil(ny, nm, 1) * 86400;
    char name[32];
    std::snprintf(name, sizeof(name), "data_%04d-%02d.csv", y, m);
    SignalFrame part = suite.raw.slice_time(cursor, std::min(next, end));
    if (part.n_samples() > 0) {
      save_frame(part, (fs::path(config.out_dir) / name).string());
    }
    cursor = next;
    y = ny;
    m = nm;
  }

  // One file per off-nominal scenario section, for inspection.
  for (const auto& entry : suite.manifest) {
    if (entry.role != "scenario") continue;
    SignalFrame part = suite.raw.slice_time(entry.start, entry.end);
    save_frame(part, (fs::path(config.out_dir) /
                      ("scenario_" + entry.label + ".csv"))
                         .string());
  }

  save_manifest(suite.manifest,
                (fs::path(config.out_dir) / "manifest.json").string());
}

void cmd_prepare(const RunConfig& config) {
  if (config.data_dir.empty()) throw ConfigError("prepare: data_dir required");
  fs::create_directories(config.out_dir);
  const auto schema = benchmark_schema();

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(config.data_dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("data_", 0) == 0 && entry.path().extension() == ".csv") {
      files.push_back(entry.path().string());
    }
  }
  if (files.empty()) {
    throw DataError("prepare: no data_*.csv files in " + config.data_dir);
  }
  std::sort(files.begin(), files.end());

  // Stitch contiguous monthly files back into continuous timelines.
  std::vector<SignalFrame> timelines;
  for (const auto& f : files) {
    SignalFrame frame = load_frame(f, schema);
    if (!timelines.empty() &&
        timelines.back().end_time() == frame.start_time &&
        timelines.back().sample_period == frame.sample_period) {
      SignalFrame& tail = timelines.back();
      Eigen::Index n0 = tail.n_samples();
      tail.values.conservativeResize(n0 + frame.n_samples(), Eigen::NoChange);
      tail.values.bottomRows(frame.n_samples()) = frame.values;
    } else {
      timelines.push_back(std::move(frame));
    }
  }

  // Clean (split around long gaps), then resample to the working period.
  std::vector<SignalFrame> pieces;
  for (const auto& t : timelines) {
    for (auto& piece : clean_and_split(t, config.max_gap, config.spike_sigma,
                                       2L * config.resample_factor)) {
      pieces.push_back(resample_moving_average(piece, config.resample_factor));
    }
  }

  auto manifest = load_manifest(
      (fs::path(config.data_dir) / "manifest.json").string());
  DatasetSplit split = apply_manifest(pieces, manifest);
  check_split_invariants(split);

  NormalizationStats stats;
  {
    std::vector<SignalFrame> train_frames;
    for (const auto& s : split.train) train_frames.push_back(s.frame);
    stats = fit_normalization(train_frames);
  }

  fs::path sections_dir = fs::path(config.out_dir) / "sections";
  fs::create_directories(sections_dir);
  json bundle;
  bundle["sample_period"] = 60L * config.resample_factor;
  json entries = json::array();
  auto dump_role = [&](const std::vector<Section>& sections,
                       const std::string& role) {
    for (const auto& s : sections) {
      std::string file = role + "_" + s.label + ".csv";
      save_frame(s.frame, (sections_dir / file).string());
      entries.push_back({{"label", s.label},
                         {"role", role},
                         {"file", "sections/" + file}});
    }
  };
  dump_role(split.train, "train");
  dump_role(split.validation, "validation");
  dump_role(split.test, "test");
  dump_role(split.scenarios, "scenario");
  bundle["entries"] = entries;

  save_stats(stats, schema, (fs::path(config.out_dir) / "stats.json").string());
  std::ofstream out((fs::path(config.out_dir) / "bundle.json").string());
  if (!out) throw DataError("prepare: cannot write bundle.json");
  out << bundle.dump(2) << '\n';
}

Bundle load_bundle(const std::string& dir) {
  std::ifstream in((fs::path(dir) / "bundle.json").string());
  if (!in) throw DataError("not a prepared bundle (missing bundle.json): " + dir);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bundle.json parse error: " + std::string(e.what()));
  }
  Bundle bundle;
  bundle.schema = benchmark_schema();
  bundle.stats = load_stats((fs::path(dir) / "stats.json").string());
  for (const auto& entry : j.at("entries")) {
    Section s;
    s.label = entry.at("label").get<std::string>();
    std::string role = entry.at("role").get<std::string>();
    s.frame = load_frame(
        (fs::path(dir) / entry.at("file").get<std::string>()).string(),
        bundle.schema);
    if (role == "train") {
      bundle.split.train.push_back(std::move(s));
    } else if (role == "validation") {
      bundle.split.validation.push_back(std::move(s));
    } else if (role == "test") {
      bundle.split.test.push_back(std::move(s));
    } else if (role == "scenario") {
      bundle.split.scenarios.push_back(std::move(s));
    } else {
      throw DataError("bundle.json: unknown role '" + role + "'");
    }
  }
  return bundle;
}

void cmd_train(const RunConfig& config) {
  Bundle bundle = load_bundle(config.data_dir);
  fs::create_directories(config.out_dir);

  if (config.family == "lss") {
    std::vector<SignalFrame> train_frames;
    for (const auto& s : normalized(bundle.split.train, bundle.stats)) {
      train_frames.push_back(s.frame);
    }
    StateSpaceModel model = estimate_subspace(train_frames, config.ss);
    model.stats = bundle.stats;
    save_state_space(model, config.ss,
                     (fs::path(config.out_dir) / "model_lss.json").string());
    return;
  }

  NlarxConfig nn = config.nn;
  nn.n_u = (int)bundle.split.train.at(0).frame.n_inputs();
  nn.n_y = (int)bundle.split.train.at(0).frame.n_outputs();
  nn.seed = config.seed;
  TrainResult result = train(nn, bundle.split, bundle.stats);
  NlarxModel model{nn, result.params, bundle.stats};
  save_nlarx(model, (fs::path(config.out_dir) / "model_nlarx.json").string());

  std::ofstream log((fs::path(config.out_dir) / "train_log.csv").string());
  log << "epoch,train_loss,val_score\n";
  for (const auto& e : result.log) {
    log << e.epoch << ',' << format_double(e.train_loss) << ','
        << format_double(e.val_score) << '\n';
  }
}

namespace {

std::unique_ptr<Forecaster> load_forecaster(const std::string& path,
                                            int past_len) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model parse error in " + path + ": " + e.what());
  }
  std::string type = j.value("type", "");
  std::string label = fs::path(path).stem().string();
  if (type == "state_space") {
    SubspaceOptions opts;
    StateSpaceModel model = load_state_space(path, &opts);
    return std::make_unique<StateSpaceForecaster>(std::move(model), label,
                                                  past_len);
  }
  if (type == "nlarx") {
    return std::make_unique<NlarxForecaster>(load_nlarx(path), label);
  }
  throw DataError("unrecognized model type in " + path);
}

std::vector<std::pair<std::string, CriteriaReport>> evaluate_models(
    const RunConfig& config, const Bundle& bundle) {
  if (config.models.empty()) throw ConfigError("eval: no model files given");
  DatasetSplit norm = normalized_split(bundle.split, bundle.stats);
  std::vector<std::pair<std::string, CriteriaReport>> reports;
  for (const auto& path : config.models) {
    auto fc = load_forecaster(path, config.past_len);
    reports.emplace_back(fc->label(),
                         scenario_eval(*fc, norm, config.H, config.past_len,
                                       config.stride));
  }
  return reports;
}

std::vector<ChannelSpec> output_channels(const std::vector<ChannelSpec>& all) {
  std::vector<ChannelSpec> out;
  for (const auto& c : all) {
    if (c.role == ChannelRole::kOutput) out.push_back(c);
  }
  return out;
}

}  // namespace

void cmd_eval(const RunConfig& config) {
  Bundle bundle = load_bundle(config.data_dir);
  auto reports = evaluate_models(config, bundle);
  fs::create_directories(config.out_dir);
  export_report(reports, output_channels(bundle.schema), config.out_dir);
}

void cmd_report(const RunConfig& config) {
  Bundle bundle = load_bundle(config.data_dir);
  auto reports = evaluate_models(config, bundle);
  fs::create_directories(config.out_dir);
  export_report(reports, output_channels(bundle.schema), config.out_dir);

  std::vector<std::string> scenario_labels;
  for (const auto& [label, rep] : reports) {
    for (const auto& [s, v] : rep.scenario_full) {
      if (std::find(scenario_labels.begin(), scenario_labels.end(), s) ==
          scenario_labels.end()) {
        scenario_labels.push_back(s);
      }
    }
  }
  std::ofstream md((fs::path(config.out_dir) / "summary.md").string());
  if (!md) throw DataError("report: cannot write summary.md");
  md << "# Horizon accuracy (normalized units, lower is better)\n\n";
  md << "| model | full | short | long |";
  for (const auto& s : scenario_labels) md << ' ' << s << " |";
  md << "\n|---|---|---|---|";
  for (size_t i = 0; i < scenario_labels.size(); ++i) md << "---|";
  md << '\n';
  char buf[64];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  for (const auto& [label, rep] : reports) {
    md << "| " << label << " | " << cell(rep.full) << " | "
       << cell(rep.short_term) << " | " << cell(rep.long_term) << " |";
    for (const auto& s : scenario_labels) {
      auto it = rep.scenario_full.find(s);
      md << ' ' << (it != rep.scenario_full.end() ? cell(it->second) : "-")
         << " |";
    }
    md << '\n';
  }

  // Per-channel test accuracy converted back to physical units via the
  // stored normalization scales.
  std::vector<ChannelSpec> outs = output_channels(bundle.schema);
  std::vector<Eigen::Index> out_idx;
  for (Eigen::Index i = 0; i < (Eigen::Index)bundle.schema.size(); ++i) {
    if (bundle.schema[(size_t)i].role == ChannelRole::kOutput) {
      out_idx.push_back(i);
    }
  }
  md << "\n# Test-section full-horizon RMSE per output channel (degC)\n\n";
  md << "| model |";
  for (const auto& c : outs) md << ' ' << c.name << " |";
  md << "\n|---|";
  for (size_t i = 0; i < outs.size(); ++i) md << "---|";
  md << '\n';
  for (const auto& [label, rep] : reports) {
    md << "| " << label << " |";
    for (size_t c = 0; c < outs.size(); ++c) {
      md << ' '
         << cell(rep.per_channel_full((Eigen::Index)c) *
                 bundle.stats.scale(out_idx[c]))
         << " |";
    }
    md << '\n';
  }
}

void cmd_hyperopt(const RunConfig& config) {
  Bundle bundle = load_bundle(config.data_dir);
  fs::create_directories(config.out_dir);

  SearchSpace space;
  space.family =
      config.family == "lss" ? ModelFamily::kStateSpace : ModelFamily::kNlarx;
  space.ss_defaults = config.ss;
  space.nn_defaults = config.nn;
  space.nn_defaults.n_u = (int)bundle.split.train.at(0).frame.n_inputs();
  space.nn_defaults.n_y = (int)bundle.split.train.at(0).frame.n_outputs();

  CvPlan plan = make_cv_plan(bundle.split, config.folds);

  SearchSettings settings;
  settings.budget = config.budget;
  settings.seed = config.seed;
  settings.parallelism = config.parallelism;
  settings.eval_H = config.H;
  settings.eval_past_len = config.past_len;
  settings.eval_stride = config.stride;
  settings.ledger_path = (fs::path(config.out_dir) / "trials.csv").string();

  SearchResult result = run_search(space, plan, bundle.stats, settings);

  // The winner, written as a config fragment consumable by `train`.
  json best;
  best["family"] = config.family;
  best["seed"] = config.seed;
  if (space.family == ModelFamily::kStateSpace) {
    best["lss"] = to_json_ss(result.best.ss);
  } else {
    best["nlarx"] = to_json_nn(result.best.nn);
  }
  best["trial_id"] = result.best_trial;
  std::ofstream out((fs::path(config.out_dir) / "best_config.json").string());
  if (!out) throw DataError("hyperopt: cannot write best_config.json");
  out << best.dump(2) << '\n';
}

}  // namespace poolid
