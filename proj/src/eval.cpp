#include "poolid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "poolid/errors.hpp"
#include "poolid/timeutil.hpp"

namespace poolid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd StateSpaceForecaster::forecast_window(const AnchorWindow& window,
                                               Eigen::Index horizon) const {
  Eigen::Index plen = window.past_inputs.rows();
  Eigen::Index use = std::min<Eigen::Index>(plen, past_len_);
  MatrixXd past(use, window.past_inputs.cols() + window.past_outputs.cols());
  past << window.past_inputs.bottomRows(use),
      window.past_outputs.bottomRows(use);
  return forecast(model_, past, window.future_inputs.topRows(horizon));
}

MatrixXd NlarxForecaster::forecast_window(const AnchorWindow& window,
                                          Eigen::Index horizon) const {
  return rollout(model_.params, model_.config, window, horizon);
}

namespace {

HorizonMetrics horizon_impl(const Forecaster& model, const SignalFrame& section,
                            Eigen::Index H, Eigen::Index past_len,
                            Eigen::Index stride, bool parallel) {
  if (H < 1) throw ConfigError("horizon_rmse: H must be >= 1");
  Eigen::Index plen = std::max<Eigen::Index>(past_len, model.min_past());
  auto windows = make_anchor_windows(section, plen, H, stride);
  if (windows.empty()) {
    throw DataError("horizon_rmse: section too short for one anchor");
  }
  const Eigen::Index K = (Eigen::Index)windows.size();
  const Eigen::Index ny = windows[0].future_outputs.cols();

  // Per-anchor squared errors, reduced in anchor order afterwards so the
  // result does not depend on the thread schedule.
  std::vector<MatrixXd> sq((size_t)K);
  auto body = [&](Eigen::Index k) {
    MatrixXd pred = model.forecast_window(windows[(size_t)k], H);
    sq[(size_t)k] =
        (pred - windows[(size_t)k].future_outputs).array().square().matrix();
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index k = 0; k < K; ++k) body(k);
  } else {
    for (Eigen::Index k = 0; k < K; ++k) body(k);
  }

  MatrixXd acc = MatrixXd::Zero(H, ny);
  for (Eigen::Index k = 0; k < K; ++k) acc += sq[(size_t)k];

  HorizonMetrics m;
  m.H = H;
  m.anchor_count = K;
  m.per_depth_per_channel_rmse = (acc / (double)K).cwiseSqrt();
  m.per_depth_aggregate_rmse = (acc.rowwise().sum() / (double)K).cwiseSqrt();
  return m;
}

HorizonMetrics pool_metrics(const std::vector<HorizonMetrics>& parts) {
  if (parts.empty()) throw DataError("no sections to evaluate");
  const Eigen::Index H = parts[0].H;
  const Eigen::Index ny = parts[0].per_depth_per_channel_rmse.cols();
  MatrixXd acc = MatrixXd::Zero(H, ny);
  Eigen::Index K = 0;
  for (const auto& p : parts) {
    acc += p.per_depth_per_channel_rmse.array().square().matrix() *
           (double)p.anchor_count;
    K += p.anchor_count;
  }
  HorizonMetrics m;
  m.H = H;
  m.anchor_count = K;
  m.per_depth_per_channel_rmse = (acc / (double)K).cwiseSqrt();
  m.per_depth_aggregate_rmse = (acc.rowwise().sum() / (double)K).cwiseSqrt();
  return m;
}

}  // namespace

HorizonMetrics horizon_rmse(const Forecaster& model, const SignalFrame& section,
                            Eigen::Index H, Eigen::Index past_len,
                            Eigen::Index stride) {
  return horizon_impl(model, section, H, past_len, stride, true);
}

HorizonMetrics horizon_rmse_serial(const Forecaster& model,
                                   const SignalFrame& section, Eigen::Index H,
                                   Eigen::Index past_len, Eigen::Index stride) {
  return horizon_impl(model, section, H, past_len, stride, false);
}

HorizonMetrics horizon_rmse_sections(const Forecaster& model,
                                     const std::vector<Section>& sections,
                                     Eigen::Index H, Eigen::Index past_len,
                                     Eigen::Index stride) {
  std::vector<HorizonMetrics> parts;
  for (const auto& s : sections) {
    parts.push_back(horizon_rmse(model, s.frame, H, past_len, stride));
  }
  return pool_metrics(parts);
}

double criterion(const HorizonMetrics& metrics, Eigen::Index I,
                 Eigen::Index J) {
  if (I < 1 || J < I || J > metrics.H) {
    throw ConfigError("criterion: require 1 <= I <= J <= H");
  }
  return metrics.per_depth_aggregate_rmse.segment(I - 1, J - I + 1).mean();
}

CriteriaReport scenario_eval(const Forecaster& model, const DatasetSplit& split,
                             Eigen::Index H, Eigen::Index past_len,
                             Eigen::Index stride) {
  CriteriaReport report;
  if (split.test.empty()) throw DataError("scenario_eval: no test sections");
  report.test_metrics =
      horizon_rmse_sections(model, split.test, H, past_len, stride);
  report.full = criterion(report.test_metrics, 1, H);
  report.short_term = criterion(report.test_metrics, 1, H / 4);
  report.long_term = criterion(report.test_metrics, 3 * H / 4, H);
  const Eigen::Index ny = report.test_metrics.per_depth_per_channel_rmse.cols();
  report.per_channel_full.resize(ny);
  for (Eigen::Index c = 0; c < ny; ++c) {
    report.per_channel_full(c) =
        report.test_metrics.per_depth_per_channel_rmse.col(c).mean();
  }
  for (const auto& sec : split.scenarios) {
    try {
      HorizonMetrics m = horizon_rmse(model, sec.frame, H, past_len, stride);
      report.scenario_full[sec.label] = criterion(m, 1, H);
      report.scenario_metrics[sec.label] = std::move(m);
    } catch (const DataError& e) {
      throw DataError("scenario section '" + sec.label + "': " + e.what());
    }
  }
  return report;
}

void export_report(
    const std::vector<std::pair<std::string, CriteriaReport>>& reports,
    const std::vector<ChannelSpec>& output_channels, const std::string& dir) {
  std::filesystem::create_directories(dir);

  // Collect the union of scenario labels in first-seen order.
  std::vector<std::string> scenario_labels;
  for (const auto& [label, rep] : reports) {
    for (const auto& [s, v] : rep.scenario_full) {
      if (std::find(scenario_labels.begin(), scenario_labels.end(), s) ==
          scenario_labels.end()) {
        scenario_labels.push_back(s);
      }
    }
  }

  std::ofstream table(dir + "/criteria.csv");
  if (!table) throw DataError("cannot write report table");
  table << "model,full,short,long";
  for (const auto& s : scenario_labels) table << ',' << s;
  for (const auto& c : output_channels) table << ",full_" << c.name;
  table << '\n';
  for (const auto& [label, rep] : reports) {
    table << label << ',' << format_double(rep.full) << ','
          << format_double(rep.short_term) << ','
          << format_double(rep.long_term);
    for (const auto& s : scenario_labels) {
      auto it = rep.scenario_full.find(s);
      table << ',';
      if (it != rep.scenario_full.end()) table << format_double(it->second);
    }
    for (Eigen::Index c = 0; c < rep.per_channel_full.size(); ++c) {
      table << ',' << format_double(rep.per_channel_full(c));
    }
    table << '\n';
  }
  table.close();

  for (const auto& [label, rep] : reports) {
    std::ofstream curve(dir + "/curve_" + label + ".csv");
    if (!curve) throw DataError("cannot write curve file");
    curve << "depth,channel,rmse\n";
    const auto& m = rep.test_metrics.per_depth_per_channel_rmse;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::string cname = (size_t)c < output_channels.size()
                              ? output_channels[(size_t)c].name
                              : "y" + std::to_string(c);
      for (Eigen::Index h = 0; h < m.rows(); ++h) {
        curve << (h + 1) << ',' << cname << ',' << format_double(m(h, c))
              << '\n';
      }
    }
  }
}

}  // namespace poolid
