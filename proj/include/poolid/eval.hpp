#ifndef POOLID_EVAL_HPP
#define POOLID_EVAL_HPP

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "poolid/data.hpp"
#include "poolid/linid.hpp"
#include "poolid/nlarx.hpp"

namespace poolid {

// Anything that can predict H steps ahead from a past window of all
// channels plus known future inputs. Works in normalized units.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  // past: past_len x n_channels (schema order); future_inputs row h is the
  // input driving the transition into prediction step h+1.
  virtual Eigen::MatrixXd forecast_window(const AnchorWindow& window,
                                          Eigen::Index horizon) const = 0;
  virtual Eigen::Index min_past() const = 0;
  virtual std::string label() const = 0;
};

class StateSpaceForecaster final : public Forecaster {
 public:
  StateSpaceForecaster(StateSpaceModel model, std::string label,
                       int past_len = 20)
      : model_(std::move(model)), label_(std::move(label)),
        past_len_(past_len) {}
  Eigen::MatrixXd forecast_window(const AnchorWindow& window,
                                  Eigen::Index horizon) const override;
  Eigen::Index min_past() const override { return past_len_; }
  std::string label() const override { return label_; }
  const StateSpaceModel& model() const { return model_; }

 private:
  StateSpaceModel model_;
  std::string label_;
  int past_len_;
};

class NlarxForecaster final : public Forecaster {
 public:
  NlarxForecaster(NlarxModel model, std::string label)
      : model_(std::move(model)), label_(std::move(label)) {}
  Eigen::MatrixXd forecast_window(const AnchorWindow& window,
                                  Eigen::Index horizon) const override;
  Eigen::Index min_past() const override { return model_.config.past_len(); }
  std::string label() const override { return label_; }
  const NlarxModel& model() const { return model_; }

 private:
  NlarxModel model_;
  std::string label_;
};

// Per-depth, per-channel RMSE over an H-step horizon, aggregated over all
// admissible anchors of a section ("convolutive" evaluation). The aggregate
// column norm sums squared channel errors without dividing by n_y.
struct HorizonMetrics {
  Eigen::MatrixXd per_depth_per_channel_rmse;  // H x n_y
  Eigen::VectorXd per_depth_aggregate_rmse;    // H
  Eigen::Index anchor_count = 0;
  Eigen::Index H = 48;
};

HorizonMetrics horizon_rmse(const Forecaster& model,
                            const SignalFrame& section, Eigen::Index H = 48,
                            Eigen::Index past_len = 20,
                            Eigen::Index stride = 1);
HorizonMetrics horizon_rmse_serial(const Forecaster& model,
                                   const SignalFrame& section,
                                   Eigen::Index H = 48,
                                   Eigen::Index past_len = 20,
                                   Eigen::Index stride = 1);

// Pools anchors of several sections into one metric.
HorizonMetrics horizon_rmse_sections(const Forecaster& model,
                                     const std::vector<Section>& sections,
                                     Eigen::Index H = 48,
                                     Eigen::Index past_len = 20,
                                     Eigen::Index stride = 1);

// L(I, J): mean of per-depth aggregate RMSE over depths I..J (1-based).
double criterion(const HorizonMetrics& metrics, Eigen::Index I,
                 Eigen::Index J);

struct CriteriaReport {
  double full = 0;   // L(1, H)
  double short_term = 0;  // L(1, H/4)
  double long_term = 0;   // L(3H/4, H)
  Eigen::VectorXd per_channel_full;  // full-horizon criterion per channel
  std::map<std::string, double> scenario_full;  // label -> full-horizon acc
  HorizonMetrics test_metrics;
  std::map<std::string, HorizonMetrics> scenario_metrics;
};

// Test-set criteria plus full-horizon accuracy per scenario section.
// Sections must already be in normalized units.
CriteriaReport scenario_eval(const Forecaster& model, const DatasetSplit& split,
                             Eigen::Index H = 48, Eigen::Index past_len = 20,
                             Eigen::Index stride = 1);

// Writes `criteria.csv` (one row per model) and per-model
// `curve_<label>.csv` files (`depth,channel,rmse` rows) under `dir`.
void export_report(
    const std::vector<std::pair<std::string, CriteriaReport>>& reports,
    const std::vector<ChannelSpec>& output_channels, const std::string& dir);

}  // namespace poolid

#endif
