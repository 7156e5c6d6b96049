#ifndef POOLID_NLARX_HPP
#define POOLID_NLARX_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "poolid/data.hpp"

namespace poolid {

// MLP-based NLARX predictor: y[k+1] = f(y[k..k-n_a], u[k..k-n_b]) with tanh
// hidden layers and a linear output layer. Trained on normalized signals
// with the multi-step rollout loss.
struct NlarxConfig {
  int n_a = 5;
  int n_b = 5;
  int n_u = 10;
  int n_y = 2;
  std::vector<int> hidden_layers = {32};
  double l2 = 0.0;
  int loss_horizon = 8;  // P
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 200;
  int patience = 20;
  std::uint64_t seed = 1;

  // Training plumbing (not part of the hyperparameter space).
  int window_stride = 1;
  int val_horizon = 48;
  int val_stride = 16;
  int val_every = 1;

  int input_width() const { return (n_a + 1) * n_y + (n_b + 1) * n_u; }
  int max_lag() const { return std::max(n_a, n_b); }
  int past_len() const { return max_lag() + 1; }
};

struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // layer k: out x in
  std::vector<Eigen::VectorXd> biases;

  Eigen::Index n_params() const;
  Eigen::Index n_weight_params() const;
  Eigen::VectorXd to_vector() const;
  void from_vector(const Eigen::VectorXd& theta);
};

MlpParams make_params(const NlarxConfig& config);          // zero-initialized
MlpParams init_params(const NlarxConfig& config, std::uint64_t seed);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
  void update(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
};

// One-step prediction. lagged_y rows are y[k], y[k-1], ..., y[k-n_a];
// lagged_u likewise for inputs.
Eigen::VectorXd predict_one_step(const MlpParams& params,
                                 const NlarxConfig& config,
                                 const Eigen::MatrixXd& lagged_y,
                                 const Eigen::MatrixXd& lagged_u);

// Recursive multi-step prediction over a window: predicted outputs replace
// measured ones in the lag buffer; inputs come from window.future_inputs.
// Horizon defaults to the window's P; pass a smaller `horizon` to truncate.
Eigen::MatrixXd rollout(const MlpParams& params, const NlarxConfig& config,
                        const AnchorWindow& window, Eigen::Index horizon = -1);

// Mean over windows of mean-over-(P steps, n_y channels) squared rollout
// error, plus l2 * ||weights||^2 (biases excluded).
double loss(const MlpParams& params, const NlarxConfig& config,
            const std::vector<AnchorWindow>& batch);

// Exact gradient of `loss` by backpropagation through the recursive
// feedback path. OpenMP-parallel over windows with an ordered reduction;
// results are identical to grad_bptt_serial bit for bit.
Eigen::VectorXd grad_bptt(const MlpParams& params, const NlarxConfig& config,
                          const std::vector<AnchorWindow>& batch);
Eigen::VectorXd grad_bptt_serial(const MlpParams& params,
                                 const NlarxConfig& config,
                                 const std::vector<AnchorWindow>& batch);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double val_score = 0;  // full-horizon accuracy on validation sections
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochLog> log;
  double best_val_score = 0;
  int best_epoch = -1;
};

// Mini-batch Adam over shuffled anchor windows from the (normalized) train
// sections, early stopping on validation full-horizon accuracy. Deterministic
// given (config, data, seed).
TrainResult train(const NlarxConfig& config, const DatasetSplit& split,
                  const NormalizationStats& stats);

struct NlarxModel {
  NlarxConfig config;
  MlpParams params;
  std::optional<NormalizationStats> stats;
};

void save_nlarx(const NlarxModel& model, const std::string& path);
NlarxModel load_nlarx(const std::string& path);

}  // namespace poolid

#endif
