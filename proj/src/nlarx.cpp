#include "poolid/nlarx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "poolid/errors.hpp"
#include "poolid/rng.hpp"

namespace poolid {

namespace {
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<int> layer_dims(const NlarxConfig& c) {
  std::vector<int> dims{c.input_width()};
  for (int w : c.hidden_layers) dims.push_back(w);
  dims.push_back(c.n_y);
  return dims;
}

// Builds the flattened lag vector for the transition at time t = anchor + p
// (predicting anchor + p + 1). Outputs predicted so far live in `preds`.
void build_input(const NlarxConfig& cfg, const AnchorWindow& w,
                 const MatrixXd& preds, Eigen::Index p, VectorXd& x) {
  const Eigen::Index plen = w.past_outputs.rows();
  const Eigen::Index anchor_row = plen - 1;
  for (int j = 0; j <= cfg.n_a; ++j) {
    Eigen::Index off = p - j;  // time anchor + off
    if (off > 0) {
      x.segment(j * cfg.n_y, cfg.n_y) = preds.row(off - 1).transpose();
    } else {
      x.segment(j * cfg.n_y, cfg.n_y) =
          w.past_outputs.row(anchor_row + off).transpose();
    }
  }
  const int ubase = (cfg.n_a + 1) * cfg.n_y;
  for (int j = 0; j <= cfg.n_b; ++j) {
    Eigen::Index off = p - j;
    if (off >= 0) {
      x.segment(ubase + j * cfg.n_u, cfg.n_u) =
          w.future_inputs.row(off).transpose();
    } else {
      x.segment(ubase + j * cfg.n_u, cfg.n_u) =
          w.past_inputs.row(anchor_row + off).transpose();
    }
  }
}

VectorXd mlp_forward(const MlpParams& params, const VectorXd& x,
                     std::vector<VectorXd>* acts = nullptr) {
  VectorXd h = x;
  if (acts) acts->push_back(h);
  const size_t L = params.weights.size();
  for (size_t k = 0; k < L; ++k) {
    VectorXd z = params.weights[k] * h + params.biases[k];
    h = (k + 1 < L) ? z.array().tanh().matrix() : z;
    if (acts) acts->push_back(h);
  }
  return h;
}

struct WindowGrad {
  double data_loss = 0;
  VectorXd grad;  // d(data_loss)/d theta
};

// Rollout + exact BPTT for one window.
WindowGrad window_grad(const MlpParams& params, const NlarxConfig& cfg,
                       const AnchorWindow& w) {
  const Eigen::Index P = w.future_outputs.rows();
  const size_t L = params.weights.size();
  MatrixXd preds(P, cfg.n_y);
  std::vector<std::vector<VectorXd>> acts((size_t)P);
  VectorXd x(cfg.input_width());
  for (Eigen::Index p = 0; p < P; ++p) {
    build_input(cfg, w, preds, p, x);
    preds.row(p) = mlp_forward(params, x, &acts[(size_t)p]).transpose();
  }

  const double scale = 1.0 / (double)(P * cfg.n_y);
  WindowGrad out;
  MatrixXd err = preds - w.future_outputs;
  out.data_loss = scale * err.array().square().sum();

  MlpParams g = params;  // same shapes
  for (auto& wm : g.weights) wm.setZero();
  for (auto& bv : g.biases) bv.setZero();

  MatrixXd gy = 2.0 * scale * err;  // dL/d preds, updated by feedback below
  for (Eigen::Index p = P - 1; p >= 0; --p) {
    VectorXd delta = gy.row(p).transpose();
    for (size_t k = L; k-- > 0;) {
      const VectorXd& h_in = acts[(size_t)p][k];
      g.weights[k].noalias() += delta * h_in.transpose();
      g.biases[k] += delta;
      if (k == 0) {
        delta = params.weights[k].transpose() * delta;
        break;
      }
      VectorXd dprev = params.weights[k].transpose() * delta;
      delta = dprev.cwiseProduct(
          (1.0 - acts[(size_t)p][k].array().square()).matrix());
    }
    // delta now holds dL/d input of step p; feed back into earlier
    // predicted outputs sitting in the y-lag slots.
    for (int j = 0; j <= cfg.n_a; ++j) {
      Eigen::Index off = p - j;
      if (off > 0) {
        gy.row(off - 1) += delta.segment(j * cfg.n_y, cfg.n_y).transpose();
      }
    }
  }
  out.grad = g.to_vector();
  return out;
}

VectorXd grad_impl(const MlpParams& params, const NlarxConfig& cfg,
                   const std::vector<AnchorWindow>& batch, bool parallel) {
  if (batch.empty()) throw DataError("grad_bptt: empty batch");
  const Eigen::Index n = params.n_params();
  const Eigen::Index N = (Eigen::Index)batch.size();
  MatrixXd per_window(n, N);
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index i = 0; i < N; ++i) {
      per_window.col(i) = window_grad(params, cfg, batch[(size_t)i]).grad;
    }
  } else {
    for (Eigen::Index i = 0; i < N; ++i) {
      per_window.col(i) = window_grad(params, cfg, batch[(size_t)i]).grad;
    }
  }
  VectorXd grad = VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < N; ++i) grad += per_window.col(i);
  grad /= (double)N;

  if (cfg.l2 > 0) {
    // Penalty applies to weights only.
    Eigen::Index off = 0;
    for (size_t k = 0; k < params.weights.size(); ++k) {
      Eigen::Index nw = params.weights[k].size();
      grad.segment(off, nw) +=
          2.0 * cfg.l2 *
          Eigen::Map<const VectorXd>(params.weights[k].data(), nw);
      off += nw + params.biases[k].size();
    }
  }
  return grad;
}

}  // namespace

Eigen::Index MlpParams::n_params() const {
  Eigen::Index n = 0;
  for (size_t k = 0; k < weights.size(); ++k) {
    n += weights[k].size() + biases[k].size();
  }
  return n;
}

Eigen::Index MlpParams::n_weight_params() const {
  Eigen::Index n = 0;
  for (const auto& w : weights) n += w.size();
  return n;
}

VectorXd MlpParams::to_vector() const {
  VectorXd theta(n_params());
  Eigen::Index off = 0;
  for (size_t k = 0; k < weights.size(); ++k) {
    theta.segment(off, weights[k].size()) =
        Eigen::Map<const VectorXd>(weights[k].data(), weights[k].size());
    off += weights[k].size();
    theta.segment(off, biases[k].size()) = biases[k];
    off += biases[k].size();
  }
  return theta;
}

void MlpParams::from_vector(const VectorXd& theta) {
  Eigen::Index off = 0;
  for (size_t k = 0; k < weights.size(); ++k) {
    Eigen::Map<VectorXd>(weights[k].data(), weights[k].size()) =
        theta.segment(off, weights[k].size());
    off += weights[k].size();
    biases[k] = theta.segment(off, biases[k].size());
    off += biases[k].size();
  }
}

MlpParams make_params(const NlarxConfig& config) {
  MlpParams p;
  auto dims = layer_dims(config);
  for (size_t k = 0; k + 1 < dims.size(); ++k) {
    p.weights.emplace_back(MatrixXd::Zero(dims[k + 1], dims[k]));
    p.biases.emplace_back(VectorXd::Zero(dims[k + 1]));
  }
  return p;
}

MlpParams init_params(const NlarxConfig& config, std::uint64_t seed) {
  MlpParams p = make_params(config);
  Rng rng(seed);
  for (auto& w : p.weights) {
    double s = std::sqrt(1.0 / (double)w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = rng.uniform(-s, s);
      }
    }
  }
  return p;
}

void AdamState::update(VectorXd& theta, const VectorXd& grad, double lr) {
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  double bc1 = 1.0 - std::pow(beta1, (double)step);
  double bc2 = 1.0 - std::pow(beta2, (double)step);
  theta -= (lr / bc1) * m.cwiseQuotient(
                            ((v / bc2).cwiseSqrt().array() + eps).matrix());
}

VectorXd predict_one_step(const MlpParams& params, const NlarxConfig& config,
                          const MatrixXd& lagged_y, const MatrixXd& lagged_u) {
  if (lagged_y.rows() != config.n_a + 1 || lagged_y.cols() != config.n_y ||
      lagged_u.rows() != config.n_b + 1 || lagged_u.cols() != config.n_u) {
    throw DataError("predict_one_step: lag shapes do not match config");
  }
  VectorXd x(config.input_width());
  for (int j = 0; j <= config.n_a; ++j) {
    x.segment(j * config.n_y, config.n_y) = lagged_y.row(j).transpose();
  }
  const int ubase = (config.n_a + 1) * config.n_y;
  for (int j = 0; j <= config.n_b; ++j) {
    x.segment(ubase + j * config.n_u, config.n_u) = lagged_u.row(j).transpose();
  }
  return mlp_forward(params, x);
}

MatrixXd rollout(const MlpParams& params, const NlarxConfig& config,
                 const AnchorWindow& window, Eigen::Index horizon) {
  const Eigen::Index P =
      horizon >= 0 ? horizon : window.future_outputs.rows();
  if (window.past_outputs.rows() < config.past_len()) {
    throw DataError("rollout: past window shorter than max lag + 1");
  }
  if (window.future_inputs.rows() < P) {
    throw DataError("rollout: future inputs shorter than horizon");
  }
  MatrixXd preds(P, config.n_y);
  VectorXd x(config.input_width());
  for (Eigen::Index p = 0; p < P; ++p) {
    build_input(config, window, preds, p, x);
    preds.row(p) = mlp_forward(params, x).transpose();
  }
  return preds;
}

double loss(const MlpParams& params, const NlarxConfig& config,
            const std::vector<AnchorWindow>& batch) {
  if (batch.empty()) throw DataError("loss: empty batch");
  double total = 0;
  for (const auto& w : batch) {
    const Eigen::Index P = w.future_outputs.rows();
    MatrixXd preds = rollout(params, config, w);
    total += (preds - w.future_outputs).array().square().sum() /
             (double)(P * config.n_y);
  }
  total /= (double)batch.size();
  if (config.l2 > 0) {
    double w2 = 0;
    for (const auto& w : params.weights) w2 += w.array().square().sum();
    total += config.l2 * w2;
  }
  return total;
}

VectorXd grad_bptt(const MlpParams& params, const NlarxConfig& config,
                   const std::vector<AnchorWindow>& batch) {
  return grad_impl(params, config, batch, true);
}

VectorXd grad_bptt_serial(const MlpParams& params, const NlarxConfig& config,
                          const std::vector<AnchorWindow>& batch) {
  return grad_impl(params, config, batch, false);
}

namespace {

// Validation full-horizon accuracy: per-depth aggregate RMSE over windows,
// then mean over depths (the control-oriented criterion at H = val_horizon).
double validation_score(const MlpParams& params, const NlarxConfig& cfg,
                        const std::vector<AnchorWindow>& val_windows) {
  const Eigen::Index H = val_windows[0].future_outputs.rows();
  const Eigen::Index K = (Eigen::Index)val_windows.size();
  MatrixXd sqsum = MatrixXd::Zero(H, 1);
  std::vector<double> per_window_sq((size_t)(K * H), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index k = 0; k < K; ++k) {
    MatrixXd preds = rollout(params, cfg, val_windows[(size_t)k]);
    for (Eigen::Index h = 0; h < H; ++h) {
      per_window_sq[(size_t)(k * H + h)] =
          (preds.row(h) - val_windows[(size_t)k].future_outputs.row(h))
              .squaredNorm();
    }
  }
  double score = 0;
  for (Eigen::Index h = 0; h < H; ++h) {
    double s = 0;
    for (Eigen::Index k = 0; k < K; ++k) s += per_window_sq[(size_t)(k * H + h)];
    score += std::sqrt(s / (double)K);
  }
  return score / (double)H;
}

}  // namespace

TrainResult train(const NlarxConfig& config, const DatasetSplit& split,
                  const NormalizationStats& stats) {
  if (split.train.empty()) throw DataError("train: no training sections");
  if (split.validation.empty()) throw DataError("train: no validation sections");

  std::vector<AnchorWindow> windows;
  for (const auto& sec : split.train) {
    SignalFrame f = apply_normalization(sec.frame, stats);
    auto w = make_anchor_windows(f, config.past_len(), config.loss_horizon,
                                 config.window_stride);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                   std::make_move_iterator(w.end()));
  }
  if (windows.empty()) throw DataError("train: training sections too short");

  std::vector<AnchorWindow> val_windows;
  for (const auto& sec : split.validation) {
    SignalFrame f = apply_normalization(sec.frame, stats);
    auto w = make_anchor_windows(f, config.past_len(), config.val_horizon,
                                 config.val_stride);
    val_windows.insert(val_windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
  }
  if (val_windows.empty()) {
    throw DataError("train: validation sections too short for val horizon");
  }

  MlpParams params = init_params(config, config.seed);
  VectorXd theta = params.to_vector();
  AdamState adam(theta.size());
  Rng shuffle_rng(config.seed ^ 0x5bf0a8f1u);

  std::vector<Eigen::Index> order(windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = (Eigen::Index)i;

  TrainResult result;
  result.best_val_score = std::numeric_limits<double>::infinity();
  VectorXd best_theta = theta;
  int stale = 0;
  double last_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with our own stream, for reproducibility.
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = (size_t)shuffle_rng.uniform_int(0, (std::int64_t)i - 1);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0;
    Eigen::Index n_batches = 0;
    std::vector<AnchorWindow> batch;
    for (size_t start = 0; start < order.size();
         start += (size_t)config.batch_size) {
      size_t end = std::min(order.size(), start + (size_t)config.batch_size);
      batch.clear();
      for (size_t i = start; i < end; ++i) {
        batch.push_back(windows[(size_t)order[i]]);
      }
      params.from_vector(theta);
      VectorXd grad = grad_bptt(params, config, batch);
      epoch_loss += loss(params, config, batch);
      ++n_batches;
      adam.update(theta, grad, config.learning_rate);
    }
    epoch_loss /= (double)n_batches;
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("train: loss diverged at epoch " +
                         std::to_string(epoch));
    }

    if (epoch % std::max(1, config.val_every) == 0 ||
        epoch == config.epochs - 1) {
      params.from_vector(theta);
      last_val = validation_score(params, config, val_windows);
    }
    result.log.push_back({epoch, epoch_loss, last_val});

    if (last_val < result.best_val_score) {
      result.best_val_score = last_val;
      result.best_epoch = epoch;
      best_theta = theta;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }

  result.params = make_params(config);
  result.params.from_vector(best_theta);
  return result;
}

void save_nlarx(const NlarxModel& model, const std::string& path) {
  nlohmann::json j;
  j["type"] = "nlarx";
  j["config"] = {
      {"n_a", model.config.n_a},         {"n_b", model.config.n_b},
      {"n_u", model.config.n_u},         {"n_y", model.config.n_y},
      {"hidden_layers", model.config.hidden_layers},
      {"l2", model.config.l2},           {"loss_horizon", model.config.loss_horizon},
      {"learning_rate", model.config.learning_rate},
      {"batch_size", model.config.batch_size},
      {"epochs", model.config.epochs},   {"patience", model.config.patience},
      {"seed", model.config.seed},       {"window_stride", model.config.window_stride},
      {"val_stride", model.config.val_stride},
  };
  for (size_t k = 0; k < model.params.weights.size(); ++k) {
    const MatrixXd& w = model.params.weights[k];
    nlohmann::json layer;
    layer["rows"] = w.rows();
    layer["cols"] = w.cols();
    std::vector<double> flat;
    flat.reserve((size_t)w.size());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(i, c));
    }
    layer["weights"] = flat;
    layer["biases"] = std::vector<double>(model.params.biases[k].begin(),
                                          model.params.biases[k].end());
    j["layers"].push_back(std::move(layer));
  }
  if (model.stats) {
    j["stats"] = {{"mean", std::vector<double>(model.stats->mean.begin(),
                                               model.stats->mean.end())},
                  {"scale", std::vector<double>(model.stats->scale.begin(),
                                                model.stats->scale.end())}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << j.dump(2) << '\n';
}

NlarxModel load_nlarx(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("type", "") != "nlarx") {
    throw DataError(path + ": not an NLARX model file");
  }
  NlarxModel model;
  const auto& c = j.at("config");
  model.config.n_a = c.at("n_a").get<int>();
  model.config.n_b = c.at("n_b").get<int>();
  model.config.n_u = c.at("n_u").get<int>();
  model.config.n_y = c.at("n_y").get<int>();
  model.config.hidden_layers = c.at("hidden_layers").get<std::vector<int>>();
  model.config.l2 = c.at("l2").get<double>();
  model.config.loss_horizon = c.at("loss_horizon").get<int>();
  model.config.learning_rate = c.at("learning_rate").get<double>();
  model.config.batch_size = c.at("batch_size").get<int>();
  model.config.epochs = c.at("epochs").get<int>();
  model.config.patience = c.at("patience").get<int>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  model.config.window_stride = c.at("window_stride").get<int>();
  model.config.val_stride = c.at("val_stride").get<int>();

  model.params = make_params(model.config);
  const auto& layers = j.at("layers");
  if (layers.size() != model.params.weights.size()) {
    throw DataError(path + ": layer count does not match config");
  }
  for (size_t k = 0; k < layers.size(); ++k) {
    MatrixXd& w = model.params.weights[k];
    auto flat = layers[k].at("weights").get<std::vector<double>>();
    if ((Eigen::Index)flat.size() != w.size()) {
      throw DataError(path + ": layer weight size mismatch");
    }
    size_t idx = 0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index cc = 0; cc < w.cols(); ++cc) w(i, cc) = flat[idx++];
    }
    auto bv = layers[k].at("biases").get<std::vector<double>>();
    model.params.biases[k] =
        Eigen::Map<VectorXd>(bv.data(), (Eigen::Index)bv.size());
  }
  if (j.contains("stats")) {
    NormalizationStats st;
    auto mv = j["stats"].at("mean").get<std::vector<double>>();
    auto sv = j["stats"].at("scale").get<std::vector<double>>();
    st.mean = Eigen::Map<VectorXd>(mv.data(), (Eigen::Index)mv.size());
    st.scale = Eigen::Map<VectorXd>(sv.data(), (Eigen::Index)sv.size());
    model.stats = std::move(st);
  }
  return model;
}

}  // namespace poolid
