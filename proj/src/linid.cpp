#include "poolid/linid.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "poolid/errors.hpp"
#include "poolid/rng.hpp"

namespace poolid {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  MatrixXd m((Eigen::Index)j.size(), j.empty() ? 0 : (Eigen::Index)j[0].size());
  for (size_t i = 0; i < j.size(); ++i) {
    for (size_t k = 0; k < j[i].size(); ++k) {
      m((Eigen::Index)i, (Eigen::Index)k) = j[i][k].get<double>();
    }
  }
  return m;
}

MatrixXd radial_projection(const MatrixXd& A, double radius) {
  Eigen::EigenSolver<MatrixXd> es(A);
  Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::VectorXcd d = es.eigenvalues();
  bool changed = false;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    double mag = std::abs(d(i));
    if (mag >= 1.0) {
      d(i) *= radius / mag;
      changed = true;
    }
  }
  if (!changed) return A;
  Eigen::MatrixXcd Ap = V * d.asDiagonal() * V.inverse();
  return Ap.real();
}

}  // namespace

double StateSpaceModel::spectral_radius() const {
  if (A.size() == 0) return 0.0;
  return Eigen::EigenSolver<MatrixXd>(A, false)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

MatrixXd StateSpaceModel::markov_parameter(int i) const {
  MatrixXd Ai = MatrixXd::Identity(n_x, n_x);
  for (int k = 0; k < i; ++k) Ai = A * Ai;
  return C * Ai * B;
}

StateSpaceModel estimate_subspace(const std::vector<SignalFrame>& frames,
                                  const SubspaceOptions& opts) {
  std::vector<std::pair<MatrixXd, MatrixXd>> sections;
  sections.reserve(frames.size());
  for (const auto& f : frames) sections.emplace_back(f.inputs(), f.outputs());
  return estimate_subspace(sections, opts);
}

StateSpaceModel estimate_subspace(
    const std::vector<std::pair<MatrixXd, MatrixXd>>& sections,
    const SubspaceOptions& opts) {
  if (sections.empty()) throw DataError("estimate_subspace: no sections");
  const int i = opts.horizon();
  const int nx = opts.n_x;
  if (i <= nx) throw ConfigError("block horizon must exceed n_x");
  const int m = (int)sections[0].first.cols();
  const int l = (int)sections[0].second.cols();

  // Hankel columns per section (never spanning a boundary).
  std::vector<Eigen::Index> cols_per_section;
  Eigen::Index total_cols = 0;
  for (const auto& [U, Y] : sections) {
    if (U.rows() != Y.rows() || (int)U.cols() != m || (int)Y.cols() != l) {
      throw DataError("estimate_subspace: inconsistent section shapes");
    }
    Eigen::Index c = U.rows() - 2 * i + 1;
    cols_per_section.push_back(std::max<Eigen::Index>(0, c));
    total_cols += cols_per_section.back();
  }
  const int rows_uf = i * m, rows_up = i * m, rows_yp = i * l, rows_yf = i * l;
  const int R = rows_uf + rows_up + rows_yp + rows_yf;
  Eigen::Index col_stride = 1;
  if (opts.max_hankel_columns > 0 && total_cols > opts.max_hankel_columns) {
    col_stride = (total_cols + opts.max_hankel_columns - 1) /
                 opts.max_hankel_columns;
  }
  Eigen::Index j_sel = 0;
  for (Eigen::Index c : cols_per_section) j_sel += (c + col_stride - 1) / col_stride;
  if (j_sel < R) {
    throw DataError("estimate_subspace: sections too short for block horizon");
  }

  // Stacked data matrix [U_f; U_p; Y_p; Y_f], one Hankel column per anchor.
  // Subsampled anchors are jittered within each stride window (fixed seed):
  // a constant stride can alias strictly periodic input channels (e.g. daily
  // schedules) into an artificially rank-deficient Hankel block.
  Rng jitter(0x48616e6b656c6a74ull);
  MatrixXd H(R, j_sel);
  Eigen::Index col = 0;
  for (size_t s = 0; s < sections.size(); ++s) {
    const MatrixXd& U = sections[s].first;
    const MatrixXd& Y = sections[s].second;
    for (Eigen::Index c = 0; c < cols_per_section[s]; c += col_stride, ++col) {
      Eigen::Index a = c;
      if (col_stride > 1) {
        a = std::min<Eigen::Index>(
            c + (Eigen::Index)(jitter.next_u64() % (std::uint64_t)col_stride),
            cols_per_section[s] - 1);
      }
      for (int t = 0; t < i; ++t) {
        H.block(t * m, col, m, 1) = U.row(a + i + t).transpose();
        H.block(rows_uf + t * m, col, m, 1) = U.row(a + t).transpose();
        H.block(rows_uf + rows_up + t * l, col, l, 1) = Y.row(a + t).transpose();
        H.block(rows_uf + rows_up + rows_yp + t * l, col, l, 1) =
            Y.row(a + i + t).transpose();
      }
    }
  }

  // LQ factorization via QR of the transpose.
  Eigen::HouseholderQR<MatrixXd> qr(H.transpose());
  MatrixXd L = qr.matrixQR()
                   .topRows(R)
                   .triangularView<Eigen::Upper>()
                   .toDenseMatrix()
                   .transpose();

  // Excitation check: the input block-Hankel [U_f; U_p] must have full row
  // rank, visible on the leading diagonal of L.
  const int rows_u = rows_uf + rows_up;
  // Tolerance is loose on purpose: operational data often carries nearly
  // collinear channels that are still usable, while truly degenerate inputs
  // (constant or zero channels) produce exact zeros here.
  double dmax = L.diagonal().head(rows_u).cwiseAbs().maxCoeff();
  Eigen::Index weakest = 0;
  double dmin = L.diagonal().head(rows_u).cwiseAbs().minCoeff(&weakest);
  if (dmax <= 0 || dmin < 1e-11 * dmax) {
    throw DataError(
        "estimate_subspace: input Hankel is rank deficient (inputs not "
        "persistently exciting; weakest input channel " +
        std::to_string(weakest % m) + ", relative pivot " +
        std::to_string(dmax > 0 ? dmin / dmax : 0.0) + ")");
  }

  const int wp_rows = rows_up + rows_yp;
  MatrixXd L22 = L.block(rows_uf, rows_uf, wp_rows, wp_rows);
  MatrixXd L32 = L.block(rows_uf + wp_rows, rows_uf, rows_yf, wp_rows);

  Eigen::BDCSVD<MatrixXd> svd(L32, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().size() < nx ||
      svd.singularValues()(nx - 1) <= 0) {
    throw NumericError("estimate_subspace: projection SVD rank below n_x");
  }
  VectorXd sv = svd.singularValues().head(nx);
  MatrixXd gamma = svd.matrixU().leftCols(nx) * sv.cwiseSqrt().asDiagonal();

  StateSpaceModel model;
  model.n_x = nx;
  model.C = gamma.topRows(l);
  // Shift-invariance least squares for A.
  MatrixXd g_up = gamma.topRows((i - 1) * l);
  MatrixXd g_dn = gamma.bottomRows((i - 1) * l);
  model.A = g_up.colPivHouseholderQr().solve(g_dn);

  double rho = Eigen::EigenSolver<MatrixXd>(model.A, false)
                   .eigenvalues()
                   .cwiseAbs()
                   .maxCoeff();
  if (rho >= 1.0) {
    if (opts.stabilize) {
      model.A = radial_projection(model.A, 0.999);
    } else if (opts.focus == SubspaceFocus::kSimulation) {
      throw NumericError(
          "estimate_subspace: unstable A estimate (spectral radius " +
          std::to_string(rho) + ") with simulation focus");
    }
  }

  // State sequence from the oblique projection, per section, stride 1:
  // x_hat[c+i] = pinv(Gamma) * L32 * pinv(L22) * Wp(:, c).
  MatrixXd T =
      gamma.completeOrthogonalDecomposition().pseudoInverse() * L32 *
      L22.completeOrthogonalDecomposition().pseudoInverse();  // nx x wp_rows
  std::vector<MatrixXd> xhat(sections.size());
  VectorXd wp(wp_rows);
  for (size_t s = 0; s < sections.size(); ++s) {
    const MatrixXd& U = sections[s].first;
    const MatrixXd& Y = sections[s].second;
    Eigen::Index nc = cols_per_section[s];
    xhat[s].resize(nx, std::max<Eigen::Index>(0, nc));
    for (Eigen::Index c = 0; c < nc; ++c) {
      for (int t = 0; t < i; ++t) {
        wp.segment(t * m, m) = U.row(c + t).transpose();
        wp.segment(rows_up + t * l, l) = Y.row(c + t).transpose();
      }
      xhat[s].col(c) = T * wp;
    }
  }

  const bool want_k = opts.noise_model == NoiseModel::kEstimate;

  if (opts.focus == SubspaceFocus::kSimulation) {
    // B (and one initial state per section) from the exact multi-step
    // simulation regression: y[k] = C A^k x0 + C S[k] vec(B), with the
    // state sensitivity S[k+1] = A S[k] + kron(u[k]', I).
    const int nb = nx * m;
    const int p = (int)sections.size() * nx + nb;
    MatrixXd gtg = MatrixXd::Zero(p, p);
    VectorXd gty = VectorXd::Zero(p);
    MatrixXd row(l, p);
    for (size_t s = 0; s < sections.size(); ++s) {
      const MatrixXd& U = sections[s].first;
      const MatrixXd& Y = sections[s].second;
      MatrixXd M = MatrixXd::Identity(nx, nx);
      MatrixXd S = MatrixXd::Zero(nx, nb);
      const int x0_off = (int)s * nx;
      for (Eigen::Index k = 0; k < U.rows(); ++k) {
        row.setZero();
        row.middleCols(x0_off, nx) = model.C * M;
        row.rightCols(nb) = model.C * S;
        gtg.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose());
        gty.noalias() += row.transpose() * Y.row(k).transpose();
        // advance
        MatrixXd AS = model.A * S;
        for (int q = 0; q < m; ++q) {
          AS.middleCols(q * nx, nx) +=
              U(k, q) * MatrixXd::Identity(nx, nx);
        }
        S = std::move(AS);
        M = model.A * M;
      }
    }
    VectorXd beta =
        MatrixXd(gtg.selfadjointView<Eigen::Lower>()).ldlt().solve(gty);
    model.B = Eigen::Map<MatrixXd>(beta.data() + p - nx * m, nx, m);
  } else {
    // Prediction focus: B from the one-step state-sequence regression.
    // Solved jointly with K when a noise model is requested.
    const int zr = m + (want_k ? l : 0);
    MatrixXd ztz = MatrixXd::Zero(zr, zr);
    MatrixXd ztd = MatrixXd::Zero(zr, nx);
    VectorXd z(zr);
    for (size_t s = 0; s < sections.size(); ++s) {
      const MatrixXd& U = sections[s].first;
      const MatrixXd& Y = sections[s].second;
      for (Eigen::Index c = 0; c + 1 < xhat[s].cols(); ++c) {
        VectorXd delta = xhat[s].col(c + 1) - model.A * xhat[s].col(c);
        z.head(m) = U.row(c + i).transpose();
        if (want_k) {
          z.tail(l) = Y.row(c + i).transpose() - model.C * xhat[s].col(c);
        }
        ztz.noalias() += z * z.transpose();
        ztd.noalias() += z * delta.transpose();
      }
    }
    MatrixXd bk = ztz.ldlt().solve(ztd).transpose();  // nx x zr
    model.B = bk.leftCols(m);
    if (want_k) model.K = bk.rightCols(l);
  }

  if (want_k && !model.K) {
    // Simulation focus: fit K on the one-step residuals of the state
    // sequence after B is fixed.
    MatrixXd ete = MatrixXd::Zero(l, l);
    MatrixXd etd = MatrixXd::Zero(l, nx);
    for (size_t s = 0; s < sections.size(); ++s) {
      const MatrixXd& U = sections[s].first;
      const MatrixXd& Y = sections[s].second;
      for (Eigen::Index c = 0; c + 1 < xhat[s].cols(); ++c) {
        VectorXd e = Y.row(c + i).transpose() - model.C * xhat[s].col(c);
        VectorXd delta = xhat[s].col(c + 1) - model.A * xhat[s].col(c) -
                         model.B * U.row(c + i).transpose();
        ete.noalias() += e * e.transpose();
        etd.noalias() += e * delta.transpose();
      }
    }
    model.K = ete.ldlt().solve(etd).transpose();
  }

  if (model.K) {
    // Keep the predictor A - K C stable; shrink K if the regression
    // overshoots, drop it if shrinking does not help.
    MatrixXd K = *model.K;
    for (int it = 0; it < 20; ++it) {
      double prho = Eigen::EigenSolver<MatrixXd>(model.A - K * model.C, false)
                        .eigenvalues()
                        .cwiseAbs()
                        .maxCoeff();
      if (prho < 1.0) {
        model.K = K;
        return model;
      }
      K *= 0.5;
    }
    model.K.reset();
  }
  return model;
}

Eigen::VectorXd estimate_initial_state(const StateSpaceModel& model,
                                       const MatrixXd& past) {
  const int nx = model.n_x;
  const int m = model.n_u();
  const int l = model.n_y();
  const Eigen::Index T = past.rows();
  if (past.cols() != m + l) {
    throw DataError("estimate_initial_state: past must have n_u+n_y columns");
  }
  if (T < nx) throw DataError("estimate_initial_state: past window too short");

  MatrixXd phi = model.A;
  if (model.K) phi -= *model.K * model.C;

  // y[t] - C r[t] = C phi^t x0, with r the known-input (and innovation)
  // contribution.
  MatrixXd obs(T * l, nx);
  VectorXd rhs(T * l);
  MatrixXd phit = MatrixXd::Identity(nx, nx);
  VectorXd r = VectorXd::Zero(nx);
  for (Eigen::Index t = 0; t < T; ++t) {
    obs.middleRows(t * l, l) = model.C * phit;
    rhs.segment(t * l, l) =
        past.row(t).tail(l).transpose() - model.C * r;
    r = phi * r + model.B * past.row(t).head(m).transpose();
    if (model.K) r += *model.K * past.row(t).tail(l).transpose();
    phit = phi * phit;
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(obs);
  if (qr.rank() < nx) {
    throw NumericError("estimate_initial_state: observability rank below n_x");
  }
  VectorXd x0 = qr.solve(rhs);
  // Position at the window end: propagate through T-1 transitions.
  VectorXd x = x0;
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    x = phi * x + model.B * past.row(t).head(m).transpose();
    if (model.K) x += *model.K * past.row(t).tail(l).transpose();
  }
  return x;
}

MatrixXd forecast(const StateSpaceModel& model, const MatrixXd& past,
                  const MatrixXd& future_inputs) {
  const int m = model.n_u();
  const int l = model.n_y();
  const Eigen::Index T = past.rows();
  const Eigen::Index H = future_inputs.rows();
  if (future_inputs.cols() != m) {
    throw DataError("forecast: future_inputs must have n_u columns");
  }
  VectorXd x_end = estimate_initial_state(model, past);

  // Transition out of the anchor sample still sees its measured output.
  VectorXd x = model.A * x_end + model.B * past.row(T - 1).head(m).transpose();
  if (model.K) {
    x += *model.K *
         (past.row(T - 1).tail(l).transpose() - model.C * x_end);
  }

  MatrixXd yhat(H, l);
  for (Eigen::Index h = 0; h < H; ++h) {
    if (h > 0) x = model.A * x + model.B * future_inputs.row(h).transpose();
    yhat.row(h) = (model.C * x).transpose();
  }
  return yhat;
}

void save_state_space(const StateSpaceModel& model, const SubspaceOptions& opts,
                      const std::string& path) {
  nlohmann::json j;
  j["type"] = "state_space";
  j["n_x"] = model.n_x;
  j["n_u"] = model.n_u();
  j["n_y"] = model.n_y();
  j["A"] = matrix_to_json(model.A);
  j["B"] = matrix_to_json(model.B);
  j["C"] = matrix_to_json(model.C);
  if (model.K) j["K"] = matrix_to_json(*model.K);
  j["options"] = {
      {"block_horizon", opts.block_horizon},
      {"noise_model", opts.noise_model == NoiseModel::kEstimate ? "estimate"
                                                                : "none"},
      {"focus", opts.focus == SubspaceFocus::kSimulation ? "simulation"
                                                         : "prediction"},
      {"past_len", opts.past_len},
      {"stabilize", opts.stabilize},
      {"max_hankel_columns", opts.max_hankel_columns},
  };
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

StateSpaceModel load_state_space(const std::string& path,
                                 SubspaceOptions* opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("type", "") != "state_space") {
    throw DataError(path + ": not a state-space model file");
  }
  StateSpaceModel model;
  model.n_x = j.at("n_x").get<int>();
  model.A = matrix_from_json(j.at("A"));
  model.B = matrix_from_json(j.at("B"));
  model.C = matrix_from_json(j.at("C"));
  if (j.contains("K")) model.K = matrix_from_json(j.at("K"));
  if (j.contains("stats")) {
    NormalizationStats st;
    auto mv = j["stats"].at("mean").get<std::vector<double>>();
    auto sv = j["stats"].at("scale").get<std::vector<double>>();
    st.mean = Eigen::Map<VectorXd>(mv.data(), (Eigen::Index)mv.size());
    st.scale = Eigen::Map<VectorXd>(sv.data(), (Eigen::Index)sv.size());
    model.stats = std::move(st);
  }
  if (opts) {
    const auto& o = j.at("options");
    opts->n_x = model.n_x;
    opts->block_horizon = o.at("block_horizon").get<int>();
    opts->noise_model = o.at("noise_model").get<std::string>() == "estimate"
                            ? NoiseModel::kEstimate
                            : NoiseModel::kNone;
    opts->focus = o.at("focus").get<std::string>() == "simulation"
                      ? SubspaceFocus::kSimulation
                      : SubspaceFocus::kPrediction;
    opts->past_len = o.at("past_len").get<int>();
    opts->stabilize = o.at("stabilize").get<bool>();
    opts->max_hankel_columns = o.at("max_hankel_columns").get<int>();
  }
  return model;
}

}  // namespace poolid
