#ifndef POOLID_LINID_HPP
#define POOLID_LINID_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "poolid/data.hpp"
#include "poolid/frame.hpp"

namespace poolid {

// Discrete-time linear state-space model, x[k+1] = A x[k] + B u[k],
// y[k] = C x[k], with an optional innovation gain K used in predictor form
// over observed data. No feedthrough term. Operates on normalized signals;
// `stats` records the normalization it was estimated under.
struct StateSpaceModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  std::optional<Eigen::MatrixXd> K;
  int n_x = 0;
  std::optional<NormalizationStats> stats;

  int n_u() const { return (int)B.cols(); }
  int n_y() const { return (int)C.rows(); }
  double spectral_radius() const;
  Eigen::MatrixXd markov_parameter(int i) const;  // C A^i B
};

enum class SubspaceFocus { kSimulation, kPrediction };
enum class NoiseModel { kNone, kEstimate };

struct SubspaceOptions {
  int n_x = 3;
  int block_horizon = 0;  // 0 = auto: max(24, 3 * n_x)
  NoiseModel noise_model = NoiseModel::kNone;
  SubspaceFocus focus = SubspaceFocus::kSimulation;
  // Column subsampling of the block-Hankel matrices used for the projection
  // SVD; keeps large datasets tractable. The B/K regressions always use all
  // samples.
  int max_hankel_columns = 6000;
  // Project unstable eigenvalues radially to 0.999 (off by default).
  bool stabilize = false;
  int past_len = 20;  // default past window for initial-state estimation

  int horizon() const {
    return block_horizon > 0 ? block_horizon : std::max(24, 3 * n_x);
  }
};

// MOESP-style subspace estimation over one or more (normalized) training
// sections. Hankel columns never span a section boundary.
StateSpaceModel estimate_subspace(const std::vector<SignalFrame>& frames,
                                  const SubspaceOptions& opts);

// Matrix-level variant: per-section pairs of (inputs [N x n_u],
// outputs [N x n_y]).
StateSpaceModel estimate_subspace(
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& sections,
    const SubspaceOptions& opts);

// OLS initial-state estimation over a past window; `past` columns are the
// n_u inputs followed by the n_y outputs. Returns the state positioned at
// the window end, i.e. the state whose output is the last past row.
Eigen::VectorXd estimate_initial_state(const StateSpaceModel& model,
                                       const Eigen::MatrixXd& past);

// H-step-ahead forecast: initial state from the past window (predictor form
// when K is present), then open-loop iteration over the future inputs.
// future_inputs row h drives the transition into prediction step h+1.
Eigen::MatrixXd forecast(const StateSpaceModel& model,
                         const Eigen::MatrixXd& past,
                         const Eigen::MatrixXd& future_inputs);

void save_state_space(const StateSpaceModel& model, const SubspaceOptions& opts,
                      const std::string& path);
StateSpaceModel load_state_space(const std::string& path,
                                 SubspaceOptions* opts = nullptr);

}  // namespace poolid

#endif
