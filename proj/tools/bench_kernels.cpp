// Timing comparison of the OpenMP kernels against their serial reference
// implementations (gradient computation and horizon evaluation). The two
// paths are required to agree bit for bit; this tool reports wall time and
// verifies the agreement on realistic problem sizes.
#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "poolid/data.hpp"
#include "poolid/eval.hpp"
#include "poolid/linid.hpp"
#include "poolid/nlarx.hpp"
#include "poolid/rng.hpp"
#include "poolid/simulator.hpp"

using namespace poolid;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

SignalFrame make_section(std::uint64_t seed, Eigen::Index n) {
  // A short closed-loop episode, resampled and normalized like the real
  // pipeline would.
  PlantConfig config = default_plant_config();
  SignalFrame raw = run_episode(config, default_controller_config(),
                                std::nullopt, (std::int64_t)n * 600, seed);
  SignalFrame frame = resample_moving_average(raw, 10);
  NormalizationStats stats = fit_normalization({frame});
  return apply_normalization(frame, stats);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled at build time\n");
#endif

  SignalFrame section = make_section(7, 2000);

  // Gradient kernel.
  NlarxConfig nn;
  nn.n_u = (int)section.n_inputs();
  nn.n_y = (int)section.n_outputs();
  nn.hidden_layers = {32, 32};
  nn.loss_horizon = 8;
  MlpParams params = init_params(nn, 11);
  auto windows = make_anchor_windows(section, nn.past_len(), nn.loss_horizon, 2);
  std::printf("gradient batch: %zu windows, %lld parameters\n", windows.size(),
              (long long)params.n_params());

  auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd g_serial = grad_bptt_serial(params, nn, windows);
  double dt_serial = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd g_parallel = grad_bptt(params, nn, windows);
  double dt_parallel = seconds_since(t0);

  bool grad_identical = (g_serial.array() == g_parallel.array()).all();
  std::printf("grad_bptt      serial %8.3f s  parallel %8.3f s  speedup %5.2fx"
              "  bit-identical: %s\n",
              dt_serial, dt_parallel, dt_serial / dt_parallel,
              grad_identical ? "yes" : "NO");

  // Horizon evaluation kernel.
  SubspaceOptions opts;
  opts.n_x = 3;
  opts.stabilize = true;
  StateSpaceModel model = estimate_subspace({section}, opts);
  StateSpaceForecaster fc(model, "bench", opts.past_len);

  t0 = std::chrono::steady_clock::now();
  HorizonMetrics m_serial = horizon_rmse_serial(fc, section, 48, 20, 1);
  double dt_eval_serial = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  HorizonMetrics m_parallel = horizon_rmse(fc, section, 48, 20, 1);
  double dt_eval_parallel = seconds_since(t0);

  bool eval_identical = (m_serial.per_depth_per_channel_rmse.array() ==
                         m_parallel.per_depth_per_channel_rmse.array())
                            .all();
  std::printf("horizon_rmse   serial %8.3f s  parallel %8.3f s  speedup %5.2fx"
              "  bit-identical: %s\n",
              dt_eval_serial, dt_eval_parallel,
              dt_eval_serial / dt_eval_parallel,
              eval_identical ? "yes" : "NO");

  return (grad_identical && eval_identical) ? 0 : 1;
}
