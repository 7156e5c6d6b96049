#ifndef POOLID_SIMULATOR_HPP
#define POOLID_SIMULATOR_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poolid/data.hpp"
#include "poolid/frame.hpp"

namespace poolid {

// Physical parameters of one pool loop. Loss coefficients are linearized
// (W/K); none of them are calibrated against the real facility (see
// docs/simulator_defaults.md).
struct PoolParams {
  double volume_m3 = 0;
  double buffer_m3 = 0;
  double recycle_flow_m3h = 0;       // nominal daytime flow
  double he_effectiveness = 0.06;    // in (0, 1]
  double k_evap = 0;                 // W/K, scaled by humidity and occupancy
  double k_rad = 0;                  // W/K vs hall air
  double k_cond = 0;                 // W/K vs outdoor (ground proxy)
  double k_conv = 0;                 // W/K vs hall air
  double refill_flow_m3h = 0;        // flow during a refill pulse
};

struct PlantConfig {
  std::array<PoolParams, 2> pools;
  double rho_w = 1000.0;   // kg/m3
  double c_w = 4186.0;     // J/(kg K)
  double valve_map_exponent = 50.0;  // equal-percentage rangeability
  double boiler_wood_kw = 650.0;
  double boiler_gas_kw = 350.0;
  double hot_supply_temp_c = 70.0;

  // Refill schedule: fixed pulses per day (seconds of day). Pool 1 uses all
  // of them, pool 2 the first two.
  std::vector<int> refill_times_s = {10 * 3600, 14 * 3600, 17 * 3600};
  int refill_duration_s = 1200;
  double fresh_mean_c = 13.0;   // seasonal fresh-water sinusoid 8..18 degC
  double fresh_amp_c = 5.0;

  // Hall heat load (shares the boiler network).
  double hall_max_kw = 150.0;

  // Air and outdoor models.
  double air_setpoint_c = 27.0;
  double air_tau_s = 1800.0;
  double air_pool_coupling = 2e-5;   // 1/s, pool -> hall air
  double humidity_base_pct = 52.0;
  double humidity_tau_s = 3600.0;
  double outdoor_mean_c = 12.0;
  double outdoor_seasonal_amp_c = 8.0;
  double outdoor_diurnal_amp_c = 4.0;
  double outdoor_noise_std = 0.03;   // per 60 s AR(1) innovation
  double night_flow_fraction = 0.8;  // recycle flow setpoint at night

  UnixTime episode_start = 0;  // set by callers; 0 = 1970, fine for tests

  double boiler_cap_w() const { return (boiler_wood_kw + boiler_gas_kw) * 1e3; }
};

struct PlantState {
  std::array<double, 2> t_pool_c{28.0, 31.0};
  double t_air_c = 27.0;
  double humidity_pct = 52.0;
  double t_outdoor_c = 12.0;
  std::array<double, 2> pi_integral{0.0, 0.0};
};

enum class ControlMode { kConstantSetpoint, kNightSetback };

struct SetpointEntry {
  int second_of_day = 0;
  double setpoint_c = 28.0;
};

struct PoolController {
  ControlMode mode = ControlMode::kConstantSetpoint;
  double kp = 2.0;     // valve fraction per K
  double ki = 5e-4;    // valve fraction per (K s)
  std::vector<SetpointEntry> schedule;  // sorted by second_of_day

  double setpoint_at(int second_of_day) const;
};

struct ControllerConfig {
  std::array<PoolController, 2> pools;
};

PoolController make_constant_controller(double setpoint_c);
// Lowers the setpoint during closed hours and restores it early enough for
// the pool to be back at temperature by opening (07:00).
PoolController make_night_setback_controller(double day_setpoint_c,
                                             double night_setpoint_c,
                                             int setback_start_s = 18 * 3600,
                                             int reheat_start_s = 12600);

struct ScenarioAction {
  enum class Kind { kValveFreeze, kSetpointOverride };
  Kind kind = Kind::kValveFreeze;
  int pool = 0;        // 0 or 1
  double value = 0;    // valve fraction or setpoint degC
  UnixTime t0 = 0;
  UnixTime t1 = 0;     // [t0, t1)
};

struct ScenarioScript {
  int scenario_id = 0;  // 1..4
  std::vector<ScenarioAction> actions;
};

// Exogenous inputs and actuator commands for one internal step.
struct ControlInputs {
  std::array<double, 2> valve{0, 0};         // fraction 0..1
  std::array<double, 2> recycle_flow_m3h{0, 0};
  std::array<double, 2> refill_flow_m3h{0, 0};
  double fresh_temp_c = 12.0;
  double hall_kw = 0.0;          // demanded hall load
  double occupancy = 1.0;        // >= 1 during open hours
  double outdoor_temp_c = 12.0;  // imposed exogenous trajectory
  double humidity_target_pct = 52.0;
};

// Per-pool heat balance terms, in W. Positive heats the pool.
struct HeatTerms {
  std::array<double, 2> q_evap{0, 0};
  std::array<double, 2> q_rad{0, 0};
  std::array<double, 2> q_cond{0, 0};
  std::array<double, 2> q_conv{0, 0};
  std::array<double, 2> q_refill{0, 0};
  std::array<double, 2> q_he{0, 0};
  double hall_delivered_w = 0;
  double boiler_power_w = 0;  // q_he sum + hall, after curtailment

  double q_total(int pool) const {
    return q_evap[pool] + q_rad[pool] + q_cond[pool] + q_conv[pool] +
           q_refill[pool] + q_he[pool];
  }
};

// Equal-percentage valve static map, phi(0) = 0, phi(1) = 1.
double valve_flow_map(double opening, double rangeability);

HeatTerms heat_terms(const PlantState& state, const PlantConfig& config,
                     const ControlInputs& controls);

// Explicit Euler update over dt seconds (dt <= 60).
PlantState step(const PlantState& state, const PlantConfig& config,
                const ControlInputs& controls, double dt);

SignalFrame run_episode(const PlantConfig& config,
                        const ControllerConfig& controller,
                        const std::optional<ScenarioScript>& scenario,
                        std::int64_t duration_s, std::uint64_t seed);

struct BenchmarkSuite {
  SignalFrame raw;  // one continuous timeline at 60 s sampling
  std::vector<ManifestEntry> manifest;
};

// A 12-month closed-loop episode with night-setback control on pool 1 and a
// constant setpoint on pool 2, containing three test sections at the
// timeline extremes plus a winter one, two validation sections and the four
// off-nominal scenario sections.
BenchmarkSuite generate_benchmark_suite(const PlantConfig& config,
                                        std::uint64_t seed,
                                        int months = 12);

PlantConfig default_plant_config();
ControllerConfig default_controller_config();

}  // namespace poolid

#endif
