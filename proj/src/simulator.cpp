#include "poolid/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "poolid/errors.hpp"
#include "poolid/rng.hpp"

namespace poolid {

namespace {
constexpr double kTwoPi = 6.283185307179586;
constexpr int kOpenStart = 7 * 3600;
constexpr int kOpenEnd = 17 * 3600 + 1800;
}  // namespace

double PoolController::setpoint_at(int second_of_day) const {
  if (schedule.empty()) throw ConfigError("controller schedule empty");
  // Entries are sorted; the schedule wraps around midnight.
  double sp = schedule.back().setpoint_c;
  for (const auto& e : schedule) {
    if (e.second_of_day <= second_of_day) sp = e.setpoint_c;
  }
  return sp;
}

PoolController make_constant_controller(double setpoint_c) {
  PoolController c;
  c.mode = ControlMode::kConstantSetpoint;
  c.schedule = {{0, setpoint_c}};
  return c;
}

PoolController make_night_setback_controller(double day_setpoint_c,
                                             double night_setpoint_c,
                                             int setback_start_s,
                                             int reheat_start_s) {
  PoolController c;
  c.mode = ControlMode::kNightSetback;
  c.schedule = {{reheat_start_s, day_setpoint_c},
                {setback_start_s, night_setpoint_c}};
  return c;
}

double valve_flow_map(double opening, double rangeability) {
  double v = std::clamp(opening, 0.0, 1.0);
  if (v == 0.0) return 0.0;
  return (std::pow(rangeability, v) - 1.0) / (rangeability - 1.0);
}

HeatTerms heat_terms(const PlantState& state, const PlantConfig& config,
                     const ControlInputs& controls) {
  HeatTerms ht;
  double demand = std::max(0.0, controls.hall_kw) * 1e3;
  std::array<double, 2> he_demand{0, 0};
  for (int p = 0; p < 2; ++p) {
    const PoolParams& pp = config.pools[(size_t)p];
    double tp = state.t_pool_c[(size_t)p];
    double c_min = config.rho_w * config.c_w * controls.recycle_flow_m3h[(size_t)p] / 3600.0;
    he_demand[(size_t)p] = pp.he_effectiveness * c_min *
                           (config.hot_supply_temp_c - tp) *
                           valve_flow_map(controls.valve[(size_t)p],
                                          config.valve_map_exponent);
    demand += he_demand[(size_t)p];
  }
  double curtail = 1.0;
  double cap = config.boiler_cap_w();
  if (demand > cap) curtail = cap / demand;

  for (int p = 0; p < 2; ++p) {
    const PoolParams& pp = config.pools[(size_t)p];
    double tp = state.t_pool_c[(size_t)p];
    double humidity_deficit = std::max(0.0, 1.0 - state.humidity_pct / 100.0);
    ht.q_evap[(size_t)p] = -pp.k_evap * (tp - state.t_air_c) *
                           humidity_deficit * controls.occupancy;
    ht.q_rad[(size_t)p] = -pp.k_rad * (tp - state.t_air_c);
    ht.q_cond[(size_t)p] = -pp.k_cond * (tp - state.t_outdoor_c);
    ht.q_conv[(size_t)p] = -pp.k_conv * (tp - state.t_air_c);
    ht.q_refill[(size_t)p] = config.rho_w * config.c_w *
                             controls.refill_flow_m3h[(size_t)p] / 3600.0 *
                             (controls.fresh_temp_c - tp);
    ht.q_he[(size_t)p] = he_demand[(size_t)p] * curtail;
  }
  ht.hall_delivered_w = std::max(0.0, controls.hall_kw) * 1e3 * curtail;
  ht.boiler_power_w = ht.q_he[0] + ht.q_he[1] + ht.hall_delivered_w;
  return ht;
}

PlantState step(const PlantState& state, const PlantConfig& config,
                const ControlInputs& controls, double dt) {
  if (dt <= 0 || dt > 60.0) throw ConfigError("step: dt must be in (0, 60] s");
  HeatTerms ht = heat_terms(state, config, controls);
  PlantState next = state;
  for (int p = 0; p < 2; ++p) {
    const PoolParams& pp = config.pools[(size_t)p];
    double heat_capacity =
        (pp.volume_m3 + pp.buffer_m3) * config.rho_w * config.c_w;
    next.t_pool_c[(size_t)p] += ht.q_total(p) * dt / heat_capacity;
  }
  double pool_avg = 0.5 * (state.t_pool_c[0] + state.t_pool_c[1]);
  next.t_air_c += dt * ((config.air_setpoint_c - state.t_air_c) / config.air_tau_s +
                        config.air_pool_coupling * (pool_avg - state.t_air_c));
  next.humidity_pct += dt * (controls.humidity_target_pct - state.humidity_pct) /
                       config.humidity_tau_s;
  next.t_outdoor_c = controls.outdoor_temp_c;

  for (double t : {next.t_pool_c[0], next.t_pool_c[1], next.t_air_c}) {
    if (!(t >= 0.0 && t <= 60.0)) {
      throw NumericError(
          "simulation guard violated: temperature " + std::to_string(t) +
          " degC outside [0, 60] (pool1=" + std::to_string(next.t_pool_c[0]) +
          ", pool2=" + std::to_string(next.t_pool_c[1]) +
          ", air=" + std::to_string(next.t_air_c) + ")");
    }
  }
  return next;
}

namespace {

struct ExogenousModel {
  const PlantConfig& config;
  Rng rng;
  double outdoor_ar = 0.0;
  double humidity_ar = 0.0;
  std::array<double, 2> flow_ar{0.0, 0.0};
  std::int64_t hall_slot = -1;
  double hall_amp_kw = 0.0;

  ExogenousModel(const PlantConfig& cfg, std::uint64_t seed)
      : config(cfg), rng(seed) {}

  static int day_of_year(UnixTime t) {
    int y, m, d;
    civil_from_days(t >= 0 ? t / 86400 : (t - 86399) / 86400, y, m, d);
    return static_cast<int>(t / 86400 - days_from_civil(y, 1, 1)) + 1;
  }

  // Advances one 60 s tick and fills the exogenous part of `ci`.
  void advance(UnixTime t, ControlInputs& ci) {
    int sod = seconds_of_day(t);
    int doy = day_of_year(t);
    double season = std::cos(kTwoPi * (doy - 200) / 365.25);
    double diurnal = std::cos(kTwoPi * (sod - 15 * 3600) / 86400.0);

    outdoor_ar = 0.999 * outdoor_ar + config.outdoor_noise_std * rng.normal();
    ci.outdoor_temp_c = config.outdoor_mean_c +
                        config.outdoor_seasonal_amp_c * season +
                        config.outdoor_diurnal_amp_c * diurnal + outdoor_ar;

    bool open = sod >= kOpenStart && sod < kOpenEnd;
    double occ = 1.0;
    if (open) {
      double x = double(sod - kOpenStart) / double(kOpenEnd - kOpenStart);
      occ = 1.0 + 0.9 * std::sin(3.141592653589793 * x);
    }
    ci.occupancy = occ;

    humidity_ar = 0.998 * humidity_ar + 0.05 * rng.normal();
    ci.humidity_target_pct = std::clamp(
        config.humidity_base_pct + 8.0 * (occ - 1.0) + 4.0 * humidity_ar, 30.0,
        90.0);

    // Hall heating: stochastic square wave during occupied hours, higher in
    // winter, redrawn every 2 h.
    bool hall_on = sod >= kOpenStart && sod < 22 * 3600;
    std::int64_t slot = t / 7200;
    if (slot != hall_slot) {
      hall_slot = slot;
      double winter = 0.55 - 0.45 * season;  // ~0.1 summer, ~1.0 winter
      hall_amp_kw = std::min(config.hall_max_kw,
                             config.hall_max_kw * winter *
                                 (0.25 + 0.75 * rng.uniform()));
    }
    ci.hall_kw = hall_on ? hall_amp_kw : 0.0;

    double flow_frac =
        (sod >= 6 * 3600 && sod < 22 * 3600) ? 1.0 : config.night_flow_fraction;
    // Independent per-pump flow fluctuation (filter fouling, pump ripple);
    // without it the two flow channels would be exactly collinear.
    for (int p = 0; p < 2; ++p) {
      flow_ar[(size_t)p] = 0.995 * flow_ar[(size_t)p] + 0.008 * rng.normal();
      ci.recycle_flow_m3h[(size_t)p] =
          config.pools[(size_t)p].recycle_flow_m3h * flow_frac *
          std::clamp(1.0 + flow_ar[(size_t)p], 0.8, 1.2);
    }

    double fresh_season = std::cos(kTwoPi * (doy - 210) / 365.25);
    ci.fresh_temp_c = config.fresh_mean_c + config.fresh_amp_c * fresh_season;
    for (int p = 0; p < 2; ++p) {
      ci.refill_flow_m3h[(size_t)p] = 0.0;
      size_t pulses = (p == 0) ? config.refill_times_s.size()
                               : std::min<size_t>(2, config.refill_times_s.size());
      for (size_t k = 0; k < pulses; ++k) {
        int ts = config.refill_times_s[k];
        if (sod >= ts && sod < ts + config.refill_duration_s) {
          ci.refill_flow_m3h[(size_t)p] = config.pools[(size_t)p].refill_flow_m3h;
        }
      }
    }
  }
};

}  // namespace

SignalFrame run_episode(const PlantConfig& config,
                        const ControllerConfig& controller,
                        const std::optional<ScenarioScript>& scenario,
                        std::int64_t duration_s, std::uint64_t seed) {
  if (duration_s < 86400) throw ConfigError("run_episode: duration >= 1 day");
  const std::int64_t dt = 60;
  const std::int64_t n = duration_s / dt;

  SignalFrame frame;
  frame.start_time = config.episode_start;
  frame.sample_period = dt;
  frame.channels = benchmark_schema();
  frame.values.resize(n, (Eigen::Index)frame.channels.size());

  PlantState state;
  state.t_pool_c = {controller.pools[0].setpoint_at(kOpenStart),
                    controller.pools[1].setpoint_at(kOpenStart)};
  state.t_air_c = config.air_setpoint_c;
  state.humidity_pct = config.humidity_base_pct;

  ExogenousModel exo(config, seed);
  ControlInputs ci;

  for (std::int64_t k = 0; k < n; ++k) {
    UnixTime t = config.episode_start + k * dt;
    int sod = seconds_of_day(t);
    exo.advance(t, ci);
    state.t_outdoor_c = ci.outdoor_temp_c;

    for (int p = 0; p < 2; ++p) {
      const PoolController& pc = controller.pools[(size_t)p];
      double setpoint = pc.setpoint_at(sod);
      bool frozen = false;
      bool overridden = false;
      double frozen_value = 0;
      if (scenario) {
        for (const auto& a : scenario->actions) {
          if (a.pool != p || t < a.t0 || t >= a.t1) continue;
          if (a.kind == ScenarioAction::Kind::kSetpointOverride) {
            setpoint = a.value;
            overridden = true;
          } else {
            frozen = true;
            frozen_value = a.value;
          }
        }
      }
      // Commanded cool-downs are assisted with cold fresh water, as the
      // passive losses alone cannot reach a setpoint well below the hall
      // temperature in reasonable time.
      if (overridden && state.t_pool_c[(size_t)p] > setpoint + 0.2) {
        ci.refill_flow_m3h[(size_t)p] =
            std::max(ci.refill_flow_m3h[(size_t)p],
                     config.pools[(size_t)p].refill_flow_m3h);
      }
      double err = setpoint - state.t_pool_c[(size_t)p];
      double& integ = state.pi_integral[(size_t)p];
      double v_raw = pc.kp * err + pc.ki * integ;
      double v = std::clamp(v_raw, 0.0, 1.0);
      bool saturated = (v_raw > 1.0 && err > 0) || (v_raw < 0.0 && err < 0);
      if (!saturated && !frozen) integ += err * dt;
      if (frozen) v = frozen_value;
      ci.valve[(size_t)p] = v;
    }

    HeatTerms ht = heat_terms(state, config, ci);
    frame.values(k, 0) = ht.boiler_power_w / 1e3;
    frame.values(k, 1) = ci.valve[0] * 100.0;
    frame.values(k, 2) = ci.valve[1] * 100.0;
    frame.values(k, 3) = state.t_air_c;
    frame.values(k, 4) = state.humidity_pct;
    frame.values(k, 5) = state.t_outdoor_c;
    frame.values(k, 6) = ci.recycle_flow_m3h[0];
    frame.values(k, 7) = ci.recycle_flow_m3h[1];
    frame.values(k, 8) = ci.refill_flow_m3h[0] + ci.refill_flow_m3h[1];
    frame.values(k, 9) = ci.hall_kw > 0 ? ht.hall_delivered_w / 1e3 : 0.0;
    frame.values(k, 10) = state.t_pool_c[0];
    frame.values(k, 11) = state.t_pool_c[1];

    state = step(state, config, ci, (double)dt);
  }
  return frame;
}

PlantConfig default_plant_config() {
  PlantConfig cfg;
  cfg.pools[0] = PoolParams{672.0, 30.0, 189.0, 0.0704, 40e3, 15e3, 1.5e3,
                            8e3, 8.0};
  cfg.pools[1] = PoolParams{212.0, 35.0, 142.0, 0.0543, 15e3, 8e3, 1.5e3,
                            5e3, 5.0};
  return cfg;
}

ControllerConfig default_controller_config() {
  ControllerConfig cc;
  cc.pools[0] = make_night_setback_controller(28.0, 26.8);
  cc.pools[1] = make_constant_controller(31.0);
  return cc;
}

BenchmarkSuite generate_benchmark_suite(const PlantConfig& config,
                                        std::uint64_t seed, int months) {
  if (months < 1) throw ConfigError("generate_benchmark_suite: months >= 1");
  PlantConfig cfg = config;
  if (cfg.episode_start == 0) {
    cfg.episode_start = days_from_civil(2019, 9, 1) * 86400;
  }
  const std::int64_t total = (std::int64_t)months * 30 * 86400 +
                             ((months == 12) ? 5 * 86400 : 0);
  const UnixTime s0 = cfg.episode_start;

  auto at = [&](double frac) -> UnixTime {
    std::int64_t days = (std::int64_t)std::llround(frac * (double)total / 86400.0);
    return s0 + days * 86400;
  };

  // Fractional timeline layout; at 12 months the sections are roughly
  // two-week tests, ten-day validations and five-day scenarios.
  std::vector<ManifestEntry> mf = {
      {"test_start", "test", at(0.00), at(0.04)},
      {"train_a", "train", at(0.04), at(0.16)},
      {"val_autumn", "validation", at(0.16), at(0.19)},
      {"train_b", "train", at(0.19), at(0.25)},
      {"scenario1", "scenario", at(0.25), at(0.265)},
      {"train_c", "train", at(0.265), at(0.42)},
      {"test_mid", "test", at(0.42), at(0.44)},
      {"train_d", "train", at(0.44), at(0.535)},
      {"scenario2", "scenario", at(0.54), at(0.555)},
      {"scenario3", "scenario", at(0.555), at(0.57)},
      {"scenario4", "scenario", at(0.57), at(0.582)},
      {"train_e", "train", at(0.582), at(0.70)},
      {"val_spring", "validation", at(0.70), at(0.73)},
      {"train_f", "train", at(0.73), at(0.96)},
      {"test_end", "test", at(0.96), s0 + total},
  };

  ScenarioScript script;
  script.scenario_id = 0;  // combined timeline
  // Scenario 1: pool 1 valve stuck at 50 %.
  script.actions.push_back({ScenarioAction::Kind::kValveFreeze, 0, 0.5,
                            at(0.25), at(0.265)});
  // Scenario 2: pool 2 cooled to 25 degC (held through scenario 3). The
  // cool-down starts in an unassigned buffer before the section so the pool
  // is already cold when the section begins; the buffer keeps the off-nominal
  // transient out of the adjacent train section.
  script.actions.push_back({ScenarioAction::Kind::kSetpointOverride, 1, 25.0,
                            at(0.535), at(0.57)});
  // Scenario 3: pool 1 cooled to 25 degC as well.
  script.actions.push_back({ScenarioAction::Kind::kSetpointOverride, 0, 25.0,
                            at(0.555), at(0.57)});
  // Scenario 4: overrides end; both pools reheat to nominal simultaneously.

  BenchmarkSuite suite;
  suite.raw = run_episode(cfg, default_controller_config(), script, total, seed);
  suite.manifest = std::move(mf);
  return suite;
}

}  // namespace poolid
