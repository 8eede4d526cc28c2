#pragma once

// Simulated tank: first-order relaxation of every water/air field toward its
// ambient set-point, constant fish-load drifts, scripted perturbations, and
// sensor sampling through the inverse of the calibration curves.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "aquarium/domain.hpp"
#include "aquarium/signal.hpp"
#include "aquarium/text_config.hpp"

namespace aquarium {

struct PlantState {
  double water_temp = 26.0;
  double air_temp = 22.0;
  double humidity = 60.0;
  double ph = 7.4;
  double tds = 220.0;
  double turbidity = 6.0;
  double food_depth = 0.0;  // cm from sensor to food surface; 5 = empty gap bottom
  bool pump_on = true;
  double sim_time = 0.0;

  bool operator==(const PlantState&) const = default;
};

/// The physical quantity a sensor of `kind` observes.
inline double field(const PlantState& s, ParameterKind kind) {
  switch (kind) {
    case ParameterKind::AirTemperature: return s.air_temp;
    case ParameterKind::Humidity: return s.humidity;
    case ParameterKind::WaterTemperature: return s.water_temp;
    case ParameterKind::Tds: return s.tds;
    case ParameterKind::Ph: return s.ph;
    case ParameterKind::Turbidity: return s.turbidity;
    case ParameterKind::FoodDistance: return s.food_depth;
  }
  return 0.0;
}

struct PlantConfig {
  double ambient_water_temp = 26.0;
  double ambient_air_temp = 22.0;
  double ambient_humidity = 60.0;
  double ambient_ph = 7.4;
  double ambient_tds = 220.0;
  double ambient_turbidity = 6.0;

  double tau_temp_s = 30 * 60.0;
  double tau_ph_s = 120 * 60.0;
  double tds_tau_s = 240 * 60.0;
  double tau_turbidity_pump_on_s = 90 * 60.0;
  double tau_turbidity_pump_off_s = 300 * 60.0;

  // Fish load, per hour.
  double fish_tds_per_h = 2.0;
  double fish_turbidity_per_h = 1.0;
  double fish_ph_per_h = -0.02;
  double aeration_ph_per_h = 0.01;  // only while the pump runs
  double food_consumption_cm_per_h = 0.01;

  double depth_per_portion_cm = 0.05;
  double feed_turbidity_bump = 0.2;
  double initial_food_depth = 4.3;

  double tau_turbidity(bool pump_on) const {
    return pump_on ? tau_turbidity_pump_on_s : tau_turbidity_pump_off_s;
  }
};

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

struct Heater {
  double rate_c_per_min = 0.0;
  double duration_s = 0.0;
};
struct Vinegar {
  double ph_drop = 0.0;
  double over_s = 0.0;
};
struct Soil {
  double turbidity_rise = 0.0;
  double over_s = 0.0;
};
struct Refill {};
struct NetworkOutage {
  double duration_s = 0.0;
};
struct PowerCycle {
  double duration_s = 0.0;
};

struct Perturbation {
  std::variant<Heater, Vinegar, Soil, Refill, NetworkOutage, PowerCycle> effect;
  double start_s = 0.0;

  double duration_s() const {
    return std::visit(
        [](const auto& e) -> double {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, Heater>) return e.duration_s;
          else if constexpr (std::is_same_v<T, Vinegar> || std::is_same_v<T, Soil>) return e.over_s;
          else if constexpr (std::is_same_v<T, Refill>) return 0.0;
          else return e.duration_s;
        },
        effect);
  }
  double end_s() const { return start_s + duration_s(); }

  template <typename T>
  bool is() const { return std::holds_alternative<T>(effect); }
};

namespace detail {

struct Forcing {
  double water_temp = 0.0;  // per second
  double ph = 0.0;
  double turbidity = 0.0;
};

inline Forcing forcing_over(const std::vector<Perturbation>& active, double a, double b) {
  Forcing f;
  for (const auto& p : active) {
    if (!(p.start_s <= a && p.end_s() >= b)) continue;
    if (const auto* h = std::get_if<Heater>(&p.effect)) f.water_temp += h->rate_c_per_min / 60.0;
    if (const auto* v = std::get_if<Vinegar>(&p.effect)) f.ph -= v->ph_drop / v->over_s;
    if (const auto* s = std::get_if<Soil>(&p.effect)) f.turbidity += s->turbidity_rise / s->over_s;
  }
  return f;
}

/// Exact solution of dx/dt = (ambient - x)/tau + forcing over h seconds.
inline double relax(double x, double ambient, double tau, double forcing, double h) {
  const double target = ambient + forcing * tau;
  return target + (x - target) * std::exp(-h / tau);
}

inline void clamp_fields(PlantState& s) {
  s.water_temp = physical_range(ParameterKind::WaterTemperature).clamp(s.water_temp);
  s.air_temp = physical_range(ParameterKind::AirTemperature).clamp(s.air_temp);
  s.humidity = physical_range(ParameterKind::Humidity).clamp(s.humidity);
  s.ph = physical_range(ParameterKind::Ph).clamp(s.ph);
  s.tds = physical_range(ParameterKind::Tds).clamp(s.tds);
  s.turbidity = physical_range(ParameterKind::Turbidity).clamp(s.turbidity);
  s.food_depth = physical_range(ParameterKind::FoodDistance).clamp(s.food_depth);
}

inline void advance(PlantState& s, const PlantConfig& c, const Forcing& f, double h) {
  constexpr double kPerHour = 1.0 / 3600.0;
  s.water_temp = relax(s.water_temp, c.ambient_water_temp, c.tau_temp_s, f.water_temp, h);
  s.air_temp = relax(s.air_temp, c.ambient_air_temp, c.tau_temp_s, 0.0, h);
  s.humidity = relax(s.humidity, c.ambient_humidity, c.tau_temp_s, 0.0, h);
  const double ph_drift =
      (c.fish_ph_per_h + (s.pump_on ? c.aeration_ph_per_h : 0.0)) * kPerHour + f.ph;
  s.ph = relax(s.ph, c.ambient_ph, c.tau_ph_s, ph_drift, h);
  s.tds = relax(s.tds, c.ambient_tds, c.tds_tau_s, c.fish_tds_per_h * kPerHour, h);
  s.turbidity = relax(s.turbidity, c.ambient_turbidity, c.tau_turbidity(s.pump_on),
                      c.fish_turbidity_per_h * kPerHour + f.turbidity, h);
  s.food_depth += c.food_consumption_cm_per_h * kPerHour * h;
  s.sim_time += h;
  clamp_fields(s);
}

}  // namespace detail

/// Steady state of the unperturbed tank for the given pump setting.
inline PlantState equilibrium(const PlantConfig& c, bool pump_on = true, double food_depth = 0.0) {
  constexpr double kPerHour = 1.0 / 3600.0;
  PlantState s;
  s.water_temp = c.ambient_water_temp;
  s.air_temp = c.ambient_air_temp;
  s.humidity = c.ambient_humidity;
  s.ph = c.ambient_ph + (c.fish_ph_per_h + (pump_on ? c.aeration_ph_per_h : 0.0)) * kPerHour * c.tau_ph_s;
  s.tds = c.ambient_tds + c.fish_tds_per_h * kPerHour * c.tds_tau_s;
  s.turbidity = c.ambient_turbidity + c.fish_turbidity_per_h * kPerHour * c.tau_turbidity(pump_on);
  s.food_depth = food_depth;
  s.pump_on = pump_on;
  detail::clamp_fields(s);
  return s;
}

/// Advances the tank by `dt` seconds. Perturbation windows that begin or end
/// inside the step are honored exactly by splitting the step at their edges.
inline PlantState step(PlantState state, double dt, const std::vector<Perturbation>& active,
                       const PlantConfig& config = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const double t0 = state.sim_time;
  const double t1 = t0 + dt;

  std::vector<double> cuts{t0, t1};
  for (const auto& p : active) {
    for (double edge : {p.start_s, p.end_s()})
      if (edge > t0 && edge < t1) cuts.push_back(edge);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    for (const auto& p : active)
      if (p.is<Refill>() && p.start_s == a) state.food_depth = 0.0;
    state.sim_time = a;
    detail::advance(state, config, detail::forcing_over(active, a, b), b - a);
  }
  state.sim_time = t1;
  return state;
}

inline PlantState consume_feed(PlantState state, int portions, const PlantConfig& config = {}) {
  if (portions < 1) throw std::invalid_argument("consume_feed: portions must be >= 1");
  const auto range = physical_range(ParameterKind::FoodDistance);
  if (state.food_depth >= range.hi) throw HopperEmpty("feed attempted on an empty hopper");
  state.food_depth = range.clamp(state.food_depth + config.depth_per_portion_cm * portions);
  state.turbidity = physical_range(ParameterKind::Turbidity)
                        .clamp(state.turbidity + config.feed_turbidity_bump * portions);
  return state;
}

// ---------------------------------------------------------------------------
// Sensor sampling
// ---------------------------------------------------------------------------

struct NoiseModel {
  std::array<double, kKindCount> sigma{};  // engineering units
  double dropout_probability = 0.0;
  std::uint64_t seed = 1;

  double sigma_of(ParameterKind k) const { return sigma[index_of(k)]; }

  static NoiseModel none(std::uint64_t seed = 1) { return NoiseModel{{}, 0.0, seed}; }

  /// Shipped default noise levels.
  static NoiseModel standard(std::uint64_t seed = 1) {
    NoiseModel n;
    n.sigma[index_of(ParameterKind::AirTemperature)] = 0.1;
    n.sigma[index_of(ParameterKind::Humidity)] = 0.3;
    n.sigma[index_of(ParameterKind::WaterTemperature)] = 0.03;
    n.sigma[index_of(ParameterKind::Tds)] = 20.0;
    n.sigma[index_of(ParameterKind::Ph)] = 0.01;
    n.sigma[index_of(ParameterKind::Turbidity)] = 0.5;
    n.sigma[index_of(ParameterKind::FoodDistance)] = 0.0;
    n.dropout_probability = 0.0005;
    n.seed = seed;
    return n;
  }

  void check() const {
    for (double s : sigma)
      if (!(s >= 0.0)) throw ConfigError("noise standard deviations must be >= 0");
    if (!(dropout_probability >= 0.0 && dropout_probability < 1.0))
      throw ConfigError("dropout probability must be in [0, 1)");
  }
};

/// Converts the true field value into 12-bit counts through the inverse
/// calibration, with Gaussian noise and dropout. Returns nullopt on dropout.
template <typename Rng>
std::optional<RawSample> sample(const PlantState& state, ParameterKind kind, const NoiseModel& noise,
                                Rng& rng, const CalibrationCurve& curve,
                                Millis monotonic_time = Millis{0}) {
  if (noise.dropout_probability > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < noise.dropout_probability) return std::nullopt;
  }
  double value = field(state, kind);
  if (const double sigma = noise.sigma_of(kind); sigma > 0.0) {
    std::normal_distribution<double> n(0.0, sigma);
    value += n(rng);
  }
  const long counts = std::lround(curve.inverse(value));
  return RawSample{kind, static_cast<int>(std::clamp<long>(counts, 0, kMaxCounts)), monotonic_time};
}

inline std::optional<RawSample> sample(const PlantState& state, ParameterKind kind) {
  std::mt19937_64 rng(0);
  return sample(state, kind, NoiseModel::none(), rng, default_curve(kind));
}

// ---------------------------------------------------------------------------
// Scenario scripts
// ---------------------------------------------------------------------------

struct ScenarioScript {
  std::vector<Perturbation> perturbations;

  /// Throws ConfigError on non-positive magnitudes and ScriptOverlap when two
  /// power-cycle windows overlap.
  void check() const {
    for (const auto& p : perturbations) {
      if (p.start_s < 0.0) throw ConfigError("perturbation starts before scenario start");
      if (!p.is<Refill>() && !(p.duration_s() > 0.0))
        throw ConfigError("perturbation durations must be positive");
      if (const auto* h = std::get_if<Heater>(&p.effect); h && !(h->rate_c_per_min > 0.0))
        throw ConfigError("heater rate must be positive");
      if (const auto* v = std::get_if<Vinegar>(&p.effect); v && !(v->ph_drop > 0.0))
        throw ConfigError("vinegar pH drop must be positive");
      if (const auto* s = std::get_if<Soil>(&p.effect); s && !(s->turbidity_rise > 0.0))
        throw ConfigError("soil turbidity rise must be positive");
    }
    std::vector<const Perturbation*> power;
    for (const auto& p : perturbations)
      if (p.is<PowerCycle>()) power.push_back(&p);
    std::sort(power.begin(), power.end(),
              [](const auto* a, const auto* b) { return a->start_s < b->start_s; });
    for (std::size_t i = 1; i < power.size(); ++i)
      if (power[i]->start_s < power[i - 1]->end_s())
        throw ScriptOverlap("power cycles at " + std::to_string(power[i - 1]->start_s) + " s and " +
                            std::to_string(power[i]->start_s) + " s overlap");
  }

  /// One entry per line: `type start [magnitude] [duration]`, where type is
  /// heater|vinegar|soil|refill|network|power, times accept s/m/h/d suffixes
  /// and `-` stands for an unused magnitude.
  static ScenarioScript parse(const std::vector<text::Line>& lines) {
    ScenarioScript script;
    for (const auto& line : lines) {
      const auto& t = line.tokens;
      const auto& type = t[0];
      auto need = [&](std::size_t n) {
        if (t.size() != n)
          throw ConfigError("line " + std::to_string(line.number) + ": '" + type + "' takes " +
                            std::to_string(n - 1) + " fields");
      };
      Perturbation p;
      if (type == "refill") {
        need(2);
        p.effect = Refill{};
      } else if (type == "network" || type == "power") {
        need(4);
        const double d = text::duration(t[3], line);
        if (type == "network") p.effect = NetworkOutage{d};
        else p.effect = PowerCycle{d};
      } else if (type == "heater" || type == "vinegar" || type == "soil") {
        need(4);
        const double m = text::number(t[2], line);
        const double d = text::duration(t[3], line);
        if (type == "heater") p.effect = Heater{m, d};
        else if (type == "vinegar") p.effect = Vinegar{m, d};
        else p.effect = Soil{m, d};
      } else {
        throw ConfigError("line " + std::to_string(line.number) + ": unknown perturbation '" + type + "'");
      }
      p.start_s = text::duration(t[1], line);
      script.perturbations.push_back(p);
    }
    script.check();
    return script;
  }

  static ScenarioScript load(const std::string& path) { return parse(text::tokenize_file(path)); }
  static ScenarioScript from_text(const std::string& body) { return parse(text::tokenize_string(body)); }
};

/// Heater, vinegar and soil once per simulated day, plus network outages and
/// power cycles placed away from the water-quality episodes.
inline constexpr const char* kStandardScenario = R"(# standard-72h
# type     start  magnitude  duration
heater     5h     0.5        12m
vinegar    11h    1.8        30s
soil       17h    150        5m
network    21h    -          26s
power      23h0m37s -        27s
heater     29h    0.5        12m
vinegar    35h    1.8        30s
soil       41h    150        5m
network    45h    -          26s
power      47h0m37s -        27s
heater     53h    0.5        12m
vinegar    59h    1.8        30s
soil       65h    150        5m
network    69h    -          26s
refill     70h
)";

inline ScenarioScript standard_scenario() { return ScenarioScript::from_text(kStandardScenario); }

struct FaultFlags {
  bool network_down = false;
  bool power_off = false;
  bool operator==(const FaultFlags&) const = default;
};

struct ScenarioFrame {
  double sim_time = 0.0;
  PlantState state;
  FaultFlags faults;
  bool operator==(const ScenarioFrame&) const = default;
};

/// Replays a script against the tank on a fixed logical tick. With a speedup
/// the runner sleeps so that simulated time advances `speedup` times faster
/// than the wall clock; without one it runs as fast as possible.
class ScenarioRunner {
 public:
  ScenarioRunner(ScenarioScript script, double duration_s, PlantConfig config = {},
                 double dt_s = 1.0, std::optional<double> speedup = std::nullopt)
      : script_(std::move(script)), config_(config), duration_s_(duration_s), dt_s_(dt_s),
        speedup_(speedup) {
    if (!(duration_s > 0.0)) throw ConfigError("scenario duration must be positive");
    if (!(dt_s > 0.0)) throw ConfigError("scenario tick must be positive");
    if (speedup && !(*speedup >= 1.0)) throw ConfigError("speedup must be >= 1");
    script_.check();
    state_ = equilibrium(config_, true, config_.initial_food_depth);
  }

  /// The frame at the current time, then advances one tick. Returns nullopt
  /// once the duration has elapsed.
  std::optional<ScenarioFrame> next() {
    if (state_.sim_time > duration_s_ + 1e-9) return std::nullopt;
    pace();
    ScenarioFrame frame{state_.sim_time, state_, faults_at(state_.sim_time)};
    const double h = std::min(dt_s_, duration_s_ - state_.sim_time);
    if (h > 1e-12) {
      state_ = step(state_, h, script_.perturbations, config_);
    } else {
      state_.sim_time = duration_s_ + 1.0;  // past the end
    }
    return frame;
  }

  FaultFlags faults_at(double t) const {
    FaultFlags f;
    for (const auto& p : script_.perturbations) {
      if (t < p.start_s || t >= p.end_s()) continue;
      if (p.is<NetworkOutage>()) f.network_down = true;
      if (p.is<PowerCycle>()) f.power_off = true;
    }
    return f;
  }

  /// Feeder effect on the tank; throws HopperEmpty when nothing is left.
  void feed(int portions) { state_ = consume_feed(state_, portions, config_); }
  void set_pump(bool on) { state_.pump_on = on; }

  const PlantState& state() const { return state_; }
  const PlantConfig& config() const { return config_; }
  const ScenarioScript& script() const { return script_; }
  double duration_s() const { return duration_s_; }
  double dt_s() const { return dt_s_; }

 private:
  void pace() {
    if (!speedup_) return;
    const auto now = std::chrono::steady_clock::now();
    if (!wall_start_) wall_start_ = now;
    const auto target = *wall_start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                           std::chrono::duration<double>(state_.sim_time / *speedup_));
    if (target > now) std::this_thread::sleep_until(target);
  }

  ScenarioScript script_;
  PlantConfig config_;
  double duration_s_;
  double dt_s_;
  std::optional<double> speedup_;
  std::optional<std::chrono::steady_clock::time_point> wall_start_;
  PlantState state_;
};

/// Collects every frame of an unpaced run.
inline std::vector<ScenarioFrame> run_scenario(const ScenarioScript& script, double duration_s,
                                               const PlantConfig& config = {}, double dt_s = 1.0) {
  ScenarioRunner runner(script, duration_s, config, dt_s);
  std::vector<ScenarioFrame> frames;
  while (auto f = runner.next()) frames.push_back(*f);
  return frames;
}

}  // namespace aquarium
