#pragma once

// Threshold evaluation, cooldown-gated alerting, feed gating and dosing,
// pump control, and the daily feed schedule.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aquarium/domain.hpp"
#include "aquarium/text_config.hpp"

namespace aquarium {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ControlConfig {
  std::vector<ThresholdRule> rules = default_rules();
  Millis cooldown{600'000};
  Millis poll_period{5'000};
  std::vector<Millis> feed_schedule{Millis{8 * 3'600'000}, Millis{18 * 3'600'000}};  // UTC time of day
  double hysteresis = 0.0;
  double portion_mass_g = 0.5;

  const ThresholdRule* rule_for(ParameterKind kind, RuleAction action) const {
    for (const auto& r : rules)
      if (r.kind == kind && r.action == action) return &r;
    return nullptr;
  }

  void check() const {
    if (cooldown <= Millis{0}) throw ConfigError("cooldown must be positive");
    if (poll_period <= Millis{0}) throw ConfigError("poll period must be positive");
    if (!(hysteresis >= 0.0)) throw ConfigError("hysteresis must be >= 0");
    auto slots = feed_schedule;
    std::sort(slots.begin(), slots.end());
    if (std::adjacent_find(slots.begin(), slots.end()) != slots.end())
      throw ConfigError("feed schedule times must be distinct");
    for (auto s : slots)
      if (s < Millis{0} || s >= Millis{86'400'000}) throw ConfigError("feed time outside the day");
  }

  /// Keys: `poll_period`, `cooldown`, `hysteresis`, `portion_mass_g`,
  /// `feed_schedule HH:MM ...` (or `feed_schedule none`) and
  /// `rule kind lower|- upper|- [alert|allow_feeding]`, which replaces the
  /// default rule for that kind and action.
  static ControlConfig parse(const std::vector<text::Line>& lines) {
    ControlConfig c;
    for (const auto& line : lines) {
      const auto& t = line.tokens;
      const auto& key = t[0];
      auto need = [&](std::size_t n) {
        if (t.size() != n)
          throw ConfigError("line " + std::to_string(line.number) + ": '" + key + "' takes " +
                            std::to_string(n - 1) + " value(s)");
      };
      if (key == "poll_period") {
        need(2);
        c.poll_period = seconds_to_millis(text::duration(t[1], line));
      } else if (key == "cooldown") {
        need(2);
        c.cooldown = seconds_to_millis(text::duration(t[1], line));
      } else if (key == "hysteresis") {
        need(2);
        c.hysteresis = text::number(t[1], line);
      } else if (key == "portion_mass_g") {
        need(2);
        c.portion_mass_g = text::number(t[1], line);
      } else if (key == "feed_schedule") {
        c.feed_schedule.clear();
        for (std::size_t i = 1; i < t.size(); ++i) {
          if (t[i] == "none") continue;
          int hh = 0, mm = 0;
          char tail = 0;
          if (std::sscanf(t[i].c_str(), "%d:%d%c", &hh, &mm, &tail) != 2 || hh < 0 || hh > 23 ||
              mm < 0 || mm > 59)
            throw ConfigError("line " + std::to_string(line.number) + ": bad time '" + t[i] + "'");
          c.feed_schedule.push_back(Millis{(hh * 60 + mm) * 60'000});
        }
      } else if (key == "rule") {
        if (t.size() != 4 && t.size() != 5)
          throw ConfigError("line " + std::to_string(line.number) +
                            ": expected 'rule kind lower upper [action]'");
        const auto kind = text::kind(t[1], line);
        auto bound = [&](const std::string& tok) -> std::optional<double> {
          if (tok == "-") return std::nullopt;
          return text::number(tok, line);
        };
        RuleAction action = RuleAction::Alert;
        if (t.size() == 5) {
          if (t[4] == "allow_feeding") action = RuleAction::AllowFeeding;
          else if (t[4] != "alert")
            throw ConfigError("line " + std::to_string(line.number) + ": unknown action '" + t[4] + "'");
        }
        auto rule = ThresholdRule::make(kind, bound(t[2]), bound(t[3]), action);
        std::erase_if(c.rules, [&](const ThresholdRule& r) { return r.kind == kind && r.action == action; });
        c.rules.push_back(rule);
      } else {
        throw ConfigError("line " + std::to_string(line.number) + ": unknown key '" + key + "'");
      }
    }
    c.check();
    return c;
  }

  static ControlConfig load(const std::optional<std::string>& path) {
    if (!path) return {};
    return parse(text::tokenize_file(*path));
  }
};

// ---------------------------------------------------------------------------
// Alert gate
// ---------------------------------------------------------------------------

struct AlertGateState {
  Millis cooldown{600'000};
  std::map<AlertKey, Timestamp> last_emission;

  bool operator==(const AlertGateState&) const = default;
};

struct GateDecision {
  bool emit = false;
  AlertGateState state;
};

/// Emits when the key has never fired or its last emission is at least one
/// cooldown old (boundary inclusive).
inline GateDecision alert_gate(const AlertKey& key, Timestamp now, AlertGateState state) {
  const auto it = state.last_emission.find(key);
  const bool emit = it == state.last_emission.end() || now - it->second >= state.cooldown;
  if (emit) state.last_emission[key] = now;
  return {emit, std::move(state)};
}

// ---------------------------------------------------------------------------
// Actuators
// ---------------------------------------------------------------------------

enum class Actuation { Done, Jammed };

class FeederActuator {
 public:
  virtual ~FeederActuator() = default;
  /// One servo rotation, releasing one portion.
  virtual Actuation rotate() = 0;
};

/// Servo model that can jam with a fixed probability once it has worn past
/// `jam_after_cycles` rotations. `on_dispense` sees every completed rotation.
class SimulatedFeeder : public FeederActuator {
 public:
  SimulatedFeeder(double jam_probability = 0.0, std::uint64_t jam_after_cycles = 0,
                  std::uint64_t seed = 7, std::function<void()> on_dispense = {})
      : jam_probability_(jam_probability), jam_after_cycles_(jam_after_cycles), rng_(seed),
        on_dispense_(std::move(on_dispense)) {
    if (!(jam_probability >= 0.0 && jam_probability < 1.0))
      throw ConfigError("jam probability must be in [0, 1)");
  }

  Actuation rotate() override {
    ++cycles_;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double draw = u(rng_);
    if (cycles_ > jam_after_cycles_ && draw < jam_probability_) return Actuation::Jammed;
    if (on_dispense_) on_dispense_();
    return Actuation::Done;
  }

  void set_on_dispense(std::function<void()> f) { on_dispense_ = std::move(f); }
  std::uint64_t cycles() const { return cycles_; }

 private:
  double jam_probability_;
  std::uint64_t jam_after_cycles_;
  std::mt19937_64 rng_;
  std::function<void()> on_dispense_;
  std::uint64_t cycles_ = 0;
};

struct FeederState {
  double portion_mass_g = 0.5;
  double total_dispensed_g = 0.0;
  bool jam_flag = false;

  bool operator==(const FeederState&) const = default;
};

struct PumpState {
  bool on = true;
  std::optional<Timestamp> last_toggle;

  bool operator==(const PumpState&) const = default;
};

// ---------------------------------------------------------------------------
// Feed schedule
// ---------------------------------------------------------------------------

/// Returns true when some slot's daily occurrence lies in (previous, now].
inline bool slot_crossed(const std::vector<Millis>& slots, std::optional<Timestamp> previous,
                         Timestamp now) {
  if (!previous || now <= *previous) return false;
  const auto day = std::chrono::floor<std::chrono::days>(now);
  for (auto slot : slots) {
    Timestamp occurrence = day + slot;
    if (occurrence > now) occurrence -= std::chrono::days{1};
    if (occurrence > *previous) return true;
  }
  return false;
}

class FeedScheduler {
 public:
  explicit FeedScheduler(std::vector<Millis> slots = {}) : slots_(std::move(slots)) {}

  /// Called once per poll. Emits at most one scheduled Feed per crossing.
  std::optional<ActuatorCommand> poll(Timestamp now) {
    const bool crossed = slot_crossed(slots_, previous_, now);
    previous_ = now;
    if (!crossed) return std::nullopt;
    return ActuatorCommand{FeedCommand{1}, CommandSource::Schedule, now};
  }

  /// Forget the previous poll, as after a reboot.
  void reset() { previous_.reset(); }

 private:
  std::vector<Millis> slots_;
  std::optional<Timestamp> previous_;
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct PollOutcome {
  std::vector<AlertEvent> alerts;
  std::vector<EventRecord> records;
};

struct FeedDecision {
  FeedResult result;
  std::optional<AlertEvent> alert;  // emitted LowFood alert, if any
  std::vector<EventRecord> records;
};

struct PumpDecision {
  PumpState state;
  std::vector<EventRecord> records;
};

inline std::string describe_alert(const AlertEvent& a, const ThresholdRule* rule) {
  char buf[160];
  if (!a.kind) {
    std::snprintf(buf, sizeof buf, "low food: distance %.2f cm, feeding blocked", a.observed_value);
  } else if (a.direction == Direction::BelowLower && rule && rule->lower) {
    std::snprintf(buf, sizeof buf, "%s %.2f %s below lower bound %g",
                  std::string(name(*a.kind)).c_str(), a.observed_value,
                  std::string(unit(*a.kind)).c_str(), *rule->lower);
  } else if (rule && rule->upper) {
    std::snprintf(buf, sizeof buf, "%s %.2f %s above upper bound %g",
                  std::string(name(*a.kind)).c_str(), a.observed_value,
                  std::string(unit(*a.kind)).c_str(), *rule->upper);
  } else {
    std::snprintf(buf, sizeof buf, "%s %.2f", std::string(name(*a.kind)).c_str(), a.observed_value);
  }
  return buf;
}

/// Owns all control state for one device. Not thread-safe; the runtime drives
/// it from a single loop.
class ControlEngine {
 public:
  explicit ControlEngine(ControlConfig config = {}, FeederActuator* feeder = nullptr,
                         std::function<void(bool)> pump_actuator = {})
      : config_(std::move(config)), feeder_actuator_(feeder), pump_actuator_(std::move(pump_actuator)) {
    config_.check();
    gate_.cooldown = config_.cooldown;
    feeder_.portion_mass_g = config_.portion_mass_g;
  }

  /// Evaluates one snapshot of readings. Only Valid readings are checked;
  /// every violation goes through the cooldown gate and both emissions and
  /// suppressions are logged.
  PollOutcome poll_cycle(const std::vector<ParameterReading>& readings, std::uint64_t cycle,
                         Timestamp now) {
    PollOutcome out;
    out.records.push_back(EventRecord{0, now, SensorSnapshot{cycle, readings}});
    for (const auto& reading : readings) {
      if (reading.quality != Quality::Valid) continue;
      if (reading.kind == ParameterKind::FoodDistance) last_food_distance_ = reading.value;
      const auto* rule = config_.rule_for(reading.kind, RuleAction::Alert);
      if (!rule) continue;

      auto& active = active_[index_of(reading.kind)];
      const auto direction = violates(*rule, reading.value);
      if (direction) {
        active = direction;
        AlertEvent alert{reading.kind, *direction, reading.value, now, {}};
        alert.message = describe_alert(alert, rule);
        auto decision = alert_gate(alert.key(), now, std::move(gate_));
        gate_ = std::move(decision.state);
        out.records.push_back(EventRecord{0, now, AlertRecord{alert, !decision.emit}});
        if (decision.emit) out.alerts.push_back(std::move(alert));
      } else if (active && cleared(*rule, *active, reading.value)) {
        out.records.push_back(EventRecord{0, now, RecoveryNote{reading.kind, *active, reading.value}});
        active.reset();
      }
    }
    return out;
  }

  /// Dispenses when the latest Valid food distance is below the gap depth;
  /// otherwise rejects and raises a (gated) LowFood alert.
  FeedDecision request_feed(const ActuatorCommand& command, Timestamp now) {
    const auto& feed = std::get<FeedCommand>(command.action);
    if (feed.portions < 1) throw InvalidPortions("portions must be >= 1");
    FeedDecision d;
    d.records.push_back(EventRecord{0, now, CommandRecord{command, true}});

    const double gap = physical_range(ParameterKind::FoodDistance).hi;
    if (!last_food_distance_) {
      d.result = FeedResult{FeedOutcome::NoReading, 0, 0.0};
    } else if (*last_food_distance_ >= gap) {
      d.result = FeedResult{FeedOutcome::RejectedLowFood, 0, 0.0};
      AlertEvent alert{std::nullopt, Direction::LowFood, *last_food_distance_, now, {}};
      alert.message = describe_alert(alert, nullptr);
      auto decision = alert_gate(alert.key(), now, std::move(gate_));
      gate_ = std::move(decision.state);
      d.records.push_back(EventRecord{0, now, FeedResult{d.result}});
      d.records.push_back(EventRecord{0, now, AlertRecord{alert, !decision.emit}});
      if (decision.emit) d.alert = std::move(alert);
      return d;
    } else {
      int done = 0;
      bool jammed = false;
      for (int i = 0; i < feed.portions; ++i) {
        if (feeder_actuator_ && feeder_actuator_->rotate() == Actuation::Jammed) {
          jammed = true;
          break;
        }
        ++done;
      }
      const double grams = done * feeder_.portion_mass_g;
      feeder_.total_dispensed_g += grams;
      feeder_.jam_flag = jammed;
      d.result = FeedResult{jammed ? FeedOutcome::Jammed : FeedOutcome::Dispensed, done, grams};
    }
    d.records.push_back(EventRecord{0, now, FeedResult{d.result}});
    return d;
  }

  /// Sets (not toggles) the pump; idempotent sets are still logged.
  PumpDecision set_pump(const ActuatorCommand& command, Timestamp now) {
    const bool on = std::get<PumpCommand>(command.action).on;
    if (pump_actuator_) pump_actuator_(on);
    pump_.on = on;
    pump_.last_toggle = now;
    return {pump_, {EventRecord{0, now, CommandRecord{command, true}}}};
  }

  const ControlConfig& config() const { return config_; }
  const AlertGateState& gate() const { return gate_; }
  const FeederState& feeder() const { return feeder_; }
  const PumpState& pump() const { return pump_; }
  std::optional<double> last_food_distance() const { return last_food_distance_; }

  /// Forget volatile sensor-derived state (food reading, active violations),
  /// as after a reboot. Cooldowns, feeder and pump state persist.
  void reset_volatile() {
    last_food_distance_.reset();
    active_.fill(std::nullopt);
  }

 private:
  bool cleared(const ThresholdRule& rule, Direction active, double value) const {
    const double h = config_.hysteresis;
    if (active == Direction::BelowLower) return !rule.lower || value >= *rule.lower + h;
    if (active == Direction::AboveUpper) return !rule.upper || value <= *rule.upper - h;
    return true;
  }

  ControlConfig config_;
  FeederActuator* feeder_actuator_;
  std::function<void(bool)> pump_actuator_;
  AlertGateState gate_;
  FeederState feeder_;
  PumpState pump_;
  std::optional<double> last_food_distance_;
  std::array<std::optional<Direction>, kKindCount> active_{};
};

}  // namespace aquarium
