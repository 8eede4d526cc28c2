#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aquarium/time.hpp"

namespace aquarium {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define AQUARIUM_ERROR(Name)            \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

AQUARIUM_ERROR(HopperEmpty);
AQUARIUM_ERROR(ScriptOverlap);
AQUARIUM_ERROR(CurveMismatch);
AQUARIUM_ERROR(DegeneratePoints);
AQUARIUM_ERROR(SegmentClosed);
AQUARIUM_ERROR(ServiceStarting);
AQUARIUM_ERROR(InvalidPortions);
AQUARIUM_ERROR(ControlUnavailable);
AQUARIUM_ERROR(NoSamples);
AQUARIUM_ERROR(NoAlerts);
AQUARIUM_ERROR(ConfigError);

#undef AQUARIUM_ERROR

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

enum class ParameterKind : std::uint8_t {
  AirTemperature,
  Humidity,
  WaterTemperature,
  Tds,
  Ph,
  Turbidity,
  FoodDistance,
};

inline constexpr std::size_t kKindCount = 7;

inline constexpr std::array<ParameterKind, kKindCount> kAllKinds = {
    ParameterKind::AirTemperature, ParameterKind::Humidity, ParameterKind::WaterTemperature,
    ParameterKind::Tds,            ParameterKind::Ph,       ParameterKind::Turbidity,
    ParameterKind::FoodDistance,
};

inline constexpr std::size_t index_of(ParameterKind kind) { return static_cast<std::size_t>(kind); }

struct PhysicalRange {
  double lo;
  double hi;

  constexpr bool contains(double v) const { return v >= lo && v <= hi; }
  constexpr double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

inline constexpr std::string_view name(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::AirTemperature: return "air_temperature";
    case ParameterKind::Humidity: return "humidity";
    case ParameterKind::WaterTemperature: return "water_temperature";
    case ParameterKind::Tds: return "tds";
    case ParameterKind::Ph: return "ph";
    case ParameterKind::Turbidity: return "turbidity";
    case ParameterKind::FoodDistance: return "food_distance";
  }
  return "unknown";
}

inline constexpr std::string_view unit(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::AirTemperature:
    case ParameterKind::WaterTemperature: return "degC";
    case ParameterKind::Humidity: return "%RH";
    case ParameterKind::Tds: return "ppm";
    case ParameterKind::Ph: return "pH";
    case ParameterKind::Turbidity: return "NTU";
    case ParameterKind::FoodDistance: return "cm";
  }
  return "";
}

inline constexpr PhysicalRange physical_range(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::AirTemperature:
    case ParameterKind::WaterTemperature: return {-10.0, 60.0};
    case ParameterKind::Humidity: return {0.0, 100.0};
    case ParameterKind::Tds: return {0.0, 1000.0};
    case ParameterKind::Ph: return {0.0, 14.0};
    case ParameterKind::Turbidity: return {0.0, 1000.0};
    case ParameterKind::FoodDistance: return {0.0, 5.0};
  }
  return {0.0, 0.0};
}

inline std::optional<ParameterKind> parse_kind(std::string_view text) {
  for (auto k : kAllKinds)
    if (name(k) == text) return k;
  return std::nullopt;
}

enum class Quality : std::uint8_t { Valid, Smoothing, Invalid };

inline constexpr std::string_view name(Quality q) {
  switch (q) {
    case Quality::Valid: return "valid";
    case Quality::Smoothing: return "smoothing";
    case Quality::Invalid: return "invalid";
  }
  return "";
}

struct ParameterReading {
  ParameterKind kind{};
  double value = 0.0;
  Timestamp timestamp{};
  Quality quality = Quality::Valid;

  bool operator==(const ParameterReading&) const = default;
};

inline constexpr int kMaxCounts = 4095;

/// One converter sample; counts are on a 12-bit scale.
struct RawSample {
  ParameterKind channel{};
  int counts = 0;
  Millis monotonic_time{0};

  bool operator==(const RawSample&) const = default;
};

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

enum class RuleAction : std::uint8_t { Alert, AllowFeeding };

enum class Direction : std::uint8_t { BelowLower, AboveUpper, LowFood };

inline constexpr std::string_view name(Direction d) {
  switch (d) {
    case Direction::BelowLower: return "below_lower";
    case Direction::AboveUpper: return "above_upper";
    case Direction::LowFood: return "low_food";
  }
  return "";
}

struct ThresholdRule {
  ParameterKind kind{};
  std::optional<double> lower;
  std::optional<double> upper;
  RuleAction action = RuleAction::Alert;

  /// Checked constructor; throws ConfigError when no bound is given or lower >= upper.
  static ThresholdRule make(ParameterKind kind, std::optional<double> lower,
                            std::optional<double> upper, RuleAction action = RuleAction::Alert) {
    if (!lower && !upper) throw ConfigError("rule for " + std::string(name(kind)) + " has no bound");
    if (lower && upper && !(*lower < *upper))
      throw ConfigError("rule for " + std::string(name(kind)) + " needs lower < upper");
    return ThresholdRule{kind, lower, upper, action};
  }

  bool operator==(const ThresholdRule&) const = default;
};

/// The safe bands of the reference deployment: six alert rules and the feeding gate.
inline std::vector<ThresholdRule> default_rules() {
  using K = ParameterKind;
  return {
      ThresholdRule::make(K::AirTemperature, 15.0, 30.0),
      ThresholdRule::make(K::Humidity, 30.0, 80.0),
      ThresholdRule::make(K::WaterTemperature, 24.0, 28.0),
      ThresholdRule::make(K::Tds, 180.0, 280.0),
      ThresholdRule::make(K::Ph, 6.8, 8.2),
      ThresholdRule::make(K::Turbidity, std::nullopt, 50.0),
      ThresholdRule::make(K::FoodDistance, std::nullopt, 5.0, RuleAction::AllowFeeding),
  };
}

/// Safe bands are closed: a value equal to a bound does not violate it.
inline std::optional<Direction> violates(const ThresholdRule& rule, double value) {
  if (rule.lower && value < *rule.lower) return Direction::BelowLower;
  if (rule.upper && value > *rule.upper) return Direction::AboveUpper;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Commands, alerts, events
// ---------------------------------------------------------------------------

enum class CommandSource : std::uint8_t { Manual, Schedule };

struct FeedCommand {
  int portions = 1;
  bool operator==(const FeedCommand&) const = default;
};

struct PumpCommand {
  bool on = true;
  bool operator==(const PumpCommand&) const = default;
};

struct ActuatorCommand {
  std::variant<FeedCommand, PumpCommand> action;
  CommandSource source = CommandSource::Manual;
  Timestamp timestamp{};

  bool operator==(const ActuatorCommand&) const = default;
};

/// Identifies an independent cooldown channel. LowFood alerts carry no parameter kind.
struct AlertKey {
  std::optional<ParameterKind> kind;
  Direction direction{};

  auto operator<=>(const AlertKey&) const = default;
};

struct AlertEvent {
  std::optional<ParameterKind> kind;  // nullopt for LowFood
  Direction direction{};
  double observed_value = 0.0;
  Timestamp timestamp{};
  std::string message;

  AlertKey key() const { return {kind, direction}; }
  bool operator==(const AlertEvent&) const = default;
};

enum class FaultKind : std::uint8_t { NetworkDown, NetworkUp, PowerLoss, PowerRestore };

inline constexpr std::string_view name(FaultKind f) {
  switch (f) {
    case FaultKind::NetworkDown: return "network_down";
    case FaultKind::NetworkUp: return "network_up";
    case FaultKind::PowerLoss: return "power_loss";
    case FaultKind::PowerRestore: return "power_restore";
  }
  return "";
}

enum class FeedOutcome : std::uint8_t { Dispensed, RejectedLowFood, Jammed, NoReading };

inline constexpr std::string_view name(FeedOutcome o) {
  switch (o) {
    case FeedOutcome::Dispensed: return "dispensed";
    case FeedOutcome::RejectedLowFood: return "rejected_low_food";
    case FeedOutcome::Jammed: return "jammed";
    case FeedOutcome::NoReading: return "no_reading";
  }
  return "";
}

struct SensorSnapshot {
  std::uint64_t cycle = 0;
  std::vector<ParameterReading> readings;
  bool operator==(const SensorSnapshot&) const = default;
};

struct CommandRecord {
  ActuatorCommand command;
  bool acknowledged = true;
  bool operator==(const CommandRecord&) const = default;
};

struct AlertRecord {
  AlertEvent alert;
  bool suppressed = false;
  bool operator==(const AlertRecord&) const = default;
};

struct SystemFault {
  FaultKind fault{};
  bool operator==(const SystemFault&) const = default;
};

struct FeedResult {
  FeedOutcome outcome{};
  int portions = 0;
  double grams = 0.0;
  bool operator==(const FeedResult&) const = default;
};

/// A parameter re-entered its safe band.
struct RecoveryNote {
  ParameterKind kind{};
  Direction cleared{};
  double value = 0.0;
  bool operator==(const RecoveryNote&) const = default;
};

/// First successful delivery of queued records after the uplink came back.
struct PublisherDrain {
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  bool operator==(const PublisherDrain&) const = default;
};

using EventPayload = std::variant<SensorSnapshot, CommandRecord, AlertRecord, SystemFault,
                                  FeedResult, RecoveryNote, PublisherDrain>;

struct EventRecord {
  std::uint64_t sequence_number = 0;  // 0 until appended to a log segment
  Timestamp timestamp{};
  EventPayload payload;

  bool operator==(const EventRecord&) const = default;
};

template <typename T>
const T* payload_if(const EventRecord& r) {
  return std::get_if<T>(&r.payload);
}

}  // namespace aquarium
