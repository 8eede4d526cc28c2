#pragma once

// Canonical JSON shapes for every domain type. Field names are lower_snake_case
// and timestamps are ISO-8601 UTC strings with millisecond precision.

#include <string>
#include <string_view>

#include "json.hpp"

#include "aquarium/domain.hpp"

namespace nlohmann {

template <>
struct adl_serializer<aquarium::Timestamp> {
  static void to_json(json& j, const aquarium::Timestamp& t) { j = aquarium::to_iso8601(t); }
  static void from_json(const json& j, aquarium::Timestamp& t) {
    t = aquarium::parse_iso8601(j.get<std::string>());
  }
};

}  // namespace nlohmann

namespace aquarium {

using Json = nlohmann::json;

namespace detail {

template <typename Enum, std::size_t N>
Enum enum_from(const Json& j, const std::array<Enum, N>& values, std::string_view what) {
  const auto text = j.get<std::string>();
  for (auto v : values)
    if (name(v) == text) return v;
  throw Json::other_error::create(501, "unknown " + std::string(what) + ": " + text, &j);
}

inline constexpr std::array<Quality, 3> kQualities = {Quality::Valid, Quality::Smoothing,
                                                      Quality::Invalid};
inline constexpr std::array<Direction, 3> kDirections = {
    Direction::BelowLower, Direction::AboveUpper, Direction::LowFood};
inline constexpr std::array<FaultKind, 4> kFaults = {
    FaultKind::NetworkDown, FaultKind::NetworkUp, FaultKind::PowerLoss, FaultKind::PowerRestore};
inline constexpr std::array<FeedOutcome, 4> kFeedOutcomes = {
    FeedOutcome::Dispensed, FeedOutcome::RejectedLowFood, FeedOutcome::Jammed,
    FeedOutcome::NoReading};

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::optional<double> optional_number(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline void to_json(Json& j, ParameterKind k) { j = std::string(name(k)); }
inline void from_json(const Json& j, ParameterKind& k) {
  k = detail::enum_from(j, kAllKinds, "parameter kind");
}
inline void to_json(Json& j, Quality q) { j = std::string(name(q)); }
inline void from_json(const Json& j, Quality& q) { q = detail::enum_from(j, detail::kQualities, "quality"); }
inline void to_json(Json& j, Direction d) { j = std::string(name(d)); }
inline void from_json(const Json& j, Direction& d) {
  d = detail::enum_from(j, detail::kDirections, "direction");
}

inline void to_json(Json& j, const ParameterReading& r) {
  j = Json{{"kind", r.kind}, {"value", r.value}, {"timestamp", r.timestamp}, {"quality", r.quality}};
}
inline void from_json(const Json& j, ParameterReading& r) {
  r.kind = j.at("kind").get<ParameterKind>();
  r.value = j.at("value").get<double>();
  r.timestamp = j.at("timestamp").get<Timestamp>();
  r.quality = j.at("quality").get<Quality>();
}

inline void to_json(Json& j, const RawSample& s) {
  j = Json{{"channel", s.channel}, {"counts", s.counts}, {"monotonic_time", s.monotonic_time.count()}};
}
inline void from_json(const Json& j, RawSample& s) {
  s.channel = j.at("channel").get<ParameterKind>();
  s.counts = j.at("counts").get<int>();
  s.monotonic_time = Millis{j.at("monotonic_time").get<std::int64_t>()};
}

inline void to_json(Json& j, const ThresholdRule& r) {
  j = Json{{"kind", r.kind},
           {"lower", detail::optional_number(r.lower)},
           {"upper", detail::optional_number(r.upper)},
           {"action", r.action == RuleAction::Alert ? "alert" : "allow_feeding"}};
}
inline void from_json(const Json& j, ThresholdRule& r) {
  const auto action = j.at("action").get<std::string>();
  if (action != "alert" && action != "allow_feeding")
    throw Json::other_error::create(501, "unknown rule action: " + action, &j);
  r = ThresholdRule::make(j.at("kind").get<ParameterKind>(), detail::optional_number(j.at("lower")),
                          detail::optional_number(j.at("upper")),
                          action == "alert" ? RuleAction::Alert : RuleAction::AllowFeeding);
}

inline void to_json(Json& j, const ActuatorCommand& c) {
  if (const auto* feed = std::get_if<FeedCommand>(&c.action))
    j = Json{{"variant", "feed"}, {"portions", feed->portions}};
  else
    j = Json{{"variant", "pump_set"}, {"on", std::get<PumpCommand>(c.action).on}};
  j["source"] = c.source == CommandSource::Manual ? "manual" : "schedule";
  j["timestamp"] = c.timestamp;
}
inline void from_json(const Json& j, ActuatorCommand& c) {
  const auto variant = j.at("variant").get<std::string>();
  if (variant == "feed")
    c.action = FeedCommand{j.at("portions").get<int>()};
  else if (variant == "pump_set")
    c.action = PumpCommand{j.at("on").get<bool>()};
  else
    throw Json::other_error::create(501, "unknown command variant: " + variant, &j);
  c.source = j.at("source").get<std::string>() == "schedule" ? CommandSource::Schedule
                                                             : CommandSource::Manual;
  c.timestamp = j.at("timestamp").get<Timestamp>();
}

inline void to_json(Json& j, const AlertEvent& a) {
  j = Json{{"kind", a.kind ? Json(*a.kind) : Json("low_food")},
           {"direction", a.direction},
           {"observed_value", a.observed_value},
           {"timestamp", a.timestamp},
           {"message", a.message}};
}
inline void from_json(const Json& j, AlertEvent& a) {
  const auto& kind = j.at("kind");
  if (kind.get<std::string>() == "low_food")
    a.kind.reset();
  else
    a.kind = kind.get<ParameterKind>();
  a.direction = j.at("direction").get<Direction>();
  a.observed_value = j.at("observed_value").get<double>();
  a.timestamp = j.at("timestamp").get<Timestamp>();
  a.message = j.at("message").get<std::string>();
}

namespace detail {

struct PayloadWriter {
  Json& j;
  void operator()(const SensorSnapshot& s) const {
    j = Json{{"type", "sensor_snapshot"}, {"cycle", s.cycle}, {"readings", s.readings}};
  }
  void operator()(const CommandRecord& c) const {
    j = Json{{"type", "command"}, {"command", c.command}, {"acknowledged", c.acknowledged}};
  }
  void operator()(const AlertRecord& a) const {
    j = Json{{"type", "alert"}, {"alert", a.alert}, {"suppressed", a.suppressed}};
  }
  void operator()(const SystemFault& f) const {
    j = Json{{"type", "system_fault"}, {"fault", std::string(name(f.fault))}};
  }
  void operator()(const FeedResult& f) const {
    j = Json{{"type", "feed_result"},
             {"outcome", std::string(name(f.outcome))},
             {"portions", f.portions},
             {"grams", f.grams}};
  }
  void operator()(const RecoveryNote& r) const {
    j = Json{{"type", "recovery_note"}, {"kind", r.kind}, {"cleared", r.cleared}, {"value", r.value}};
  }
  void operator()(const PublisherDrain& d) const {
    j = Json{{"type", "publisher_drain"}, {"delivered", d.delivered}, {"dropped", d.dropped}};
  }
};

}  // namespace detail

inline void to_json(Json& j, const EventPayload& p) { std::visit(detail::PayloadWriter{j}, p); }

inline void from_json(const Json& j, EventPayload& p) {
  const auto type = j.at("type").get<std::string>();
  if (type == "sensor_snapshot") {
    p = SensorSnapshot{j.at("cycle").get<std::uint64_t>(),
                       j.at("readings").get<std::vector<ParameterReading>>()};
  } else if (type == "command") {
    p = CommandRecord{j.at("command").get<ActuatorCommand>(), j.at("acknowledged").get<bool>()};
  } else if (type == "alert") {
    p = AlertRecord{j.at("alert").get<AlertEvent>(), j.at("suppressed").get<bool>()};
  } else if (type == "system_fault") {
    p = SystemFault{detail::enum_from(j.at("fault"), detail::kFaults, "fault")};
  } else if (type == "feed_result") {
    p = FeedResult{detail::enum_from(j.at("outcome"), detail::kFeedOutcomes, "feed outcome"),
                   j.at("portions").get<int>(), j.at("grams").get<double>()};
  } else if (type == "recovery_note") {
    p = RecoveryNote{j.at("kind").get<ParameterKind>(), j.at("cleared").get<Direction>(),
                     j.at("value").get<double>()};
  } else if (type == "publisher_drain") {
    p = PublisherDrain{j.at("delivered").get<std::uint64_t>(), j.at("dropped").get<std::uint64_t>()};
  } else {
    throw Json::other_error::create(501, "unknown payload type: " + type, &j);
  }
}

inline void to_json(Json& j, const EventRecord& r) {
  j = Json{{"sequence_number", r.sequence_number}, {"timestamp", r.timestamp}, {"payload", r.payload}};
}
inline void from_json(const Json& j, EventRecord& r) {
  r.sequence_number = j.at("sequence_number").get<std::uint64_t>();
  r.timestamp = j.at("timestamp").get<Timestamp>();
  r.payload = j.at("payload").get<EventPayload>();
}

/// One compact line, no trailing newline.
template <typename T>
std::string to_line(const T& value) {
  return Json(value).dump();
}

}  // namespace aquarium
