#pragma once

// Offline evaluation of a run: readings against the ground-truth trace,
// alerts against ground-truth violation episodes, recovery after faults and
// actuator endurance.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aquarium/domain.hpp"
#include "aquarium/serialization.hpp"
#include "aquarium/trace.hpp"

namespace aquarium {

/// Evaluator tolerances in engineering units, for the parameters that are scored.
inline std::optional<double> default_tolerance(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::WaterTemperature: return 0.5;
    case ParameterKind::Ph: return 0.3;
    case ParameterKind::Tds: return 25.0;
    case ParameterKind::Turbidity: return 10.0;
    default: return std::nullopt;
  }
}

inline constexpr std::array<ParameterKind, 4> kScoredKinds = {
    ParameterKind::WaterTemperature, ParameterKind::Turbidity, ParameterKind::Ph, ParameterKind::Tds};

inline double percent(std::uint64_t part, std::uint64_t whole) {
  return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

// ---------------------------------------------------------------------------
// Accuracy
// ---------------------------------------------------------------------------

inline std::vector<ParameterReading> valid_readings(const std::vector<EventRecord>& log, ParameterKind kind) {
  std::vector<ParameterReading> out;
  for (const auto& r : log)
    if (const auto* snap = payload_if<SensorSnapshot>(r))
      for (const auto& reading : snap->readings)
        if (reading.kind == kind && reading.quality == Quality::Valid) out.push_back(reading);
  return out;
}

inline double accuracy(const GroundTruthTrace& trace, const std::vector<EventRecord>& log, ParameterKind kind,
                       double tolerance) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const auto readings = valid_readings(log, kind);
  if (readings.empty()) throw NoSamples("no valid " + std::string(name(kind)) + " readings");
  std::uint64_t hits = 0;
  for (const auto& r : readings)
    if (std::abs(r.value - trace.value_at(kind, r.timestamp)) <= tolerance) ++hits;
  return percent(hits, readings.size());
}

// ---------------------------------------------------------------------------
// Episodes and alert quality
// ---------------------------------------------------------------------------

struct Episode {
  ParameterKind kind{};
  Direction direction{};
  Timestamp start{};
  Timestamp end{};
  bool operator==(const Episode&) const = default;
};

namespace detail {

inline bool outside(Direction d, double bound, double v) {
  return d == Direction::BelowLower ? v < bound : v > bound;
}

/// Linear-interpolated instant at which the segment (t0,v0)-(t1,v1) reaches `bound`.
inline Timestamp crossing(Timestamp t0, double v0, Timestamp t1, double v1, double bound) {
  if (v1 == v0) return t1;
  const double w = std::clamp((bound - v0) / (v1 - v0), 0.0, 1.0);
  return t0 + seconds_to_millis(w * to_seconds(t1 - t0));
}

}  // namespace detail

/// Maximal intervals where the true value violates an alerting rule, with
/// edges placed at the interpolated crossing instants.
inline std::vector<Episode> episodes(const GroundTruthTrace& trace, const std::vector<ThresholdRule>& rules) {
  std::vector<Episode> out;
  for (const auto& rule : rules) {
    if (rule.action != RuleAction::Alert) continue;
    for (auto direction : {Direction::BelowLower, Direction::AboveUpper}) {
      const auto bound = direction == Direction::BelowLower ? rule.lower : rule.upper;
      if (!bound) continue;
      std::optional<Timestamp> start;
      for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const auto& s = trace.samples[i];
        const double v = field(s.state, rule.kind);
        const bool bad = detail::outside(direction, *bound, v);
        if (bad && !start) {
          start = i == 0 ? s.timestamp
                         : detail::crossing(trace.samples[i - 1].timestamp,
                                            field(trace.samples[i - 1].state, rule.kind), s.timestamp, v, *bound);
        } else if (!bad && start) {
          const auto end = detail::crossing(trace.samples[i - 1].timestamp,
                                            field(trace.samples[i - 1].state, rule.kind), s.timestamp, v, *bound);
          out.push_back({rule.kind, direction, *start, end});
          start.reset();
        }
      }
      if (start) out.push_back({rule.kind, direction, *start, trace.samples.back().timestamp});
    }
  }
  std::sort(out.begin(), out.end(), [](const Episode& a, const Episode& b) {
    return std::tie(a.start, a.kind, a.direction) < std::tie(b.start, b.kind, b.direction);
  });
  return out;
}

/// Emitted parameter alerts; suppressed duplicates and LowFood are not scored.
inline std::vector<AlertEvent> emitted_alerts(const std::vector<EventRecord>& log) {
  std::vector<AlertEvent> out;
  for (const auto& r : log)
    if (const auto* a = payload_if<AlertRecord>(r); a && !a->suppressed && a->alert.kind)
      out.push_back(a->alert);
  return out;
}

inline bool matches(const Episode& e, const AlertEvent& a, Millis poll_period) {
  return a.kind == e.kind && a.direction == e.direction && a.timestamp >= e.start &&
         a.timestamp <= e.end + poll_period;
}

struct AlertQuality {
  std::optional<double> precision;  // nullopt when nothing was alerted
  std::optional<double> recall;     // nullopt when there were no episodes
  std::uint64_t alerts = 0;
  std::uint64_t true_positives = 0;
  std::uint64_t episodes = 0;
  std::uint64_t detected = 0;
};

inline AlertQuality alert_quality(const std::vector<Episode>& eps, const std::vector<AlertEvent>& alerts,
                                  Millis poll_period) {
  AlertQuality q;
  q.alerts = alerts.size();
  q.episodes = eps.size();
  for (const auto& a : alerts)
    if (std::any_of(eps.begin(), eps.end(), [&](const Episode& e) { return matches(e, a, poll_period); }))
      ++q.true_positives;
  for (const auto& e : eps)
    if (std::any_of(alerts.begin(), alerts.end(), [&](const AlertEvent& a) { return matches(e, a, poll_period); }))
      ++q.detected;
  if (q.alerts) q.precision = percent(q.true_positives, q.alerts);
  if (q.episodes) q.recall = percent(q.detected, q.episodes);
  return q;
}

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

/// Value at rank ceil(p*n/100) of the sorted sample.
inline double nearest_rank(std::vector<double> values, int p) {
  if (values.empty()) throw NoAlerts("no values to rank");
  if (p < 1 || p > 100) throw std::invalid_argument("percentile must be in [1, 100]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t rank = (static_cast<std::size_t>(p) * n + 99) / 100;
  return values[std::max<std::size_t>(rank, 1) - 1];
}

/// Seconds from each detected episode's start to its first matching alert.
inline std::vector<double> detection_latencies(const std::vector<Episode>& eps,
                                               const std::vector<AlertEvent>& alerts, Millis poll_period) {
  std::vector<double> out;
  for (const auto& e : eps) {
    std::optional<Timestamp> first;
    for (const auto& a : alerts)
      if (matches(e, a, poll_period) && (!first || a.timestamp < *first)) first = a.timestamp;
    if (first) out.push_back(seconds_between(e.start, *first));
  }
  return out;
}

struct Latency {
  double p50 = 0.0;
  double p95 = 0.0;
  std::size_t samples = 0;
};

inline Latency latency_percentiles(const std::vector<double>& latencies) {
  if (latencies.empty()) throw NoAlerts("no true-positive alerts");
  return {nearest_rank(latencies, 50), nearest_rank(latencies, 95), latencies.size()};
}

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------

struct Recovery {
  std::vector<double> network_s;  // outage start to first successful publish
  std::uint64_t network_outages = 0;
  std::vector<double> power_s;  // power loss to first record after restart
  std::uint64_t power_losses = 0;
  std::uint64_t records_lost = 0;  // sequence numbers never persisted

  std::optional<double> network_success() const {
    return network_outages ? std::optional(percent(network_s.size(), network_outages)) : std::nullopt;
  }
  std::optional<double> power_success() const {
    return power_losses ? std::optional(percent(power_s.size(), power_losses)) : std::nullopt;
  }
};

/// `log` must be in sequence order.
inline Recovery recovery_times(const std::vector<EventRecord>& log) {
  Recovery out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (i > 0 && log[i].sequence_number > log[i - 1].sequence_number + 1)
      out.records_lost += log[i].sequence_number - log[i - 1].sequence_number - 1;
    const auto* fault = payload_if<SystemFault>(log[i]);
    if (!fault) continue;
    if (fault->fault == FaultKind::NetworkDown) {
      ++out.network_outages;
      for (std::size_t k = i + 1; k < log.size(); ++k) {
        if (payload_if<PublisherDrain>(log[k])) {
          out.network_s.push_back(seconds_between(log[i].timestamp, log[k].timestamp));
          break;
        }
        if (const auto* f = payload_if<SystemFault>(log[k]); f && f->fault == FaultKind::NetworkDown) break;
      }
    } else if (fault->fault == FaultKind::PowerLoss) {
      ++out.power_losses;
      for (std::size_t k = i + 1; k < log.size(); ++k) {
        if (log[k].timestamp > log[i].timestamp) {
          out.power_s.push_back(seconds_between(log[i].timestamp, log[k].timestamp));
          break;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Endurance
// ---------------------------------------------------------------------------

struct Endurance {
  std::uint64_t feed_attempts = 0;
  std::uint64_t jams = 0;
  std::uint64_t rejected_low_food = 0;
  std::uint64_t no_reading = 0;
  double grams_dispensed = 0.0;
  std::uint64_t pump_commands = 0;
  std::uint64_t pump_acknowledged = 0;

  std::optional<double> servo_success() const {
    return feed_attempts ? std::optional(percent(feed_attempts - jams, feed_attempts)) : std::nullopt;
  }
  std::optional<double> pump_success() const {
    return pump_commands ? std::optional(percent(pump_acknowledged, pump_commands)) : std::nullopt;
  }
};

inline Endurance endurance(const std::vector<EventRecord>& log) {
  Endurance e;
  for (const auto& r : log) {
    if (const auto* f = payload_if<FeedResult>(r)) {
      switch (f->outcome) {
        case FeedOutcome::Dispensed: ++e.feed_attempts; break;
        case FeedOutcome::Jammed: ++e.feed_attempts; ++e.jams; break;
        case FeedOutcome::RejectedLowFood: ++e.rejected_low_food; break;
        case FeedOutcome::NoReading: ++e.no_reading; break;
      }
      e.grams_dispensed += f->grams;
    } else if (const auto* c = payload_if<CommandRecord>(r);
               c && std::holds_alternative<PumpCommand>(c->command.action)) {
      ++e.pump_commands;
      if (c->acknowledged) ++e.pump_acknowledged;
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct MetricsReport {
  std::map<ParameterKind, std::optional<double>> accuracy;
  AlertQuality alerts;
  std::optional<Latency> latency;
  Recovery recovery;
  Endurance endurance;
  std::uint64_t records = 0;
  std::uint64_t corrupt_records = 0;
};

inline MetricsReport evaluate(const GroundTruthTrace& trace, const std::vector<EventRecord>& log,
                              const std::vector<ThresholdRule>& rules, Millis poll_period,
                              std::uint64_t corrupt_records = 0) {
  MetricsReport report;
  report.records = log.size();
  report.corrupt_records = corrupt_records;
  for (auto kind : kScoredKinds) {
    report.accuracy[kind] = std::nullopt;
    if (trace.samples.empty()) continue;
    try {
      report.accuracy[kind] = accuracy(trace, log, kind, *default_tolerance(kind));
    } catch (const NoSamples&) {
    }
  }
  const auto alerts = emitted_alerts(log);
  const auto eps = trace.samples.empty() ? std::vector<Episode>{} : episodes(trace, rules);
  report.alerts = alert_quality(eps, alerts, poll_period);
  if (const auto lat = detection_latencies(eps, alerts, poll_period); !lat.empty())
    report.latency = latency_percentiles(lat);
  report.recovery = recovery_times(log);
  report.endurance = endurance(log);
  return report;
}

namespace detail {

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::string fmt(const std::optional<double>& v, const char* spec = "%.2f") {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, *v);
  return buf;
}

inline std::string list(const std::vector<double>& v) {
  if (v.empty()) return "n/a";
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ", ") + fmt(x, "%.1f");
  return out;
}

}  // namespace detail

inline void to_json(Json& j, const MetricsReport& r) {
  Json acc = Json::object();
  for (const auto& [kind, value] : r.accuracy) acc[std::string(name(kind))] = detail::optional_json(value);
  j = Json{
      {"accuracy_percent", acc},
      {"alerts",
       {{"precision_percent", detail::optional_json(r.alerts.precision)},
        {"recall_percent", detail::optional_json(r.alerts.recall)},
        {"emitted", r.alerts.alerts},
        {"true_positives", r.alerts.true_positives},
        {"episodes", r.alerts.episodes},
        {"detected", r.alerts.detected}}},
      {"latency_s",
       r.latency ? Json{{"p50", r.latency->p50}, {"p95", r.latency->p95}, {"samples", r.latency->samples}}
                 : Json(nullptr)},
      {"recovery",
       {{"network_s", r.recovery.network_s},
        {"network_outages", r.recovery.network_outages},
        {"network_success_percent", detail::optional_json(r.recovery.network_success())},
        {"power_s", r.recovery.power_s},
        {"power_losses", r.recovery.power_losses},
        {"power_success_percent", detail::optional_json(r.recovery.power_success())},
        {"records_lost", r.recovery.records_lost}}},
      {"endurance",
       {{"feed_attempts", r.endurance.feed_attempts},
        {"jams", r.endurance.jams},
        {"servo_success_percent", detail::optional_json(r.endurance.servo_success())},
        {"rejected_low_food", r.endurance.rejected_low_food},
        {"no_reading", r.endurance.no_reading},
        {"grams_dispensed", r.endurance.grams_dispensed},
        {"pump_commands", r.endurance.pump_commands},
        {"pump_success_percent", detail::optional_json(r.endurance.pump_success())}}},
      {"records", r.records},
      {"corrupt_records", r.corrupt_records},
  };
}

/// Human-readable table: one row per measured quantity.
inline std::string format_table(const MetricsReport& r) {
  std::ostringstream out;
  char line[200];
  auto row = [&](const std::string& metric, const std::string& value, const std::string& remark) {
    std::snprintf(line, sizeof line, "%-30s %-10s %s\n", metric.c_str(), value.c_str(), remark.c_str());
    out << line;
  };
  row("Metric", "Value", "Remarks");
  row("------", "-----", "-------");
  for (auto kind : kScoredKinds) {
    char tol[48];
    std::snprintf(tol, sizeof tol, "within +/-%g %s", *default_tolerance(kind), std::string(unit(kind)).c_str());
    row(std::string(name(kind)) + " accuracy %", detail::fmt(r.accuracy.at(kind)), tol);
  }
  row("Alert precision %", detail::fmt(r.alerts.precision),
      std::to_string(r.alerts.true_positives) + "/" + std::to_string(r.alerts.alerts) + " alerts matched");
  row("Alert recall %", detail::fmt(r.alerts.recall),
      std::to_string(r.alerts.detected) + "/" + std::to_string(r.alerts.episodes) + " episodes alerted");
  row("Latency p50 (s)", r.latency ? detail::fmt(r.latency->p50, "%.1f") : "n/a", "");
  row("Latency p95 (s)", r.latency ? detail::fmt(r.latency->p95, "%.1f") : "n/a",
      r.latency ? std::to_string(r.latency->samples) + " episodes" : "");
  row("Network recovery (s)", detail::list(r.recovery.network_s),
      "success " + detail::fmt(r.recovery.network_success(), "%.0f") + "%");
  row("Power recovery (s)", detail::list(r.recovery.power_s),
      "success " + detail::fmt(r.recovery.power_success(), "%.0f") + "%");
  row("Records lost", std::to_string(r.recovery.records_lost), "across power loss");
  row("Servo success %", detail::fmt(r.endurance.servo_success()),
      std::to_string(r.endurance.jams) + " jams in " + std::to_string(r.endurance.feed_attempts) + " feeds");
  row("Pump success %", detail::fmt(r.endurance.pump_success()),
      std::to_string(r.endurance.pump_commands) + " commands");
  row("Food dispensed (g)", detail::fmt(r.endurance.grams_dispensed, "%.1f"),
      std::to_string(r.endurance.rejected_low_food) + " low-food rejections");
  if (r.corrupt_records) row("Corrupt records", std::to_string(r.corrupt_records), "skipped");
  return out.str();
}

}  // namespace aquarium
