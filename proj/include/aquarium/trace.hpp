#pragma once

// Ground-truth trace of the simulated tank, written alongside the event log
// and read back by the evaluator.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aquarium/plant.hpp"
#include "aquarium/serialization.hpp"

namespace aquarium {

enum class FaultWindowKind : std::uint8_t { NetworkOutage, PowerCycle };

struct FaultWindow {
  FaultWindowKind kind{};
  Timestamp start{};
  Timestamp end{};
  bool operator==(const FaultWindow&) const = default;
};

struct TraceSample {
  Timestamp timestamp{};
  PlantState state;
  bool operator==(const TraceSample&) const = default;
};

struct GroundTruthTrace {
  std::vector<TraceSample> samples;  // strictly increasing timestamps
  std::vector<FaultWindow> faults;

  void add(Timestamp t, const PlantState& s) {
    if (!samples.empty() && t <= samples.back().timestamp)
      throw std::invalid_argument("trace samples must have strictly increasing timestamps");
    samples.push_back({t, s});
  }

  /// Linear interpolation of the true value at `t`; clamps outside the trace.
  double value_at(ParameterKind kind, Timestamp t) const {
    if (samples.empty()) throw NoSamples("empty ground-truth trace");
    if (t <= samples.front().timestamp) return field(samples.front().state, kind);
    if (t >= samples.back().timestamp) return field(samples.back().state, kind);
    const auto hi = std::lower_bound(samples.begin(), samples.end(), t,
                                     [](const TraceSample& s, Timestamp v) { return s.timestamp < v; });
    const auto lo = hi - 1;
    const double span = to_seconds(hi->timestamp - lo->timestamp);
    const double w = to_seconds(t - lo->timestamp) / span;
    return field(lo->state, kind) * (1.0 - w) + field(hi->state, kind) * w;
  }

  bool operator==(const GroundTruthTrace&) const = default;
};

inline void to_json(Json& j, const PlantState& s) {
  j = Json{{"water_temp", s.water_temp}, {"air_temp", s.air_temp}, {"humidity", s.humidity},
           {"ph", s.ph},                 {"tds", s.tds},           {"turbidity", s.turbidity},
           {"food_depth", s.food_depth}, {"pump_on", s.pump_on},   {"sim_time", s.sim_time}};
}
inline void from_json(const Json& j, PlantState& s) {
  s.water_temp = j.at("water_temp").get<double>();
  s.air_temp = j.at("air_temp").get<double>();
  s.humidity = j.at("humidity").get<double>();
  s.ph = j.at("ph").get<double>();
  s.tds = j.at("tds").get<double>();
  s.turbidity = j.at("turbidity").get<double>();
  s.food_depth = j.at("food_depth").get<double>();
  s.pump_on = j.at("pump_on").get<bool>();
  s.sim_time = j.at("sim_time").get<double>();
}

inline void to_json(Json& j, const FaultWindow& f) {
  j = Json{{"type", "fault_window"},
           {"fault", f.kind == FaultWindowKind::NetworkOutage ? "network_outage" : "power_cycle"},
           {"start", f.start},
           {"end", f.end}};
}

inline std::string trace_file_name(const std::string& run_id) { return run_id + ".trace.ndjson"; }

/// Streams trace lines to disk as the run progresses.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path) : out_(path, std::ios::out | std::ios::trunc) {
    if (!out_) throw Error("cannot open trace " + path.string());
  }

  void sample(Timestamp t, const PlantState& s) {
    out_ << Json{{"type", "state"}, {"timestamp", t}, {"state", s}}.dump() << '\n';
  }
  void fault(const FaultWindow& f) { out_ << Json(f).dump() << '\n'; }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

inline GroundTruthTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read trace " + path.string());
  GroundTruthTrace trace;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const auto j = Json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "state") {
        trace.add(j.at("timestamp").get<Timestamp>(), j.at("state").get<PlantState>());
      } else if (type == "fault_window") {
        const auto fault = j.at("fault").get<std::string>();
        trace.faults.push_back({fault == "network_outage" ? FaultWindowKind::NetworkOutage
                                                          : FaultWindowKind::PowerCycle,
                                j.at("start").get<Timestamp>(), j.at("end").get<Timestamp>()});
      }
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace aquarium
