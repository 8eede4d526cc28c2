#pragma once

// 16x2 character LCD emulation. One parameter per page, pages advancing every
// 3 s in fixed kind order.

#include <array>
#include <cstdio>
#include <optional>
#include <string>

#include "aquarium/serialization.hpp"

namespace aquarium {

inline constexpr std::size_t kLcdColumns = 16;
inline constexpr Millis kPagePeriod{3000};

struct LcdFrame {
  std::string line1;
  std::string line2;
  bool operator==(const LcdFrame&) const = default;
};

inline std::string fit(std::string s) {
  if (s.size() > kLcdColumns) s.resize(kLcdColumns);
  return s;
}

inline std::string lcd_label(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::AirTemperature: return "Air";
    case ParameterKind::Humidity: return "Hum";
    case ParameterKind::WaterTemperature: return "Water";
    case ParameterKind::Tds: return "TDS";
    case ParameterKind::Ph: return "pH";
    case ParameterKind::Turbidity: return "Turb";
    case ParameterKind::FoodDistance: return "Food";
  }
  return "?";
}

/// First line of a page, e.g. "pH: 7.02" or "Water: 26.1C".
inline std::string lcd_value_line(ParameterKind kind, double value) {
  char buf[48];
  switch (kind) {
    case ParameterKind::AirTemperature:
    case ParameterKind::WaterTemperature: std::snprintf(buf, sizeof buf, "%s: %.1fC", lcd_label(kind).c_str(), value); break;
    case ParameterKind::Humidity: std::snprintf(buf, sizeof buf, "Hum: %.1f%%", value); break;
    case ParameterKind::Tds: std::snprintf(buf, sizeof buf, "TDS: %.0fppm", value); break;
    case ParameterKind::Ph: std::snprintf(buf, sizeof buf, "pH: %.2f", value); break;
    case ParameterKind::Turbidity: std::snprintf(buf, sizeof buf, "Turb: %.1fNTU", value); break;
    case ParameterKind::FoodDistance: std::snprintf(buf, sizeof buf, "Food: %.2fcm", value); break;
  }
  return fit(buf);
}

/// Page index shown at `elapsed` since the display started.
inline std::size_t page_at(Millis elapsed) {
  return static_cast<std::size_t>(elapsed / kPagePeriod) % kKindCount;
}

/// Renders one page from a /api/readings body. Kinds missing from the
/// snapshot show dashes.
inline LcdFrame render_page(const Json& snapshot, std::size_t page) {
  const auto kind = kAllKinds.at(page % kKindCount);
  const std::string key(name(kind));
  for (const auto& r : snapshot.at("readings")) {
    if (r.at("kind").get<std::string>() != key) continue;
    const auto status = snapshot.at("statuses").value(key, "ok");
    const auto quality = r.at("quality").get<std::string>();
    std::string second = status == "alert" ? "ALERT" : "OK";
    if (quality != "valid") second = quality;
    return {lcd_value_line(kind, r.at("value").get<double>()), fit(second)};
  }
  return {fit(lcd_label(kind) + ": --"), "no reading"};
}

inline LcdFrame retry_frame(int attempt) {
  return {"Service down", fit("retry #" + std::to_string(attempt))};
}

inline std::string draw(const LcdFrame& f) {
  std::string border = "+" + std::string(kLcdColumns, '-') + "+\n";
  auto pad = [](const std::string& s) { return s + std::string(kLcdColumns - s.size(), ' '); };
  return border + "|" + pad(f.line1) + "|\n|" + pad(f.line2) + "|\n" + border;
}

}  // namespace aquarium
