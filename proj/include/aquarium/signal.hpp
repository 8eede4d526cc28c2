#pragma once

// Edge conditioning: counts -> engineering units (two-point linear calibration),
// physical-range validation, then a five-sample moving average.

#include <array>
#include <cmath>
#include <deque>
#include <numeric>
#include <optional>
#include <string>

#include "aquarium/domain.hpp"
#include "aquarium/text_config.hpp"

namespace aquarium {

struct CalibrationPoint {
  int counts = 0;
  double value = 0.0;
};

/// Linear map through two calibration points. Evaluated as an interpolation
/// between the points so both calibration points reproduce exactly.
struct CalibrationCurve {
  ParameterKind kind{};
  CalibrationPoint p1{0, 0.0};
  CalibrationPoint p2{kMaxCounts, 1.0};

  double slope() const { return (p2.value - p1.value) / static_cast<double>(p2.counts - p1.counts); }
  double intercept() const { return apply(0.0); }

  double apply(double counts) const {
    const double t = (counts - p1.counts) / static_cast<double>(p2.counts - p1.counts);
    return p1.value * (1.0 - t) + p2.value * t;
  }

  /// Fractional counts that would calibrate to `value`.
  double inverse(double value) const {
    return p1.counts + (value - p1.value) / (p2.value - p1.value) * (p2.counts - p1.counts);
  }

  bool operator==(const CalibrationCurve& o) const {
    return kind == o.kind && p1.counts == o.p1.counts && p1.value == o.p1.value &&
           p2.counts == o.p2.counts && p2.value == o.p2.value;
  }
};

inline CalibrationCurve fit_curve(ParameterKind kind, CalibrationPoint p1, CalibrationPoint p2) {
  if (p1.counts == p2.counts)
    throw DegeneratePoints("calibration points for " + std::string(name(kind)) +
                           " share counts " + std::to_string(p1.counts));
  if (p1.value == p2.value || !std::isfinite(p1.value) || !std::isfinite(p2.value))
    throw DegeneratePoints("calibration for " + std::string(name(kind)) + " is not strictly monotone");
  return {kind, p1, p2};
}

/// Full 12-bit scale mapped onto the kind's physical range.
inline CalibrationCurve default_curve(ParameterKind kind) {
  const auto range = physical_range(kind);
  return fit_curve(kind, {0, range.lo}, {kMaxCounts, range.hi});
}

inline double calibrate(const RawSample& sample, const CalibrationCurve& curve) {
  if (sample.channel != curve.kind)
    throw CurveMismatch("sample channel " + std::string(name(sample.channel)) +
                        " does not match curve " + std::string(name(curve.kind)));
  return curve.apply(sample.counts);
}

inline Quality validate(ParameterKind kind, double value) {
  return std::isfinite(value) && physical_range(kind).contains(value) ? Quality::Valid
                                                                      : Quality::Invalid;
}

struct SmoothingWindow {
  static constexpr std::size_t kDefaultCapacity = 5;

  ParameterKind kind{};
  std::size_t capacity = kDefaultCapacity;
  std::deque<double> buffer{};

  bool operator==(const SmoothingWindow&) const = default;
};

struct SmoothResult {
  SmoothingWindow window;
  double mean = 0.0;
  Quality quality = Quality::Smoothing;
};

/// Appends `value`, evicting the oldest entry when full, and reports the buffer mean.
inline SmoothResult smooth(SmoothingWindow window, double value) {
  window.buffer.push_back(value);
  while (window.buffer.size() > window.capacity) window.buffer.pop_front();
  const double sum = std::accumulate(window.buffer.begin(), window.buffer.end(), 0.0);
  const double mean = sum / static_cast<double>(window.buffer.size());
  const auto quality =
      window.buffer.size() < window.capacity ? Quality::Smoothing : Quality::Valid;
  return {std::move(window), mean, quality};
}

struct ProcessResult {
  SmoothingWindow window;
  ParameterReading reading;
};

/// calibrate -> validate -> smooth. Invalid samples leave the window untouched
/// and carry the raw calibrated value.
inline ProcessResult process(const RawSample& sample, const CalibrationCurve& curve,
                             SmoothingWindow window, Timestamp timestamp) {
  const double value = calibrate(sample, curve);
  if (validate(sample.channel, value) == Quality::Invalid)
    return {std::move(window), {sample.channel, value, timestamp, Quality::Invalid}};
  auto smoothed = smooth(std::move(window), value);
  return {std::move(smoothed.window),
          {sample.channel, smoothed.mean, timestamp, smoothed.quality}};
}

class CalibrationSet {
 public:
  CalibrationSet() {
    for (auto k : kAllKinds) curves_[index_of(k)] = default_curve(k);
  }

  const CalibrationCurve& curve(ParameterKind k) const { return curves_[index_of(k)]; }
  void set(const CalibrationCurve& c) { curves_[index_of(c.kind)] = c; }

  /// Lines of `kind counts1 value1 counts2 value2`; kinds not listed keep the default curve.
  static CalibrationSet parse(const std::vector<text::Line>& lines) {
    CalibrationSet set;
    for (const auto& line : lines) {
      if (line.tokens.size() != 5)
        throw ConfigError("line " + std::to_string(line.number) +
                          ": expected 'kind counts1 value1 counts2 value2'");
      const auto kind = text::kind(line.tokens[0], line);
      const auto c1 = text::number(line.tokens[1], line);
      const auto c2 = text::number(line.tokens[3], line);
      if (c1 != std::floor(c1) || c2 != std::floor(c2) || c1 < 0 || c2 < 0 || c1 > kMaxCounts ||
          c2 > kMaxCounts)
        throw ConfigError("line " + std::to_string(line.number) + ": counts must be integers in [0, 4095]");
      set.set(fit_curve(kind, {static_cast<int>(c1), text::number(line.tokens[2], line)},
                        {static_cast<int>(c2), text::number(line.tokens[4], line)}));
    }
    return set;
  }

  static CalibrationSet load(const std::optional<std::string>& path) {
    if (!path) return {};
    return parse(text::tokenize_file(*path));
  }

 private:
  std::array<CalibrationCurve, kKindCount> curves_{};
};

/// Per-kind calibration and smoothing state owned by the poll loop.
class SignalPipeline {
 public:
  explicit SignalPipeline(CalibrationSet curves = {}) : curves_(std::move(curves)) { reset(); }

  ParameterReading ingest(const RawSample& sample, Timestamp timestamp) {
    auto& window = windows_[index_of(sample.channel)];
    auto result = process(sample, curves_.curve(sample.channel), std::move(window), timestamp);
    window = std::move(result.window);
    return result.reading;
  }

  /// Drops all smoothing history, as after a reboot.
  void reset() {
    for (auto k : kAllKinds) windows_[index_of(k)] = SmoothingWindow{k, SmoothingWindow::kDefaultCapacity, {}};
  }

  const CalibrationSet& curves() const { return curves_; }
  const SmoothingWindow& window(ParameterKind k) const { return windows_[index_of(k)]; }

 private:
  CalibrationSet curves_;
  std::array<SmoothingWindow, kKindCount> windows_{};
};

}  // namespace aquarium
