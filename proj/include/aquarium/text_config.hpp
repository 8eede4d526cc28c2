#pragma once

// Minimal line-oriented reader shared by the scenario, calibration and control
// config formats: `#` starts a comment, blank lines are ignored, tokens are
// separated by whitespace.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aquarium/domain.hpp"

namespace aquarium::text {

struct Line {
  std::size_t number = 0;
  std::vector<std::string> tokens;
};

inline std::vector<Line> tokenize(std::istream& in) {
  std::vector<Line> lines;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream words(raw);
    Line line{number, {}};
    for (std::string w; words >> w;) line.tokens.push_back(w);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<Line> tokenize_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return tokenize(in);
}

inline std::vector<Line> tokenize_string(const std::string& text) {
  std::istringstream in(text);
  return tokenize(in);
}

inline double number(std::string_view token, const Line& line) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value))
    throw ConfigError("line " + std::to_string(line.number) + ": expected a number, got '" +
                      std::string(token) + "'");
  return value;
}

inline double duration(std::string_view token, const Line& line) {
  try {
    return parse_duration_seconds(token);
  } catch (const std::invalid_argument&) {
    throw ConfigError("line " + std::to_string(line.number) + ": expected a duration, got '" +
                      std::string(token) + "'");
  }
}

inline ParameterKind kind(std::string_view token, const Line& line) {
  if (auto k = parse_kind(token)) return *k;
  throw ConfigError("line " + std::to_string(line.number) + ": unknown parameter '" +
                    std::string(token) + "'");
}

}  // namespace aquarium::text
