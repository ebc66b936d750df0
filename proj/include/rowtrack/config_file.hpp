#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "rowtrack/config.hpp"
#include "rowtrack/error.hpp"

namespace rowtrack {

struct SimConfig {
  GeometryConfig geometry;
  TrackerConfig tracker;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view v, std::size_t line) {
  std::string digits;
  for (char c : v) {
    if (c != '_' && c != '\'') digits += c;
  }
  T out{};
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
  if (ec != std::errc{} || p != digits.data() + digits.size() || digits.empty()) {
    throw Error(Errc::ConfigParse, "line " + std::to_string(line) + ": " + std::string(key) + " expects a number, got '" +
                                       std::string(v) + "'");
  }
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v, std::size_t line) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(Errc::ConfigParse, "line " + std::to_string(line) + ": " + std::string(key) + " expects a boolean");
}

inline SacState parse_sac_state(std::string_view v, std::size_t line) {
  const auto n = normalize_name(v);
  if (n == "s1" || n == "1") return SacState::s1;
  if (n == "s2" || n == "2") return SacState::s2;
  if (n == "s3" || n == "3") return SacState::s3;
  throw Error(Errc::ConfigParse, "line " + std::to_string(line) + ": max_state must be s1, s2 or s3");
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are errors.
inline void apply_setting(SimConfig& c, std::string_view key, std::string_view v, std::size_t line = 0) {
  using detail::parse_number;
  auto& g = c.geometry;
  auto& t = c.tracker;
  try {
    if (key == "row_count") g.row_count = parse_number<std::uint64_t>(key, v, line);
    else if (key == "row_size_bytes") g.row_size_bytes = parse_number<std::uint64_t>(key, v, line);
    else if (key == "bank_count") g.bank_count = parse_number<std::uint32_t>(key, v, line);
    else if (key == "line_bytes") g.line_bytes = parse_number<std::uint32_t>(key, v, line);
    else if (key == "llc_sets") g.llc_sets = parse_number<std::uint32_t>(key, v, line);
    else if (key == "llc_ways") g.llc_ways = parse_number<std::uint32_t>(key, v, line);
    else if (key == "trc_ns") g.trc_ns = parse_number<std::uint64_t>(key, v, line);
    else if (key == "window_ns") g.window_ns = parse_number<std::uint64_t>(key, v, line);
    else if (key == "page_policy") g.page_policy = parse_page_policy(v);
    else if (key == "set_hash") g.set_hash = detail::parse_bool(key, v, line);
    else if (key == "refresh_overhead") g.refresh_overhead = parse_number<double>(key, v, line);
    else if (key == "variant") t.variant = parse_variant(v);
    else if (key == "t_rh") t.t_rh = parse_number<std::uint32_t>(key, v, line);
    else if (key == "counter_bits") t.counter_bits = parse_number<std::uint32_t>(key, v, line);
    else if (key == "blast_radius") t.blast_radius = parse_number<std::uint32_t>(key, v, line);
    else if (key == "free_on_mitigate") t.free_on_mitigate = detail::parse_bool(key, v, line);
    else if (key == "mtt_reset") t.mtt_reset = parse_mtt_reset(v);
    else if (key == "max_state") t.max_state_override = detail::parse_sac_state(v, line);
    else throw Error(Errc::ConfigParse, "line " + std::to_string(line) + ": unknown key '" + std::string(key) + "'");
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigParse) throw;
    throw Error(Errc::ConfigParse, "line " + std::to_string(line) + ": " + e.what());
  }
}

/// Flat `key = value` document; `#`/`;` comments and `[section]` headers
/// are accepted and ignored.
inline SimConfig parse_config(std::string_view text) {
  SimConfig c;
  std::size_t pos = 0, line = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view l = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line;
    if (auto hash = l.find_first_of("#;"); hash != std::string_view::npos) l = l.substr(0, hash);
    l = detail::trim(l);
    if (l.empty() || l.front() == '[') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::ConfigParse, "line " + std::to_string(line) + ": expected key = value");
    const auto key = detail::trim(l.substr(0, eq));
    auto value = detail::trim(l.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    apply_setting(c, key, value, line);
  }
  return c;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace rowtrack
