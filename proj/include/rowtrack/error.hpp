#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rowtrack {

enum class Errc {
  NonPowerOfTwo,
  CounterTooNarrow,
  UntaggedModeInfeasible,
  WaysInsufficient,
  TagTooNarrow,
  InvalidValue,
  RowOutOfRange,
  AddressOutOfRange,
  InfeasibleRate,
  EmptyPool,
  MalformedTrace,
  NonMonotonicTime,
  AlreadyReserved,
  AlreadyMax,
  AtCap,
  UnorderedInput,
  CascadeLimit,
  ConfigParse,
  Io,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonPowerOfTwo: return "NonPowerOfTwo";
    case Errc::CounterTooNarrow: return "CounterTooNarrow";
    case Errc::UntaggedModeInfeasible: return "UntaggedModeInfeasible";
    case Errc::WaysInsufficient: return "WaysInsufficient";
    case Errc::TagTooNarrow: return "TagTooNarrow";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::RowOutOfRange: return "RowOutOfRange";
    case Errc::AddressOutOfRange: return "AddressOutOfRange";
    case Errc::InfeasibleRate: return "InfeasibleRate";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::MalformedTrace: return "MalformedTrace";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::AlreadyReserved: return "AlreadyReserved";
    case Errc::AlreadyMax: return "AlreadyMax";
    case Errc::AtCap: return "AtCap";
    case Errc::UnorderedInput: return "UnorderedInput";
    case Errc::CascadeLimit: return "CascadeLimit";
    case Errc::ConfigParse: return "ConfigParse";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Base exception for everything the library reports. Carries a stable code
/// so callers (and tests) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct Violation {
  Errc code;
  std::string message;
};

/// Thrown by validate() with every violated constraint, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Violation> violations)
      : Error(violations.empty() ? Errc::InvalidValue : violations.front().code,
              summarize(violations)),
        violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

  bool has(Errc code) const noexcept {
    for (const auto& v : violations_) {
      if (v.code == code) return true;
    }
    return false;
  }

 private:
  static std::string summarize(const std::vector<Violation>& violations) {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += std::string(to_string(v.code)) + " (" + v.message + ")";
    }
    return out;
  }

  std::vector<Violation> violations_;
};

}  // namespace rowtrack
