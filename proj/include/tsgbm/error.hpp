#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsgbm {

/// Machine-readable failure category. The CLI prints it as the reason prefix.
enum class Errc {
  invalid_argument,
  malformed_row,
  non_monotonic,
  invariant,
  insufficient_data,
  misaligned,
  name_collision,
  missing_column,
  domain,
  zero_variance,
  singular,
  nonstationary,
  incompatible_config,
  version_mismatch,
  io,
  search_failed,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::malformed_row: return "malformed_row";
    case Errc::non_monotonic: return "non_monotonic";
    case Errc::invariant: return "invariant";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::misaligned: return "misaligned";
    case Errc::name_collision: return "name_collision";
    case Errc::missing_column: return "missing_column";
    case Errc::domain: return "domain";
    case Errc::zero_variance: return "zero_variance";
    case Errc::singular: return "singular";
    case Errc::nonstationary: return "nonstationary";
    case Errc::incompatible_config: return "incompatible_config";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::io: return "io";
    case Errc::search_failed: return "search_failed";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tsgbm
