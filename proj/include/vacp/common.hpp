#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vacp {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

/// Complex spectrum / tap vector.
using cvec = std::vector<std::complex<double>>;

enum class ErrorCode {
  contract,
  out_of_range,
  degenerate_geometry,
  invalid_equipment_response,
  division_degenerate,
  infinite_path_loss,
  no_valid_path,
  numeric_inconsistency,
  divergence,
  parse,
  io,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

inline double db_from_power(double p) { return 10.0 * std::log10(p); }
inline double power_from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace vacp
