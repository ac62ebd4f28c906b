#include "vacp/common.hpp"

namespace vacp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::contract: return "contract-error";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::degenerate_geometry: return "degenerate-geometry";
    case ErrorCode::invalid_equipment_response: return "invalid-equipment-response";
    case ErrorCode::division_degenerate: return "division-degenerate";
    case ErrorCode::infinite_path_loss: return "infinite-path-loss";
    case ErrorCode::no_valid_path: return "no-valid-path";
    case ErrorCode::numeric_inconsistency: return "numeric-inconsistency";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::parse: return "parse-error";
    case ErrorCode::io: return "io-error";
  }
  return "unknown-error";
}

}  // namespace vacp
