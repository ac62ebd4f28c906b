#pragma once

#include "vacp/common.hpp"
#include "vacp/sim.hpp"

namespace vacp::calib {

/// Back-to-back reference: received reference spectrum and the known
/// attenuator response.
struct ReferenceCapture {
  cvec y_ref;
  cvec h_ref;
};

struct ImpulseResponse {
  double timestamp = 0.0;
  cvec taps;              // length N_f
  double tap_spacing = 0.0;  // seconds, = 1/B
};

/// H[k] = y[k] / y_ref[k] * h_ref[k]. Any reference bin with magnitude below
/// 1e-30 raises a division-degenerate error naming the bin.
sim::FrequencySnapshot calibrate(const sim::FrequencySnapshot& y, const ReferenceCapture& ref);

/// Inverse DFT with 1/N normalization on the inverse:
///   taps[m] = (1/N) sum_k H[k] e^{+j 2 pi k m / N}.
/// Parseval under this convention: sum |taps|^2 = (1/N) sum |H|^2.
ImpulseResponse to_impulse_response(const sim::FrequencySnapshot& cfr, double bandwidth);

/// Unnormalized forward DFT, exact inverse of to_impulse_response.
cvec forward_cfr(const cvec& taps);

/// ReferenceCapture file: snapshot-record layout, two records (y_ref, h_ref).
void write_reference_file(const std::string& path, const ReferenceCapture& ref, uint64_t config_hash);
ReferenceCapture read_reference_file(const std::string& path);

}  // namespace vacp::calib
