#include "vacp/calib.hpp"

#include <cmath>

#include "vacp/io.hpp"

namespace vacp::calib {

sim::FrequencySnapshot calibrate(const sim::FrequencySnapshot& y, const ReferenceCapture& ref) {
  const size_t n = y.values.size();
  require(ref.y_ref.size() == n && ref.h_ref.size() == n, ErrorCode::contract,
          "reference length must match snapshot length");
  sim::FrequencySnapshot out;
  out.timestamp = y.timestamp;
  out.values.resize(n);
  for (size_t k = 0; k < n; ++k) {
    if (std::abs(ref.y_ref[k]) < 1e-30)
      fail(ErrorCode::division_degenerate,
           "reference spectrum is degenerate at bin " + std::to_string(k));
    out.values[k] = y.values[k] / ref.y_ref[k] * ref.h_ref[k];
  }
  return out;
}

ImpulseResponse to_impulse_response(const sim::FrequencySnapshot& cfr, double bandwidth) {
  require(bandwidth > 0, ErrorCode::contract, "bandwidth must be > 0");
  const size_t n = cfr.values.size();
  require(n >= 1, ErrorCode::contract, "empty spectrum");
  ImpulseResponse out;
  out.timestamp = cfr.timestamp;
  out.tap_spacing = 1.0 / bandwidth;
  out.taps.assign(n, {0.0, 0.0});
  const double w = 2.0 * kPi / static_cast<double>(n);
  for (size_t m = 0; m < n; ++m) {
    std::complex<double> acc{0.0, 0.0};
    for (size_t k = 0; k < n; ++k)
      acc += cfr.values[k] * std::polar(1.0, w * static_cast<double>(k * m % n));
    out.taps[m] = acc / static_cast<double>(n);
  }
  return out;
}

cvec forward_cfr(const cvec& taps) {
  const size_t n = taps.size();
  cvec out(n, {0.0, 0.0});
  const double w = 2.0 * kPi / static_cast<double>(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (size_t m = 0; m < n; ++m)
      acc += taps[m] * std::polar(1.0, -w * static_cast<double>(k * m % n));
    out[k] = acc;
  }
  return out;
}

void write_reference_file(const std::string& path, const ReferenceCapture& ref, uint64_t config_hash) {
  require(ref.y_ref.size() == ref.h_ref.size(), ErrorCode::contract, "reference vectors differ in length");
  std::vector<io::SnapshotRecord> records(2);
  records[0] = {0, 0.0, ref.y_ref};
  records[1] = {1, 1.0, ref.h_ref};
  io::write_snapshot_file(path, records, static_cast<int>(ref.y_ref.size()), config_hash);
}

ReferenceCapture read_reference_file(const std::string& path) {
  const io::SnapshotFile f = io::read_snapshot_file(path);
  require(f.records.size() == 2, ErrorCode::parse, path + ": reference file needs exactly 2 records");
  return {f.records[0].values, f.records[1].values};
}

}  // namespace vacp::calib
