#include "vacp/chparams.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vacp/io.hpp"

namespace vacp::chparams {

WindowSpec window_snapshots(const ScenarioConfig& cfg) {
  require(cfg.vehicle_speed > 0, ErrorCode::contract, "vehicle_speed must be > 0");
  WindowSpec w;
  w.span_meters = 40.0 * cfg.wavelength();
  w.span_snapshots =
      std::max(1, static_cast<int>(std::llround(w.span_meters * cfg.snapshot_rate / cfg.vehicle_speed)));
  return w;
}

WindowBounds window_bounds(int center, int n, int span) {
  WindowBounds b;
  b.lo = std::max(0, center - span / 2);
  b.hi = std::min(n, center + span - span / 2);
  return b;
}

double path_loss(std::span<const calib::ImpulseResponse> window) {
  require(!window.empty(), ErrorCode::contract, "path_loss needs a nonempty window");
  double total = 0.0;
  for (const auto& ir : window)
    for (const auto& h : ir.taps) total += std::norm(h);
  const double mean_gain = total / static_cast<double>(window.size());
  if (mean_gain <= 0.0)
    fail(ErrorCode::infinite_path_loss, "window has zero channel gain");
  return -db_from_power(mean_gain);
}

ValidPaths discriminate_paths(const calib::ImpulseResponse& ir, const ExtractionConfig& ex) {
  const size_t n = ir.taps.size();
  require(n > 0, ErrorCode::contract, "empty impulse response");

  std::vector<double> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = std::norm(ir.taps[i]);

  const double peak = *std::max_element(p.begin(), p.end());
  if (peak <= 0.0) fail(ErrorCode::no_valid_path, "all taps are zero");

  // Noise floor: median power of the weakest 25% of taps.
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  const size_t n_weak = std::max<size_t>(1, n / 4);
  const double floor = n_weak % 2 == 1
                           ? sorted[n_weak / 2]
                           : 0.5 * (sorted[n_weak / 2 - 1] + sorted[n_weak / 2]);

  if (floor > 0.0 && peak <= floor * power_from_db(ex.detection_margin_db))
    fail(ErrorCode::no_valid_path, "strongest tap does not clear the detection margin");

  const double threshold =
      std::max(floor * power_from_db(ex.validity_margin_db), peak * power_from_db(-ex.dynamic_range_db));

  ValidPaths vp;
  for (size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? p[i - 1] : -1.0;
    const double right = i + 1 < n ? p[i + 1] : -1.0;
    if (p[i] >= left && p[i] >= right && p[i] > threshold) {
      vp.indices.push_back(static_cast<int>(i));
      vp.powers.push_back(p[i]);
    }
  }
  if (vp.indices.empty()) fail(ErrorCode::no_valid_path, "no tap exceeds the discrimination threshold");
  const auto strongest = std::max_element(vp.powers.begin(), vp.powers.end());
  vp.los_index = vp.indices[static_cast<size_t>(strongest - vp.powers.begin())];
  return vp;
}

double k_factor(const ValidPaths& vp) {
  require(!vp.indices.empty(), ErrorCode::contract, "k_factor needs at least one valid path");
  double p_los = 0.0, p_nlos = 0.0;
  for (size_t i = 0; i < vp.indices.size(); ++i) {
    if (vp.indices[i] == vp.los_index)
      p_los += vp.powers[i];
    else
      p_nlos += vp.powers[i];
  }
  if (p_nlos <= 0.0) return kKFactorCapDb;
  return db_from_power(p_los / p_nlos);
}

Pdp pdp(const calib::ImpulseResponse& ir) {
  Pdp out;
  out.timestamp = ir.timestamp;
  out.tap_spacing = ir.tap_spacing;
  out.power.resize(ir.taps.size());
  for (size_t i = 0; i < ir.taps.size(); ++i) out.power[i] = std::norm(ir.taps[i]);
  return out;
}

Pdp apdp(std::span<const Pdp> window) {
  require(!window.empty(), ErrorCode::contract, "apdp needs a nonempty window");
  Pdp out;
  out.timestamp = window[window.size() / 2].timestamp;
  out.tap_spacing = window[0].tap_spacing;
  out.power.assign(window[0].power.size(), 0.0);
  for (const auto& p : window) {
    require(p.power.size() == out.power.size(), ErrorCode::contract, "PDP lengths differ in window");
    for (size_t i = 0; i < p.power.size(); ++i) out.power[i] += p.power[i];
  }
  for (auto& v : out.power) v /= static_cast<double>(window.size());
  return out;
}

double rms_delay_spread(const Pdp& apdp, const ValidPaths& vp) {
  require(!vp.indices.empty(), ErrorCode::contract, "rms_delay_spread needs valid paths");
  const double tap_ns = apdp.tap_spacing * 1e9;
  double sum_p = 0.0, sum_pt = 0.0, sum_pt2 = 0.0;
  for (const int idx : vp.indices) {
    require(idx >= 0 && idx < static_cast<int>(apdp.power.size()), ErrorCode::contract,
            "valid-path index outside APDP");
    const double P = apdp.power[static_cast<size_t>(idx)];
    const double tau = idx * tap_ns;
    sum_p += P;
    sum_pt += P * tau;
    sum_pt2 += P * tau * tau;
  }
  require(sum_p > 0.0, ErrorCode::contract, "APDP has zero power on valid taps");
  const double mean = sum_pt / sum_p;
  double radicand = sum_pt2 / sum_p - mean * mean;
  if (radicand < 0.0) {
    if (radicand > -1e-12)
      radicand = 0.0;
    else
      fail(ErrorCode::numeric_inconsistency,
           "negative delay-spread radicand " + std::to_string(radicand));
  }
  return std::sqrt(radicand);
}

std::vector<ExtractionRecord> extract_all(std::span<const calib::ImpulseResponse> run,
                                          const ScenarioConfig& cfg) {
  require(!run.empty(), ErrorCode::contract, "extract_all needs a nonempty run");
  const WindowSpec w = window_snapshots(cfg);
  const int n = static_cast<int>(run.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<Pdp> pdps(run.size());
  for (size_t i = 0; i < run.size(); ++i) pdps[i] = pdp(run[i]);

  std::vector<ExtractionRecord> out(run.size());
  for (int i = 0; i < n; ++i) {
    auto& rec = out[static_cast<size_t>(i)];
    rec.index = i;
    rec.timestamp = run[static_cast<size_t>(i)].timestamp;
    rec.pl_db = nan;
    rec.k_db = nan;
    rec.rms_ds_ns = nan;
    const WindowBounds b = window_bounds(i, n, w.span_snapshots);
    try {
      rec.pl_db = path_loss(run.subspan(static_cast<size_t>(b.lo), static_cast<size_t>(b.hi - b.lo)));
      const ValidPaths vp = discriminate_paths(run[static_cast<size_t>(i)], cfg.extraction);
      rec.k_db = k_factor(vp);
      const Pdp avg = apdp(std::span<const Pdp>(pdps).subspan(static_cast<size_t>(b.lo),
                                                              static_cast<size_t>(b.hi - b.lo)));
      rec.rms_ds_ns = rms_delay_spread(avg, vp);
      rec.valid = true;
    } catch (const Error&) {
      rec.valid = false;
    }
  }
  return out;
}

void write_characteristics_csv(const std::string& path, std::span<const ExtractionRecord> records) {
  std::string out = "index,timestamp,pl_db,k_db,rms_ds_ns,valid_flag\n";
  for (const auto& r : records) {
    out += std::to_string(r.index);
    out += ',';
    out += io::format_double(r.timestamp);
    out += ',';
    out += io::format_double(r.pl_db);
    out += ',';
    out += io::format_double(r.k_db);
    out += ',';
    out += io::format_double(r.rms_ds_ns);
    out += ',';
    out += r.valid ? '1' : '0';
    out += '\n';
  }
  io::write_file(path, out);
}

std::vector<ExtractionRecord> read_characteristics_csv(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "index,timestamp,pl_db,k_db,rms_ds_ns,valid_flag")
    fail(ErrorCode::parse, path + ": bad characteristics header");
  std::vector<ExtractionRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    ExtractionRecord r;
    int flag = 0;
    try {
      std::getline(ls, field, ',');
      r.index = std::stoi(field);
      std::getline(ls, field, ',');
      r.timestamp = std::stod(field);
      std::getline(ls, field, ',');
      r.pl_db = std::stod(field);
      std::getline(ls, field, ',');
      r.k_db = std::stod(field);
      std::getline(ls, field, ',');
      r.rms_ds_ns = std::stod(field);
      std::getline(ls, field, ',');
      flag = std::stoi(field);
    } catch (const std::exception&) {
      fail(ErrorCode::parse, path + ": bad record at line " + std::to_string(lineno));
    }
    r.valid = flag != 0;
    out.push_back(r);
  }
  return out;
}

}  // namespace vacp::chparams
