#include "vacp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vacp/io.hpp"
#include "vacp/rng.hpp"

namespace vacp::dataset {

std::vector<PairedSample> align(std::span<const chparams::ExtractionRecord> snapshots,
                                std::span<const vision::MaskFrame> frames, double tol_s) {
  require(tol_s >= 0.0, ErrorCode::contract, "alignment tolerance must be >= 0");
  for (size_t i = 1; i < snapshots.size(); ++i)
    require(snapshots[i].timestamp > snapshots[i - 1].timestamp, ErrorCode::contract,
            "snapshot stream is not timestamp-sorted");
  for (size_t i = 1; i < frames.size(); ++i)
    require(frames[i].timestamp > frames[i - 1].timestamp, ErrorCode::contract,
            "frame stream is not timestamp-sorted");

  std::vector<PairedSample> out;
  size_t j = 0;
  for (const auto& snap : snapshots) {
    if (!snap.valid) continue;
    while (j + 1 < frames.size() && frames[j + 1].timestamp <= snap.timestamp) ++j;
    // Candidates: frames[j] (last one at or before t) and frames[j+1]; ties
    // break to the earlier frame because j is evaluated first.
    size_t best = frames.size();
    double best_dt = std::numeric_limits<double>::infinity();
    for (size_t c : {j, j + 1}) {
      if (c >= frames.size()) continue;
      const double dt = std::abs(frames[c].timestamp - snap.timestamp);
      if (dt < best_dt) {
        best = c;
        best_dt = dt;
      }
    }
    if (best == frames.size() || best_dt > tol_s) continue;
    PairedSample s;
    s.snapshot_index = snap.index;
    s.timestamp = snap.timestamp;
    s.frame_index = static_cast<int>(best);
    s.mask = frames[best];
    s.labels = snap;
    out.push_back(std::move(s));
  }
  return out;
}

Splits make_splits(int num_samples, const SplitSpec& spec) {
  require(num_samples >= 10, ErrorCode::contract, "need at least 10 samples to split");
  require(spec.train_frac > 0 && spec.val_frac > 0 && spec.test_frac > 0, ErrorCode::contract,
          "split fractions must be positive");
  require(std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) < 1e-9,
          ErrorCode::contract, "split fractions must sum to 1");

  Rng rng(stream_seed(spec.rng_seed, 0x5B117ull));
  const int n_test = std::max(1, static_cast<int>(std::llround(spec.test_frac * num_samples)));
  require(n_test < num_samples, ErrorCode::contract, "test fraction leaves no training data");

  Splits out;
  std::vector<int> rest;
  if (spec.test_contiguous) {
    const int start = static_cast<int>(rng.below(static_cast<uint64_t>(num_samples - n_test + 1)));
    for (int i = start; i < start + n_test; ++i) out.test.push_back(i);
    for (int i = 0; i < num_samples; ++i)
      if (i < start || i >= start + n_test) rest.push_back(i);
  } else {
    std::vector<int> all(static_cast<size_t>(num_samples));
    for (int i = 0; i < num_samples; ++i) all[static_cast<size_t>(i)] = i;
    rng.shuffle(all);
    out.test.assign(all.begin(), all.begin() + n_test);
    std::sort(out.test.begin(), out.test.end());
    rest.assign(all.begin() + n_test, all.end());
    std::sort(rest.begin(), rest.end());
  }

  rng.shuffle(rest);
  const int n_val =
      std::max(1, static_cast<int>(std::llround(spec.val_frac * static_cast<double>(rest.size()))));
  require(n_val < static_cast<int>(rest.size()), ErrorCode::contract,
          "validation fraction leaves no training data");
  out.val.assign(rest.begin(), rest.begin() + n_val);
  out.train.assign(rest.begin() + n_val, rest.end());
  return out;
}

DatasetManifest build_manifest(std::span<const PairedSample> samples, const Splits& splits,
                               uint64_t config_hash, const std::string& mask_file, int grid_w,
                               int grid_h) {
  DatasetManifest m;
  m.config_hash = config_hash;
  m.mask_file = mask_file;
  m.records.resize(samples.size());
  std::vector<std::string> tags(samples.size());
  for (const int i : splits.train) tags[static_cast<size_t>(i)] = "train";
  for (const int i : splits.val) tags[static_cast<size_t>(i)] = "val";
  for (const int i : splits.test) tags[static_cast<size_t>(i)] = "test";
  for (size_t i = 0; i < samples.size(); ++i) {
    require(!tags[i].empty(), ErrorCode::contract, "splits do not cover sample " + std::to_string(i));
    auto& r = m.records[i];
    r.id = samples[i].snapshot_index;
    r.split = tags[i];
    r.mask_offset =
        vision::mask_frame_offset(grid_w, grid_h, static_cast<size_t>(samples[i].frame_index));
    r.pl_db = samples[i].labels.pl_db;
    r.k_db = samples[i].labels.k_db;
    r.rms_ds_ns = samples[i].labels.rms_ds_ns;
  }
  return m;
}

void export_manifest(const DatasetManifest& m, const std::string& path) {
  std::string out = "# vacp-dataset\tconfig_hash=" + io::hash_hex(m.config_hash) +
                    "\tmask_file=" + m.mask_file + "\n";
  for (const auto& r : m.records) {
    out += std::to_string(r.id);
    out += '\t';
    out += r.split;
    out += '\t';
    out += std::to_string(r.mask_offset);
    out += '\t';
    out += io::format_double(r.pl_db);
    out += '\t';
    out += io::format_double(r.k_db);
    out += '\t';
    out += io::format_double(r.rms_ds_ns);
    out += '\n';
  }
  io::write_file(path, out);
}

DatasetManifest load_manifest(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("# vacp-dataset", 0) != 0)
    fail(ErrorCode::parse, path + ": not a dataset manifest");
  DatasetManifest m;
  {
    std::istringstream hs(line);
    std::string field;
    while (std::getline(hs, field, '\t')) {
      if (field.rfind("config_hash=", 0) == 0) m.config_hash = std::stoull(field.substr(12), nullptr, 16);
      if (field.rfind("mask_file=", 0) == 0) m.mask_file = field.substr(10);
    }
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestRecord r;
    std::string field;
    try {
      std::getline(ls, field, '\t');
      r.id = std::stoi(field);
      std::getline(ls, r.split, '\t');
      std::getline(ls, field, '\t');
      r.mask_offset = std::stoull(field);
      std::getline(ls, field, '\t');
      r.pl_db = std::stod(field);
      std::getline(ls, field, '\t');
      r.k_db = std::stod(field);
      if (!std::getline(ls, field, '\t')) throw std::invalid_argument("short line");
      r.rms_ds_ns = std::stod(field);
    } catch (const std::exception&) {
      fail(ErrorCode::parse, path + ": bad manifest record at line " + std::to_string(lineno));
    }
    if (r.split != "train" && r.split != "val" && r.split != "test")
      fail(ErrorCode::parse, path + ": unknown split tag at line " + std::to_string(lineno));
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace vacp::dataset
