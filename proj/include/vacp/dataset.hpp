#pragma once

#include <span>
#include <string>
#include <vector>

#include "vacp/chparams.hpp"
#include "vacp/common.hpp"
#include "vacp/vision.hpp"

namespace vacp::dataset {

/// One aligned (mask, labels) training record.
struct PairedSample {
  int snapshot_index = 0;
  double timestamp = 0.0;  // snapshot timestamp
  int frame_index = 0;     // index into the filtered frame stream
  vision::MaskFrame mask;
  chparams::ExtractionRecord labels;
};

/// Snapshot-driven nearest-neighbor matching: each valid snapshot takes the
/// nearest visible frame within tol seconds; snapshots without one are
/// discarded. Ties break toward the earlier frame. Inputs must be sorted by
/// timestamp.
std::vector<PairedSample> align(std::span<const chparams::ExtractionRecord> snapshots,
                                std::span<const vision::MaskFrame> frames, double tol_s);

/// Default tolerance: half the snapshot interval.
inline double default_alignment_tol(double snapshot_rate) { return 0.5 / snapshot_rate; }

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  bool test_contiguous = true;
  uint64_t rng_seed = 0;
};

struct Splits {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;  // contiguous ascending block when test_contiguous
};

/// Test block: round(test_frac * M) contiguous samples at a seeded uniform
/// start; the rest is shuffled and split round(val_frac * remaining) /
/// remainder. Exact partition. Needs at least 10 samples.
Splits make_splits(int num_samples, const SplitSpec& spec);

struct ManifestRecord {
  int id = 0;  // snapshot index
  std::string split;
  uint64_t mask_offset = 0;  // byte offset into the mask file
  double pl_db = 0.0;
  double k_db = 0.0;
  double rms_ds_ns = 0.0;
};

struct DatasetManifest {
  uint64_t config_hash = 0;
  std::string mask_file;
  std::vector<ManifestRecord> records;
};

DatasetManifest build_manifest(std::span<const PairedSample> samples, const Splits& splits,
                               uint64_t config_hash, const std::string& mask_file, int grid_w,
                               int grid_h);

/// Tab-separated, one record per line: id, split, mask_offset, pl_db, k_db,
/// rms_ds_ns. Header line carries the config hash; values round-trip
/// bit-exactly.
void export_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

}  // namespace vacp::dataset
