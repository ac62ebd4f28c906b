#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vacp/common.hpp"

namespace vacp::io {

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64). Used for provenance chains, not security.

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xCBF29CE484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xCBF29CE484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string hash_hex(uint64_t h);
uint64_t file_hash(const std::string& path);

// ---------------------------------------------------------------------------
// Little-endian byte buffers.

struct ByteWriter {
  std::string buf;

  void u8(uint8_t v) { buf.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(const void* data, size_t len) { buf.append(static_cast<const char*>(data), len); }
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string context) : data_(data), context_(std::move(context)) {}

  size_t remaining() const { return data_.size() - pos_; }
  size_t position() const { return pos_; }

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void bytes(void* out, size_t len) {
    need(len);
    std::memcpy(out, data_.data() + pos_, len);
    pos_ += len;
  }

 private:
  void need(size_t n) {
    if (remaining() < n) fail(ErrorCode::parse, context_ + ": truncated at byte " + std::to_string(pos_));
  }

  std::string_view data_;
  size_t pos_ = 0;
  std::string context_;
};

// ---------------------------------------------------------------------------
// Little-endian binary record files.

/// One sounding record: index, timestamp, N_f complex bins.
struct SnapshotRecord {
  uint64_t index = 0;
  double timestamp = 0.0;
  cvec values;
};

/// Writes records plus a text sidecar `<path>.manifest` carrying the config
/// hash and N_f.
void write_snapshot_file(const std::string& path, const std::vector<SnapshotRecord>& records,
                         int num_freq_points, uint64_t config_hash);

struct SnapshotFile {
  std::vector<SnapshotRecord> records;
  int num_freq_points = 0;
  uint64_t config_hash = 0;  // from sidecar; 0 when sidecar missing
};

SnapshotFile read_snapshot_file(const std::string& path);

// ---------------------------------------------------------------------------
// Key/value text manifests (stage provenance sidecars).

struct TextManifest {
  // Insertion-ordered key/value pairs; repeated keys allowed (inputs).
  std::vector<std::pair<std::string, std::string>> entries;

  void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
  const std::string* find(std::string_view key) const;
  std::vector<std::string> find_all(std::string_view key) const;
};

void write_text_manifest(const std::string& path, const TextManifest& m);
TextManifest read_text_manifest(const std::string& path);

/// Formats a double so that parsing it back recovers the exact bits.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace vacp::io
