#include "vacp/io.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vacp::io {

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::io, "write failed: " + path);
}

uint64_t file_hash(const std::string& path) {
  const std::string data = read_file(path);
  return fnv1a64(data.data(), data.size());
}

namespace {

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

uint64_t get_u64(const std::string& s, size_t& pos) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

double get_f64(const std::string& s, size_t& pos) {
  const uint64_t bits = get_u64(s, pos);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void write_snapshot_file(const std::string& path, const std::vector<SnapshotRecord>& records,
                         int num_freq_points, uint64_t config_hash) {
  std::string out;
  out.reserve(records.size() * (16 + 16 * static_cast<size_t>(num_freq_points)));
  for (const auto& r : records) {
    require(static_cast<int>(r.values.size()) == num_freq_points, ErrorCode::contract,
            "snapshot record length != N_f");
    put_u64(out, r.index);
    put_f64(out, r.timestamp);
    for (const auto& v : r.values) {
      put_f64(out, v.real());
      put_f64(out, v.imag());
    }
  }
  write_file(path, out);

  TextManifest m;
  m.add("format", "vacp-snapshots-v1");
  m.add("config_hash", hash_hex(config_hash));
  m.add("num_freq_points", std::to_string(num_freq_points));
  m.add("record_count", std::to_string(records.size()));
  write_text_manifest(path + ".manifest", m);
}

SnapshotFile read_snapshot_file(const std::string& path) {
  SnapshotFile out;
  const TextManifest m = read_text_manifest(path + ".manifest");
  const std::string* nf = m.find("num_freq_points");
  if (nf == nullptr) fail(ErrorCode::parse, path + ".manifest missing num_freq_points");
  out.num_freq_points = std::stoi(*nf);
  require(out.num_freq_points >= 1, ErrorCode::parse, "bad num_freq_points in sidecar");
  if (const std::string* h = m.find("config_hash")) out.config_hash = std::stoull(*h, nullptr, 16);

  const std::string data = read_file(path);
  const size_t record_bytes = 16 + 16 * static_cast<size_t>(out.num_freq_points);
  if (data.size() % record_bytes != 0)
    fail(ErrorCode::parse, path + ": size not a multiple of record size");
  const size_t n = data.size() / record_bytes;
  out.records.resize(n);
  size_t pos = 0;
  double prev_ts = -1.0;
  for (size_t i = 0; i < n; ++i) {
    auto& r = out.records[i];
    r.index = get_u64(data, pos);
    r.timestamp = get_f64(data, pos);
    if (i > 0 && !(r.timestamp > prev_ts))
      fail(ErrorCode::parse, path + ": non-monotone timestamp at record " + std::to_string(i));
    prev_ts = r.timestamp;
    r.values.resize(static_cast<size_t>(out.num_freq_points));
    for (auto& v : r.values) {
      const double re = get_f64(data, pos);
      const double im = get_f64(data, pos);
      v = {re, im};
    }
  }
  return out;
}

const std::string* TextManifest::find(std::string_view key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

std::vector<std::string> TextManifest::find_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries)
    if (k == key) out.push_back(v);
  return out;
}

void write_text_manifest(const std::string& path, const TextManifest& m) {
  std::string out;
  for (const auto& [k, v] : m.entries) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  write_file(path, out);
}

TextManifest read_text_manifest(const std::string& path) {
  TextManifest m;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    size_t kb = 0, ke = eq;
    while (kb < ke && std::isspace(static_cast<unsigned char>(line[kb]))) ++kb;
    while (ke > kb && std::isspace(static_cast<unsigned char>(line[ke - 1]))) --ke;
    size_t vb = eq + 1, ve = line.size();
    while (vb < ve && std::isspace(static_cast<unsigned char>(line[vb]))) ++vb;
    while (ve > vb && std::isspace(static_cast<unsigned char>(line[ve - 1]))) --ve;
    m.add(line.substr(kb, ke - kb), line.substr(vb, ve - vb));
  }
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace vacp::io
