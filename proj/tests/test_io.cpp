#include <doctest.h>

#include "test_helpers.hpp"
#include "vacp/io.hpp"
#include "vacp/rng.hpp"
#include "vacp/scenario.hpp"

using namespace vacp;

TEST_CASE("format_double survives parse round trips") {
  for (const double v : {0.1, -0.0, 1e-300, 6.02059991327962, 73.0, 1.0 / 3.0, 5.9e9}) {
    const std::string s = io::format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("fnv1a64 is stable") {
  CHECK(io::fnv1a64("") == 0xCBF29CE484222325ull);
  CHECK(io::fnv1a64("a") == 0xAF63DC4C8601EC8Cull);
  CHECK(io::hash_hex(0xAF63DC4C8601EC8Cull) == "af63dc4c8601ec8c");
}

TEST_CASE("snapshot record file round-trips and validates") {
  testing::TempDir tmp("snapio");
  std::vector<io::SnapshotRecord> records(5);
  Rng rng(12);
  for (size_t i = 0; i < records.size(); ++i) {
    records[i].index = i;
    records[i].timestamp = static_cast<double>(i) / 73.0;
    records[i].values.resize(16);
    for (auto& v : records[i].values) v = {rng.normal(), rng.normal()};
  }
  io::write_snapshot_file(tmp.path("s.bin"), records, 16, 0x1234);
  const auto loaded = io::read_snapshot_file(tmp.path("s.bin"));
  CHECK(loaded.num_freq_points == 16);
  CHECK(loaded.config_hash == 0x1234);
  REQUIRE(loaded.records.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded.records[i].index == records[i].index);
    CHECK(loaded.records[i].timestamp == records[i].timestamp);
    CHECK(loaded.records[i].values == records[i].values);
  }

  // Non-monotone timestamps are rejected.
  auto bad = records;
  bad[3].timestamp = bad[2].timestamp;
  io::write_snapshot_file(tmp.path("bad.bin"), bad, 16, 0);
  CHECK_THROWS_AS(io::read_snapshot_file(tmp.path("bad.bin")), Error);

  // Truncated payload is rejected.
  const std::string full = io::read_file(tmp.path("s.bin"));
  io::write_file(tmp.path("cut.bin"), std::string_view(full).substr(0, full.size() - 7));
  io::write_file(tmp.path("cut.bin.manifest"), io::read_file(tmp.path("s.bin.manifest")));
  CHECK_THROWS_AS(io::read_snapshot_file(tmp.path("cut.bin")), Error);
}

TEST_CASE("scenario config: serialize/parse round trip and validation") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.scatterers = {{{20.0, 30.0, 4.0}, 0.5}, {{-25.0, 18.0, 4.0}, 0.8}};
  cfg.camera_look_at = Vec3{1.0, 2.0, 3.0};
  cfg.noise_floor_dbm = -120.0;
  cfg.delay_snap = DelaySnap::off_grid;
  cfg.extraction.validity_margin_db = 7.5;
  cfg.vehicle.label = "van";

  const std::string text = serialize_scenario(cfg);
  const ScenarioConfig back = parse_scenario(text);
  CHECK(serialize_scenario(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));

  ScenarioConfig other = cfg;
  other.vehicle_speed += 0.01;
  CHECK(config_hash(other) != config_hash(cfg));

  CHECK_THROWS_AS(parse_scenario("[scenario]\nbogus_key = 1\nroute = 0,0; 1,0\n"), Error);
  CHECK_THROWS_AS(parse_scenario("[scenario]\ncenter_frequency = abc\n"), Error);
  CHECK_THROWS_AS(parse_scenario("[scenario]\nvehicle_speed = -3\n"), Error);

  // Frequencies: N_f bins from f_c - B/2, spaced B/N_f.
  const auto freqs = cfg.frequencies();
  REQUIRE(static_cast<int>(freqs.size()) == cfg.num_freq_points);
  CHECK(freqs.front() == doctest::Approx(cfg.center_frequency - cfg.bandwidth / 2));
  CHECK(freqs[1] - freqs[0] == doctest::Approx(cfg.bandwidth / cfg.num_freq_points));
}

TEST_CASE("text manifests keep insertion order and repeated keys") {
  testing::TempDir tmp("manifest_io");
  io::TextManifest m;
  m.add("stage", "calibrate");
  m.add("input", "a.bin=0011");
  m.add("input", "b.bin=2233");
  io::write_text_manifest(tmp.path("m.txt"), m);
  const auto loaded = io::read_text_manifest(tmp.path("m.txt"));
  REQUIRE(loaded.find("stage") != nullptr);
  CHECK(*loaded.find("stage") == "calibrate");
  CHECK(loaded.find_all("input").size() == 2);
}
