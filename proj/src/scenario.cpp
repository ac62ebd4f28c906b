#include "vacp/scenario.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "vacp/io.hpp"

namespace vacp {

std::vector<double> ScenarioConfig::frequencies() const {
  std::vector<double> f(static_cast<size_t>(num_freq_points));
  const double f0 = center_frequency - bandwidth / 2.0;
  const double df = freq_spacing();
  for (int k = 0; k < num_freq_points; ++k) f[static_cast<size_t>(k)] = f0 + k * df;
  return f;
}

void ScenarioConfig::validate() const {
  require(center_frequency > 0, ErrorCode::contract, "center_frequency must be > 0");
  require(bandwidth > 0, ErrorCode::contract, "bandwidth must be > 0");
  require(num_freq_points >= 2, ErrorCode::contract, "num_freq_points must be >= 2");
  require(snapshot_rate > 0, ErrorCode::contract, "snapshot_rate must be > 0");
  require(frame_rate >= snapshot_rate, ErrorCode::contract, "frame_rate must be >= snapshot_rate");
  require(camera_fov_deg > 0 && camera_fov_deg < 180, ErrorCode::contract,
          "camera_fov_deg must be in (0, 180)");
  require(vehicle_speed > 0, ErrorCode::contract, "vehicle_speed must be > 0");
  require(route.size() >= 2, ErrorCode::contract, "route needs at least 2 waypoints");
  require(camera_width > 0 && camera_height > 0, ErrorCode::contract, "camera resolution must be positive");
  require(mask_downsample > 0 && camera_width % mask_downsample == 0 &&
              camera_height % mask_downsample == 0,
          ErrorCode::contract, "mask_downsample must divide the camera resolution");
  for (const auto& s : scatterers)
    require(s.reflection_gain > 0 && s.reflection_gain <= 1.0, ErrorCode::contract,
            "scatterer reflection_gain must be in (0, 1]");
  require(vehicle.length > 0 && vehicle.width > 0 && vehicle.height > 0, ErrorCode::contract,
          "vehicle dimensions must be positive");
}

namespace {

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<IniEntry> parse_ini(std::string_view text) {
  std::vector<IniEntry> entries;
  std::string section;
  int lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    const size_t hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::parse, "line " + std::to_string(lineno) + ": unterminated section");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::parse, "line " + std::to_string(lineno) + ": expected key = value");
    entries.push_back({section, trim(std::string_view(line).substr(0, eq)),
                       trim(std::string_view(line).substr(eq + 1)), lineno});
  }
  return entries;
}

double to_double(const IniEntry& e) {
  try {
    size_t idx = 0;
    const double v = std::stod(e.value, &idx);
    if (idx != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": bad number '" + e.value + "'");
  }
}

std::vector<double> split_numbers(const IniEntry& e, std::string_view value) {
  std::vector<double> out;
  std::string item;
  std::istringstream ss{std::string(value)};
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": empty number");
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": bad number '" + item + "'");
    }
  }
  return out;
}

Vec3 to_vec3(const IniEntry& e) {
  const auto v = split_numbers(e, e.value);
  if (v.size() != 3) fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": expected x, y, z");
  return {v[0], v[1], v[2]};
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig cfg;
  cfg.route.clear();
  bool route_seen = false;
  for (const auto& e : parse_ini(text)) {
    const std::string& s = e.section;
    const std::string& k = e.key;
    if (s.empty() || s == "scenario") {
      if (k == "name") cfg.name = e.value;
      else if (k == "center_frequency") cfg.center_frequency = to_double(e);
      else if (k == "bandwidth") cfg.bandwidth = to_double(e);
      else if (k == "num_freq_points") cfg.num_freq_points = static_cast<int>(to_double(e));
      else if (k == "snapshot_rate") cfg.snapshot_rate = to_double(e);
      else if (k == "frame_rate") cfg.frame_rate = to_double(e);
      else if (k == "tx_position") cfg.tx_position = to_vec3(e);
      else if (k == "camera_position") cfg.camera_position = to_vec3(e);
      else if (k == "camera_look_at") cfg.camera_look_at = to_vec3(e);
      else if (k == "camera_fov_deg") cfg.camera_fov_deg = to_double(e);
      else if (k == "camera_resolution") {
        const auto v = split_numbers(e, e.value);
        if (v.size() != 2) fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": expected W, H");
        cfg.camera_width = static_cast<int>(v[0]);
        cfg.camera_height = static_cast<int>(v[1]);
      } else if (k == "mask_downsample") cfg.mask_downsample = static_cast<int>(to_double(e));
      else if (k == "rx_antenna_height") cfg.rx_antenna_height = to_double(e);
      else if (k == "vehicle_speed") cfg.vehicle_speed = to_double(e);
      else if (k == "noise_floor_dbm") cfg.noise_floor_dbm = to_double(e);
      else if (k == "rng_seed") cfg.rng_seed = std::stoull(e.value);
      else if (k == "delay_snap") {
        if (e.value == "on_grid") cfg.delay_snap = DelaySnap::on_grid;
        else if (e.value == "off_grid") cfg.delay_snap = DelaySnap::off_grid;
        else fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": delay_snap must be on_grid or off_grid");
      } else if (k == "route") {
        // semicolon-separated "x,y" waypoints
        route_seen = true;
        std::istringstream ss(e.value);
        std::string part;
        while (std::getline(ss, part, ';')) {
          const auto v = split_numbers(e, part);
          if (v.size() != 2) fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": waypoint needs x, y");
          cfg.route.push_back({v[0], v[1]});
        }
      } else if (k == "scatterer") {
        const auto v = split_numbers(e, e.value);
        if (v.size() != 4)
          fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": scatterer needs x, y, z, gain");
        cfg.scatterers.push_back({{v[0], v[1], v[2]}, v[3]});
      } else {
        fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": unknown key '" + k + "'");
      }
    } else if (s == "extraction") {
      if (k == "validity_margin_db") cfg.extraction.validity_margin_db = to_double(e);
      else if (k == "detection_margin_db") cfg.extraction.detection_margin_db = to_double(e);
      else if (k == "dynamic_range_db") cfg.extraction.dynamic_range_db = to_double(e);
      else fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": unknown key '" + k + "'");
    } else if (s == "vehicle") {
      if (k == "length") cfg.vehicle.length = to_double(e);
      else if (k == "width") cfg.vehicle.width = to_double(e);
      else if (k == "height") cfg.vehicle.height = to_double(e);
      else if (k == "label") cfg.vehicle.label = e.value;
      else fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": unknown key '" + k + "'");
    } else {
      fail(ErrorCode::parse, "line " + std::to_string(e.line) + ": unknown section '" + s + "'");
    }
  }
  if (!route_seen) cfg.route = {{-50.0, 10.0}, {50.0, 10.0}};
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) { return parse_scenario(io::read_file(path)); }

namespace {
std::string fmt(double v) { return io::format_double(v); }
std::string fmt(const Vec3& v) { return fmt(v.x) + ", " + fmt(v.y) + ", " + fmt(v.z); }
}  // namespace

std::string serialize_scenario(const ScenarioConfig& cfg) {
  std::string out = "[scenario]\n";
  out += "name = " + cfg.name + "\n";
  out += "center_frequency = " + fmt(cfg.center_frequency) + "\n";
  out += "bandwidth = " + fmt(cfg.bandwidth) + "\n";
  out += "num_freq_points = " + std::to_string(cfg.num_freq_points) + "\n";
  out += "snapshot_rate = " + fmt(cfg.snapshot_rate) + "\n";
  out += "frame_rate = " + fmt(cfg.frame_rate) + "\n";
  out += "tx_position = " + fmt(cfg.tx_position) + "\n";
  out += "camera_position = " + fmt(cfg.camera_position) + "\n";
  if (cfg.camera_look_at) out += "camera_look_at = " + fmt(*cfg.camera_look_at) + "\n";
  out += "camera_fov_deg = " + fmt(cfg.camera_fov_deg) + "\n";
  out += "camera_resolution = " + std::to_string(cfg.camera_width) + ", " + std::to_string(cfg.camera_height) + "\n";
  out += "mask_downsample = " + std::to_string(cfg.mask_downsample) + "\n";
  out += "rx_antenna_height = " + fmt(cfg.rx_antenna_height) + "\n";
  out += "vehicle_speed = " + fmt(cfg.vehicle_speed) + "\n";
  out += "noise_floor_dbm = " + fmt(cfg.noise_floor_dbm) + "\n";
  out += "rng_seed = " + std::to_string(cfg.rng_seed) + "\n";
  out += std::string("delay_snap = ") + (cfg.delay_snap == DelaySnap::on_grid ? "on_grid" : "off_grid") + "\n";
  std::string route = "route = ";
  for (size_t i = 0; i < cfg.route.size(); ++i) {
    if (i) route += "; ";
    route += fmt(cfg.route[i].x) + ", " + fmt(cfg.route[i].y);
  }
  out += route + "\n";
  for (const auto& s : cfg.scatterers)
    out += "scatterer = " + fmt(s.position) + ", " + fmt(s.reflection_gain) + "\n";
  out += "\n[extraction]\n";
  out += "validity_margin_db = " + fmt(cfg.extraction.validity_margin_db) + "\n";
  out += "detection_margin_db = " + fmt(cfg.extraction.detection_margin_db) + "\n";
  out += "dynamic_range_db = " + fmt(cfg.extraction.dynamic_range_db) + "\n";
  out += "\n[vehicle]\n";
  out += "length = " + fmt(cfg.vehicle.length) + "\n";
  out += "width = " + fmt(cfg.vehicle.width) + "\n";
  out += "height = " + fmt(cfg.vehicle.height) + "\n";
  out += "label = " + cfg.vehicle.label + "\n";
  return out;
}

uint64_t config_hash(const ScenarioConfig& cfg) { return io::fnv1a64(serialize_scenario(cfg)); }

}  // namespace vacp
