#include "vacp/vision.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "vacp/io.hpp"
#include "vacp/rng.hpp"
#include "vacp/sim.hpp"

namespace vacp::vision {

int BitGrid::count() const {
  int n = 0;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) n += get(x, y);
  return n;
}

const char* drop_reason_name(DropReason r) {
  switch (r) {
    case DropReason::none: return "none";
    case DropReason::behind_camera: return "behind-camera";
    case DropReason::outside_image: return "outside-image";
    case DropReason::too_far: return "too-far";
    case DropReason::occluded: return "occluded";
    case DropReason::not_visible: return "not-visible";
  }
  return "unknown";
}

CameraModel CameraModel::from_config(const ScenarioConfig& cfg) {
  CameraModel cam;
  cam.position_ = cfg.camera_position;
  Vec3 target;
  if (cfg.camera_look_at) {
    target = *cfg.camera_look_at;
  } else {
    Vec2 centroid{0.0, 0.0};
    for (const auto& w : cfg.route) centroid = centroid + w;
    centroid = (1.0 / static_cast<double>(cfg.route.size())) * centroid;
    target = {centroid.x, centroid.y, 1.0};
  }
  const Vec3 f = target - cam.position_;
  require(norm(f) > 1e-9, ErrorCode::contract, "camera look-at coincides with camera position");
  cam.forward_ = normalized(f);
  const Vec3 up{0.0, 0.0, 1.0};
  const Vec3 r = cross(cam.forward_, up);
  require(norm(r) > 1e-9, ErrorCode::contract, "camera cannot look straight up or down");
  cam.right_ = normalized(r);
  cam.down_ = cross(cam.forward_, cam.right_);
  cam.width_ = cfg.camera_width;
  cam.height_ = cfg.camera_height;
  cam.focal_px_ = (cfg.camera_width / 2.0) / std::tan(cfg.camera_fov_deg * kPi / 360.0);
  return cam;
}

namespace {
constexpr double kNearPlane = 0.05;  // meters
}

std::optional<Vec2> CameraModel::project(const Vec3& world) const {
  const Vec3 v = world - position_;
  const double zc = dot(v, forward_);
  if (zc < kNearPlane) return std::nullopt;
  const double xc = dot(v, right_);
  const double yc = dot(v, down_);
  return Vec2{width_ / 2.0 + focal_px_ * xc / zc, height_ / 2.0 + focal_px_ * yc / zc};
}

namespace {

// Andrew monotone chain; returns CCW hull (image coordinates, y down).
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  auto cr = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cr(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cr(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool point_in_hull(const std::vector<Vec2>& hull, const Vec2& p) {
  if (hull.size() < 3) return false;
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    if ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) < 0) return false;
  }
  return true;
}

struct PixelBounds {
  double x_min, y_min, x_max, y_max;
};

PixelBounds bounds_of(const std::vector<Vec2>& pts) {
  PixelBounds b{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const auto& p : pts) {
    b.x_min = std::min(b.x_min, p.x);
    b.y_min = std::min(b.y_min, p.y);
    b.x_max = std::max(b.x_max, p.x);
    b.y_max = std::max(b.y_max, p.y);
  }
  return b;
}

std::vector<Vec3> box_corners(const Vec2& ground_center, double length, double width, double height) {
  std::vector<Vec3> out;
  out.reserve(8);
  for (const double sx : {-0.5, 0.5})
    for (const double sy : {-0.5, 0.5})
      for (const double sz : {0.0, 1.0})
        out.push_back({ground_center.x + sx * length, ground_center.y + sy * width, sz * height});
  return out;
}

/// Projects all corners; empty when any corner is behind the near plane.
std::vector<Vec2> project_box(const CameraModel& cam, const std::vector<Vec3>& corners) {
  std::vector<Vec2> out;
  out.reserve(corners.size());
  for (const auto& c : corners) {
    const auto p = cam.project(c);
    if (!p) return {};
    out.push_back(*p);
  }
  return out;
}

std::optional<Bbox> tight_bbox(const BitGrid& g) {
  int x0 = g.width(), y0 = g.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      if (g.get(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return std::nullopt;
  return Bbox{static_cast<float>(static_cast<double>(x0) / g.width()),
              static_cast<float>(static_cast<double>(y0) / g.height()),
              static_cast<float>(static_cast<double>(x1 + 1) / g.width()),
              static_cast<float>(static_cast<double>(y1 + 1) / g.height())};
}

MaskFrame invisible_frame(double timestamp, int gw, int gh, DropReason reason) {
  MaskFrame f;
  f.timestamp = timestamp;
  f.grid = BitGrid(gw, gh);
  f.visible = false;
  f.reason = reason;
  return f;
}

}  // namespace

MaskFrame render_mask(const ScenarioConfig& cfg, const Vec3& rx_position,
                      const VehicleFootprint& footprint, std::span<const Scatterer> occluders,
                      double timestamp) {
  const CameraModel cam = CameraModel::from_config(cfg);
  const int gw = cfg.grid_width();
  const int gh = cfg.grid_height();
  const double ds = cfg.mask_downsample;

  const Vec2 ground{rx_position.x, rx_position.y};
  const auto corners = box_corners(ground, footprint.length, footprint.width, footprint.height);
  const auto projected = project_box(cam, corners);
  if (projected.empty()) return invisible_frame(timestamp, gw, gh, DropReason::behind_camera);

  const auto hull = convex_hull(projected);
  const PixelBounds pb = bounds_of(projected);
  if (pb.x_max < 0 || pb.y_max < 0 || pb.x_min >= cam.width() || pb.y_min >= cam.height())
    return invisible_frame(timestamp, gw, gh, DropReason::outside_image);

  MaskFrame f;
  f.timestamp = timestamp;
  f.grid = BitGrid(gw, gh);
  const int gx0 = std::max(0, static_cast<int>(std::floor(pb.x_min / ds)));
  const int gy0 = std::max(0, static_cast<int>(std::floor(pb.y_min / ds)));
  const int gx1 = std::min(gw - 1, static_cast<int>(std::floor(pb.x_max / ds)));
  const int gy1 = std::min(gh - 1, static_cast<int>(std::floor(pb.y_max / ds)));
  for (int gy = gy0; gy <= gy1; ++gy)
    for (int gx = gx0; gx <= gx1; ++gx)
      if (point_in_hull(hull, {(gx + 0.5) * ds, (gy + 0.5) * ds})) f.grid.set(gx, gy, true);

  const int cells = f.grid.count();
  if (cells == 0) return invisible_frame(timestamp, gw, gh, DropReason::outside_image);
  if (cells < kMinVisibleCells) return invisible_frame(timestamp, gw, gh, DropReason::too_far);

  // Occlusion: projected occluder rectangle fully contains the vehicle's
  // projected extent and the occluder is closer to the camera.
  const double vehicle_dist = norm(Vec3{ground.x, ground.y, footprint.height / 2} - cam.position());
  for (const auto& oc : occluders) {
    const double oc_dist = norm(oc.position - cam.position());
    if (oc_dist >= vehicle_dist) continue;
    const auto oc_corners =
        box_corners({oc.position.x, oc.position.y}, kOccluderLength, kOccluderWidth, kOccluderHeight);
    const auto oc_proj = project_box(cam, oc_corners);
    if (oc_proj.empty()) continue;
    const PixelBounds ob = bounds_of(oc_proj);
    if (ob.x_min <= pb.x_min && ob.y_min <= pb.y_min && ob.x_max >= pb.x_max && ob.y_max >= pb.y_max)
      return invisible_frame(timestamp, gw, gh, DropReason::occluded);
  }

  f.visible = true;
  f.bbox = tight_bbox(f.grid);
  return f;
}

std::vector<MaskFrame> render_route_masks(const ScenarioConfig& cfg, const VehicleFootprint& footprint,
                                          std::span<const Scatterer> occluders) {
  const double duration = sim::route_duration(cfg);
  std::vector<MaskFrame> out;
  for (int k = 0;; ++k) {
    const double t = static_cast<double>(k) / cfg.frame_rate;
    if (t >= duration - 1e-12) break;
    const Vec3 pos = sim::trajectory_at(cfg, t);
    out.push_back(render_mask(cfg, pos, footprint, occluders, t));
  }
  return out;
}

void export_masks(const std::string& path, std::span<const MaskFrame> frames) {
  io::ByteWriter w;
  int gw = 0, gh = 0;
  if (!frames.empty()) {
    gw = frames[0].grid.width();
    gh = frames[0].grid.height();
  }
  w.u32(kMaskFileMagic);
  w.u32(static_cast<uint32_t>(gw));
  w.u32(static_cast<uint32_t>(gh));
  w.u64(frames.size());
  for (const auto& f : frames) {
    require(f.grid.width() == gw && f.grid.height() == gh, ErrorCode::contract,
            "mask frames differ in grid size");
    w.f64(f.timestamp);
    w.u8(f.visible ? 1 : 0);
    const Bbox b = f.bbox.value_or(Bbox{});
    w.f32(b.x_min);
    w.f32(b.y_min);
    w.f32(b.x_max);
    w.f32(b.y_max);
    w.bytes(f.grid.bytes().data(), f.grid.bytes().size());
  }
  io::write_file(path, w.buf);
}

uint64_t mask_frame_offset(int grid_w, int grid_h, size_t index) {
  const uint64_t frame_bytes = 8 + 1 + 16 + static_cast<uint64_t>((grid_w + 7) / 8) * grid_h;
  return 20 + frame_bytes * index;
}

namespace {

MaskFrame read_one_mask(io::ByteReader& r, int gw, int gh, size_t index) {
  MaskFrame f;
  f.timestamp = r.f64();
  const uint8_t vis = r.u8();
  if (vis > 1)
    fail(ErrorCode::parse, "bad visibility flag in mask record " + std::to_string(index));
  f.visible = vis == 1;
  Bbox b;
  b.x_min = r.f32();
  b.y_min = r.f32();
  b.x_max = r.f32();
  b.y_max = r.f32();
  f.grid = BitGrid(gw, gh);
  r.bytes(f.grid.bytes().data(), f.grid.bytes().size());
  if (f.grid.count() > 0)
    f.bbox = b;
  else if (b.x_max > b.x_min || b.y_max > b.y_min)
    fail(ErrorCode::parse, "bbox present for empty mask record " + std::to_string(index));
  if (!f.visible) f.reason = DropReason::not_visible;
  return f;
}

}  // namespace

std::vector<MaskFrame> import_masks(const std::string& path) {
  const std::string data = io::read_file(path);
  io::ByteReader r(data, path);
  if (r.u32() != kMaskFileMagic) fail(ErrorCode::parse, path + ": bad magic");
  const int gw = static_cast<int>(r.u32());
  const int gh = static_cast<int>(r.u32());
  const uint64_t count = r.u64();
  if (count > 0)
    require(gw > 0 && gh > 0, ErrorCode::parse, path + ": bad grid dimensions");
  std::vector<MaskFrame> out;
  out.reserve(count);
  double prev_ts = 0.0;
  for (uint64_t i = 0; i < count; ++i) {
    MaskFrame f = read_one_mask(r, gw, gh, i);
    if (i > 0 && !(f.timestamp > prev_ts))
      fail(ErrorCode::parse, path + ": non-monotone timestamp at record " + std::to_string(i));
    prev_ts = f.timestamp;
    out.push_back(std::move(f));
  }
  if (r.remaining() != 0) fail(ErrorCode::parse, path + ": trailing bytes after last record");
  return out;
}

MaskFrame read_mask_at(const std::string& path, uint64_t offset) {
  const std::string data = io::read_file(path);
  io::ByteReader header(data, path);
  if (header.u32() != kMaskFileMagic) fail(ErrorCode::parse, path + ": bad magic");
  const int gw = static_cast<int>(header.u32());
  const int gh = static_cast<int>(header.u32());
  require(offset < data.size(), ErrorCode::parse, path + ": mask offset beyond file");
  io::ByteReader r(std::string_view(data).substr(offset), path);
  return read_one_mask(r, gw, gh, static_cast<size_t>(-1));
}

std::vector<MaskFrame> filter_frames(std::span<const MaskFrame> frames,
                                     std::vector<DropLogEntry>* drop_log) {
  std::vector<MaskFrame> out;
  for (size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].visible) {
      out.push_back(frames[i]);
    } else if (drop_log != nullptr) {
      const DropReason r =
          frames[i].reason == DropReason::none ? DropReason::not_visible : frames[i].reason;
      drop_log->push_back({static_cast<int>(i), frames[i].timestamp, r});
    }
  }
  return out;
}

void write_drop_log(const std::string& path, std::span<const DropLogEntry> log) {
  std::string out = "index,timestamp,reason\n";
  for (const auto& e : log) {
    out += std::to_string(e.index);
    out += ',';
    out += io::format_double(e.timestamp);
    out += ',';
    out += drop_reason_name(e.reason);
    out += '\n';
  }
  io::write_file(path, out);
}

ImageMode image_mode_from_name(const std::string& name) {
  if (name == "single" || name == "single_mask") return ImageMode::single_mask;
  if (name == "full" || name == "full_segmentation") return ImageMode::full_segmentation;
  if (name == "raw" || name == "raw_scene") return ImageMode::raw_scene;
  fail(ErrorCode::parse, "unknown image mode '" + name + "'");
}

const char* image_mode_name(ImageMode m) {
  switch (m) {
    case ImageMode::single_mask: return "single_mask";
    case ImageMode::full_segmentation: return "full_segmentation";
    case ImageMode::raw_scene: return "raw_scene";
  }
  return "unknown";
}

int mode_channels(ImageMode m) { return m == ImageMode::full_segmentation ? 3 : 1; }

BitGrid background_grid(uint64_t scene_key, int grid_w, int grid_h) {
  BitGrid g(grid_w, grid_h);
  Rng rng(stream_seed(scene_key, 0xBA5Eu));
  // Blocky skyline along the top half plus a road band at the bottom.
  const int buildings = 6 + static_cast<int>(rng.below(5));
  for (int b = 0; b < buildings; ++b) {
    const int w = 8 + static_cast<int>(rng.below(24));
    const int h = grid_h / 5 + static_cast<int>(rng.below(static_cast<uint64_t>(grid_h / 3)));
    const int x0 = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, grid_w - w))));
    for (int y = 0; y < h; ++y)
      for (int x = x0; x < std::min(grid_w, x0 + w); ++x) g.set(x, y, true);
  }
  const int road_top = grid_h - grid_h / 10;
  for (int y = road_top; y < grid_h; ++y)
    for (int x = 0; x < grid_w; ++x) g.set(x, y, true);
  return g;
}

SceneComposer::SceneComposer(ImageMode mode, uint64_t scene_key, int grid_w, int grid_h)
    : mode_(mode), scene_key_(scene_key), gw_(grid_w), gh_(grid_h) {
  if (mode_ != ImageMode::single_mask) background_ = background_grid(scene_key, grid_w, grid_h);
}

namespace {

void stamp_random_rects(BitGrid& g, Rng& rng, int count, int max_w, int max_h) {
  for (int i = 0; i < count; ++i) {
    const int w = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(max_w - 1)));
    const int h = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(max_h - 1)));
    const int x0 = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, g.width() - w))));
    const int y0 = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, g.height() - h))));
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) g.set(x, y, true);
  }
}

}  // namespace

void SceneComposer::compose(const MaskFrame& frame, uint64_t frame_index, float* out) const {
  require(frame.grid.width() == gw_ && frame.grid.height() == gh_, ErrorCode::contract,
          "mask grid does not match composer dimensions");
  const size_t plane = static_cast<size_t>(gw_) * gh_;
  std::fill(out, out + plane * static_cast<size_t>(channels()), 0.0f);

  auto blit = [&](const BitGrid& g, float* dst) {
    size_t i = 0;
    for (int y = 0; y < gh_; ++y)
      for (int x = 0; x < gw_; ++x, ++i)
        if (g.get(x, y)) dst[i] = 1.0f;
  };

  switch (mode_) {
    case ImageMode::single_mask:
      blit(frame.grid, out);
      break;
    case ImageMode::raw_scene: {
      BitGrid merged = background_;
      Rng rng(stream_seed(scene_key_ ^ 0x5CE11Eull, frame_index));
      stamp_random_rects(merged, rng, 3 + static_cast<int>(rng.below(4)), 9, 5);
      for (int y = 0; y < gh_; ++y)
        for (int x = 0; x < gw_; ++x)
          if (frame.grid.get(x, y)) merged.set(x, y, true);
      blit(merged, out);
      break;
    }
    case ImageMode::full_segmentation: {
      blit(frame.grid, out);
      BitGrid vehicles(gw_, gh_);
      Rng rng(stream_seed(scene_key_ ^ 0xF0F0ull, frame_index));
      stamp_random_rects(vehicles, rng, 2 + static_cast<int>(rng.below(3)), 9, 5);
      blit(vehicles, out + plane);
      BitGrid people = background_;
      stamp_random_rects(people, rng, 3 + static_cast<int>(rng.below(4)), 3, 4);
      blit(people, out + 2 * plane);
      break;
    }
  }
}

}  // namespace vacp::vision
