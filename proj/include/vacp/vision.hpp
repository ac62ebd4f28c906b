#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vacp/common.hpp"
#include "vacp/geometry.hpp"
#include "vacp/scenario.hpp"

namespace vacp::vision {

/// Row-major bit-packed binary occupancy grid. The packed bytes are the
/// on-disk representation (bit x of row y = byte y*stride + x/8, LSB first).
class BitGrid {
 public:
  BitGrid() = default;
  BitGrid(int width, int height)
      : width_(width), height_(height), bytes_(static_cast<size_t>(row_stride()) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int row_stride() const { return (width_ + 7) / 8; }

  bool get(int x, int y) const {
    return (bytes_[static_cast<size_t>(y) * row_stride() + x / 8] >> (x % 8)) & 1;
  }
  void set(int x, int y, bool v) {
    auto& b = bytes_[static_cast<size_t>(y) * row_stride() + x / 8];
    const uint8_t bit = static_cast<uint8_t>(1u << (x % 8));
    b = v ? (b | bit) : (b & static_cast<uint8_t>(~bit));
  }
  void clear() { std::fill(bytes_.begin(), bytes_.end(), 0); }
  int count() const;

  std::vector<uint8_t>& bytes() { return bytes_; }
  const std::vector<uint8_t>& bytes() const { return bytes_; }

  bool operator==(const BitGrid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> bytes_;
};

/// Normalized tight bounds of the set cells, in [0,1] image coordinates.
struct Bbox {
  float x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

enum class DropReason : uint8_t {
  none = 0,
  behind_camera,
  outside_image,
  too_far,
  occluded,
  not_visible,  // imported frames carry no reason
};

const char* drop_reason_name(DropReason r);

struct MaskFrame {
  double timestamp = 0.0;
  BitGrid grid;
  std::optional<Bbox> bbox;  // present iff any cell is set
  bool visible = false;
  DropReason reason = DropReason::none;  // in-memory only, not serialized
};

/// Pinhole camera with horizontal FoV from the scenario; aims at
/// camera_look_at, defaulting to the route centroid.
class CameraModel {
 public:
  static CameraModel from_config(const ScenarioConfig& cfg);

  /// Pixel coordinates; nullopt when the point is behind the near plane.
  std::optional<Vec2> project(const Vec3& world) const;

  double focal_px() const { return focal_px_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Vec3& position() const { return position_; }
  const Vec3& right() const { return right_; }
  const Vec3& down() const { return down_; }
  const Vec3& forward() const { return forward_; }

 private:
  Vec3 position_, right_, down_, forward_;
  double focal_px_ = 0.0;
  int width_ = 0, height_ = 0;
};

/// Cells a mask must subtend to count as distinguishable.
inline constexpr int kMinVisibleCells = 4;

/// Occluder box dimensions used for scatterers acting as blockers.
inline constexpr double kOccluderLength = 8.0;
inline constexpr double kOccluderWidth = 2.5;
inline constexpr double kOccluderHeight = 3.5;

/// Rasterizes the vehicle box (axis-aligned at rx ground position) through
/// the pinhole camera onto the downsampled grid: filled convex hull of the
/// eight projected corners. Invisible (empty grid) when behind the camera,
/// fully outside the image, subtending fewer than kMinVisibleCells cells, or
/// fully contained by a closer occluder's projected rectangle.
MaskFrame render_mask(const ScenarioConfig& cfg, const Vec3& rx_position,
                      const VehicleFootprint& footprint, std::span<const Scatterer> occluders,
                      double timestamp = 0.0);

/// Frames at frame_rate over the route duration.
std::vector<MaskFrame> render_route_masks(const ScenarioConfig& cfg, const VehicleFootprint& footprint,
                                          std::span<const Scatterer> occluders);

inline constexpr uint32_t kMaskFileMagic = 0x4B534D56;  // "VMSK"

void export_masks(const std::string& path, std::span<const MaskFrame> frames);
std::vector<MaskFrame> import_masks(const std::string& path);

/// Byte offset of frame `index` in the mask interchange file.
uint64_t mask_frame_offset(int grid_w, int grid_h, size_t index);
MaskFrame read_mask_at(const std::string& path, uint64_t offset);

struct DropLogEntry {
  int index = 0;
  double timestamp = 0.0;
  DropReason reason = DropReason::none;
};

/// Keeps visible frames; dropped frames are logged with reason codes.
std::vector<MaskFrame> filter_frames(std::span<const MaskFrame> frames,
                                     std::vector<DropLogEntry>* drop_log = nullptr);

void write_drop_log(const std::string& path, std::span<const DropLogEntry> log);

// ---------------------------------------------------------------------------
// Predictor input channels.

enum class ImageMode { single_mask, full_segmentation, raw_scene };

ImageMode image_mode_from_name(const std::string& name);
const char* image_mode_name(ImageMode m);
int mode_channels(ImageMode m);

/// Turns mask frames into network input planes. single_mask: the target mask
/// alone. raw_scene: target merged with the scenario's static background and
/// per-frame clutter (one indistinct plane). full_segmentation: target,
/// vehicle-class clutter and background/pedestrian planes as 3 channels.
/// Deterministic given (scene_key, frame_index).
class SceneComposer {
 public:
  SceneComposer(ImageMode mode, uint64_t scene_key, int grid_w, int grid_h);

  int channels() const { return mode_channels(mode_); }
  ImageMode mode() const { return mode_; }

  /// out must hold channels() * grid_h * grid_w floats (C, H, W layout).
  void compose(const MaskFrame& frame, uint64_t frame_index, float* out) const;

 private:
  ImageMode mode_;
  uint64_t scene_key_;
  int gw_, gh_;
  BitGrid background_;
};

/// Static per-scenario skyline/road silhouette.
BitGrid background_grid(uint64_t scene_key, int grid_w, int grid_h);

}  // namespace vacp::vision
