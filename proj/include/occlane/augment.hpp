#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occlane/geometry.hpp"
#include "occlane/manifest.hpp"
#include "occlane/raster.hpp"

namespace occlane {

/// An RGBA cut-out composited onto clear frames. `nominal_base_width` is the
/// on-frame width at scale 1 (the bottom row when scaling by depth).
struct OccluderSprite {
  RasterRgba rgba;
  int class_id = 0;
  int nominal_base_width = 0;
  std::string name;
};

struct PixelPos {
  int x = 0;
  int y = 0;
};

struct CompositeResult {
  RasterImage occluded;
  BBox box;
};

/// Nearest-neighbour resample of a sprite by `scale` (each side at least 1 px).
RasterRgba scale_sprite(const RasterRgba& rgba, double scale);

/// Alpha-over of the scaled sprite with its top-left corner at `position`.
/// Pixels outside the nonzero-alpha footprint are untouched; the box is the
/// tight bound of composited nonzero-alpha pixels clipped to the frame.
/// Throws ParamError if nothing with alpha > 0 lands inside the frame.
CompositeResult composite_occluder(const RasterImage& clear, const OccluderSprite& sprite, PixelPos position,
                                   double scale);

struct PlacementPolicy {
  int min_occluders = 1;
  int max_occluders = 3;
  bool scale_by_y = true;
  double max_mutual_iou = 0.3;
  bool require_road_intersection = true;
  std::uint64_t seed = 0;
  int max_retries = 50;

  bool operator==(const PlacementPolicy&) const = default;
};

void validate(const PlacementPolicy& policy);

/// Depth scale: linear in the sprite's bottom row, 0.35 at `top_y`, 1.0 at the last row.
double perspective_scale(int bottom_y, int top_y, int height);

struct AugmentedFrame {
  RasterImage occluded;
  std::vector<BBox> boxes;
};

/// Places occluders on one frame. Returns nullopt when placement fails within
/// the retry budget. `frame_seed` should come from derive_seed(policy.seed, id).
std::optional<AugmentedFrame> augment_frame(const RasterImage& clear, const std::optional<Polygon>& road_roi,
                                            const std::vector<OccluderSprite>& sprites,
                                            const PlacementPolicy& policy, std::uint64_t frame_seed);

struct AugmentResult {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

/// Writes occluded frames to out_dir/frames/<id>_occ.png and returns the
/// augmented manifest located in out_dir (not written). Lane masks keep
/// pointing at the original files. Frames whose placement fails are dropped
/// with a warning.
AugmentResult build_augmented_dataset(const DatasetManifest& clear_manifest, const std::vector<OccluderSprite>& sprites,
                                      const PlacementPolicy& policy, const std::filesystem::path& out_dir);

/// Loads <class>_<n>.png files; class names resolve against `class_names`.
std::vector<OccluderSprite> load_sprite_library(const std::filesystem::path& dir,
                                                const std::vector<std::string>& class_names);

/// Procedural vehicle and pedestrian sprites sized for 320-pixel-wide frames.
std::vector<OccluderSprite> make_default_sprites(std::uint64_t seed, int per_class = 3);

void save_sprite_library(const std::vector<OccluderSprite>& sprites, const std::filesystem::path& dir,
                         const std::vector<std::string>& class_names);

}  // namespace occlane
