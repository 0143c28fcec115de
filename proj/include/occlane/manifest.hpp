#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occlane/geometry.hpp"

namespace occlane {

/// One frame of a dataset: clear frame, optional occluded counterpart, lane
/// ground truth and occlusion boxes. Paths are relative to the manifest.
struct FrameRecord {
  std::string id;
  std::string clear_image;
  std::optional<std::string> occluded_image;
  std::string lane_mask;
  /// nullopt when the frame carries no box annotation at all; an empty list
  /// means "annotated, no occluders".
  std::optional<std::vector<BBox>> occlusion_boxes;
  std::optional<Polygon> road_roi;
  std::int64_t seed = 0;
  std::string source;

  bool operator==(const FrameRecord&) const = default;
};

struct DatasetManifest {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::vector<FrameRecord> frames;
  std::vector<std::string> class_names = traffic_classes();
  /// Directory the relative paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }

  /// Structural equality; base_dir is location metadata and is ignored.
  bool operator==(const DatasetManifest& o) const {
    return schema_version == o.schema_version && frames == o.frames && class_names == o.class_names;
  }
};

struct ManifestReadOptions {
  /// Skip file existence and image-bounds checks (useful before assets exist).
  bool lenient_paths = false;
};

/// Parses and eagerly validates a manifest. Throws ValidationError naming the
/// offending frame, IoError for unreadable files.
DatasetManifest read_manifest(const std::filesystem::path& path, ManifestReadOptions opts = {});

/// Deterministic serialization: sorted keys, fixed indentation.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Serialized form used by write_manifest.
std::string manifest_to_string(const DatasetManifest& manifest);

/// Structural checks that need no file access (ids, boxes, schema).
void validate_manifest_structure(const DatasetManifest& manifest);

}  // namespace occlane
