#include "occlane/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "occlane/image_io.hpp"

namespace occlane {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json box_to_json(const BBox& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max, b.class_id, b.confidence});
}

BBox box_from_json(const json& j, const std::string& frame_id) {
  if (!j.is_array() || j.size() != 6) {
    throw ValidationError("frame '" + frame_id + "': occlusion box must be [x_min,y_min,x_max,y_max,class_id,confidence]");
  }
  for (int i = 0; i < 5; ++i) {
    if (!j[i].is_number_integer()) throw ValidationError("frame '" + frame_id + "': box coordinates and class must be integers");
  }
  if (!j[5].is_number()) throw ValidationError("frame '" + frame_id + "': box confidence must be a number");
  return BBox{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>(), j[4].get<int>(), j[5].get<double>()};
}

json frame_to_json(const FrameRecord& f) {
  json j;
  j["id"] = f.id;
  j["clear_image"] = f.clear_image;
  j["occluded_image"] = f.occluded_image ? json(*f.occluded_image) : json(nullptr);
  j["lane_mask"] = f.lane_mask;
  if (f.occlusion_boxes) {
    json boxes = json::array();
    for (const auto& b : *f.occlusion_boxes) boxes.push_back(box_to_json(b));
    j["occlusion_boxes"] = std::move(boxes);
  } else {
    j["occlusion_boxes"] = nullptr;
  }
  if (f.road_roi) {
    json roi = json::array();
    for (const auto& p : *f.road_roi) roi.push_back(json::array({p.x, p.y}));
    j["road_roi"] = std::move(roi);
  } else {
    j["road_roi"] = nullptr;
  }
  j["seed"] = f.seed;
  j["source"] = f.source;
  return j;
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

FrameRecord frame_from_json(const json& j, std::size_t index) {
  const std::string where = "frame #" + std::to_string(index);
  if (!j.is_object()) throw ValidationError(where + ": frame must be an object");
  FrameRecord f;
  f.id = required<std::string>(j, "id", where);
  const std::string fw = "frame '" + f.id + "'";
  f.clear_image = required<std::string>(j, "clear_image", fw);
  f.lane_mask = required<std::string>(j, "lane_mask", fw);
  if (j.contains("occluded_image") && !j["occluded_image"].is_null()) {
    f.occluded_image = required<std::string>(j, "occluded_image", fw);
  }
  if (j.contains("occlusion_boxes") && !j["occlusion_boxes"].is_null()) {
    if (!j["occlusion_boxes"].is_array()) throw ValidationError(fw + ": occlusion_boxes must be an array");
    std::vector<BBox> boxes;
    for (const auto& b : j["occlusion_boxes"]) boxes.push_back(box_from_json(b, f.id));
    f.occlusion_boxes = std::move(boxes);
  }
  if (j.contains("road_roi") && !j["road_roi"].is_null()) {
    if (!j["road_roi"].is_array()) throw ValidationError(fw + ": road_roi must be an array of [x,y]");
    Polygon roi;
    for (const auto& p : j["road_roi"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw ValidationError(fw + ": road_roi vertices must be [x,y] pairs");
      }
      roi.push_back(Point2{p[0].get<double>(), p[1].get<double>()});
    }
    f.road_roi = std::move(roi);
  }
  if (j.contains("seed") && !j["seed"].is_null()) f.seed = required<std::int64_t>(j, "seed", fw);
  if (j.contains("source") && !j["source"].is_null()) f.source = required<std::string>(j, "source", fw);
  return f;
}

void check_assets(const DatasetManifest& m, const FrameRecord& f) {
  const std::string fw = "frame '" + f.id + "'";
  auto must_exist = [&](const std::string& rel, const char* what) {
    const fs::path p = m.resolve(rel);
    if (!fs::exists(p)) throw ValidationError(fw + ": " + what + " not found: " + p.string());
    return p;
  };
  const Size size = png_dimensions(must_exist(f.clear_image, "clear_image"));
  if (png_dimensions(must_exist(f.lane_mask, "lane_mask")) != size) {
    throw ValidationError(fw + ": lane_mask size differs from clear_image");
  }
  if (f.occluded_image && png_dimensions(must_exist(*f.occluded_image, "occluded_image")) != size) {
    throw ValidationError(fw + ": occluded_image size differs from clear_image");
  }
  if (f.occlusion_boxes) {
    for (const auto& b : *f.occlusion_boxes) {
      if (!b.within(size)) throw ValidationError(fw + ": occlusion box lies outside the image bounds");
    }
  }
}

}  // namespace

void validate_manifest_structure(const DatasetManifest& m) {
  if (m.schema_version != DatasetManifest::kSchemaVersion) {
    throw ValidationError("unsupported manifest schema_version " + std::to_string(m.schema_version));
  }
  if (m.class_names.empty()) throw ValidationError("class_names must not be empty");
  std::set<std::string> ids;
  for (const auto& f : m.frames) {
    if (f.id.empty()) throw ValidationError("frame with empty id");
    if (!ids.insert(f.id).second) throw ValidationError("duplicate frame id '" + f.id + "'");
    const std::string fw = "frame '" + f.id + "'";
    if (f.occlusion_boxes) {
      for (const auto& b : *f.occlusion_boxes) {
        if (!b.valid()) throw ValidationError(fw + ": invalid occlusion box (need 0 <= min < max)");
        if (b.class_id < 0 || b.class_id >= static_cast<int>(m.class_names.size())) {
          throw ValidationError(fw + ": occlusion box class_id out of range");
        }
        if (!(b.confidence >= 0.0 && b.confidence <= 1.0)) {
          throw ValidationError(fw + ": occlusion box confidence outside [0,1]");
        }
      }
    }
    if (f.road_roi && f.road_roi->size() < 3) throw ValidationError(fw + ": road_roi needs at least 3 vertices");
  }
}

DatasetManifest read_manifest(const fs::path& path, ManifestReadOptions opts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ValidationError("manifest must be a JSON object");

  DatasetManifest m;
  m.base_dir = path.parent_path();
  m.schema_version = required<int>(doc, "schema_version", "manifest");
  if (m.schema_version != DatasetManifest::kSchemaVersion) {
    throw ValidationError("unsupported manifest schema_version " + std::to_string(m.schema_version));
  }
  if (doc.contains("class_names") && !doc["class_names"].is_null()) {
    m.class_names = required<std::vector<std::string>>(doc, "class_names", "manifest");
  }
  if (doc.contains("frames") && !doc["frames"].is_null()) {
    if (!doc["frames"].is_array()) throw ValidationError("manifest: frames must be an array");
    std::size_t i = 0;
    for (const auto& fj : doc["frames"]) m.frames.push_back(frame_from_json(fj, i++));
  }
  validate_manifest_structure(m);
  if (!opts.lenient_paths) {
    for (const auto& f : m.frames) check_assets(m, f);
  }
  return m;
}

std::string manifest_to_string(const DatasetManifest& m) {
  json doc;
  doc["schema_version"] = m.schema_version;
  doc["class_names"] = m.class_names;
  json frames = json::array();
  for (const auto& f : m.frames) frames.push_back(frame_to_json(f));
  doc["frames"] = std::move(frames);
  return doc.dump(2) + "\n";
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  validate_manifest_structure(m);
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << manifest_to_string(m);
  if (!out) throw IoError("cannot write manifest: " + path.string());
}

}  // namespace occlane
