#include "occlane/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "occlane/error.hpp"

namespace occlane {

using nlohmann::json;

namespace {

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void mark(const char* key) { seen_.insert(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  template <class E>
  void get_enum(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    seen_.insert(key);
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (v.is_string()) {
      for (const auto& [name, value] : names) {
        if (v.get<std::string>() == name) {
          out = value;
          return;
        }
      }
    }
    std::string allowed;
    for (const auto& [name, value] : names) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    fail(key, "expected one of: " + allowed);
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  [[noreturn]] void fail(const char* key, const std::string& why) const {
    throw ValidationError(path(key) + ": " + why);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(where_ + "." + key + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

const char* name(DetectorMode m) {
  switch (m) {
    case DetectorMode::oracle: return "oracle";
    case DetectorMode::diff: return "diff";
    case DetectorMode::external: return "external";
  }
  return "";
}

const char* name(InpaintMode m) {
  switch (m) {
    case InpaintMode::fmm: return "fmm";
    case InpaintMode::fmm_refine: return "fmm+refine";
    case InpaintMode::oracle: return "oracle";
    case InpaintMode::external: return "external";
  }
  return "";
}

json polygon_json(const Polygon& p) {
  json out = json::array();
  for (const auto& v : p) out.push_back({v.x, v.y});
  return out;
}

}  // namespace

json to_json(const ExternalNodeSpec& spec) {
  return json{{"command", spec.command},
              {"params", spec.params},
              {"timeout_s", spec.timeout_s},
              {"handshake_timeout_s", spec.handshake_timeout_s},
              {"keep_scratch", spec.keep_scratch},
              {"pass_clear_reference", spec.pass_clear_reference}};
}

json to_json(const DetectorConfig& cfg) {
  return json{{"mode", name(cfg.mode)},
              {"diff_threshold", cfg.diff_threshold},
              {"min_component_area", cfg.min_component_area},
              {"open_radius", cfg.open_radius},
              {"class_filter", cfg.class_filter},
              {"box_dilation", cfg.box_dilation},
              {"confidence_threshold", cfg.confidence_threshold},
              {"external", to_json(cfg.external)}};
}

json to_json(const InpaintConfig& cfg) {
  return json{{"mode", name(cfg.mode)},
              {"fmm_radius", cfg.fmm_radius},
              {"patch_size", cfg.patch_size},
              {"search_window", cfg.search_window},
              {"refine_passes", cfg.refine_passes},
              {"external", to_json(cfg.external)}};
}

json to_json(const LaneFinderConfig& cfg) {
  return json{{"mode", cfg.mode == SegmenterMode::classical ? "classical" : "external"},
              {"luma_threshold", cfg.luma_threshold},
              {"grad_threshold", cfg.grad_threshold},
              {"roi", cfg.roi ? polygon_json(*cfg.roi) : json(nullptr)},
              {"n_windows", cfg.n_windows},
              {"window_halfwidth", cfg.window_halfwidth},
              {"min_pixels_recenter", cfg.min_pixels_recenter},
              {"fit", cfg.fit == FitMethod::lsq ? "lsq" : "ransac"},
              {"ransac_iters", cfg.ransac_iters},
              {"ransac_tol", cfg.ransac_tol},
              {"ransac_seed", cfg.ransac_seed},
              {"stroke", cfg.stroke},
              {"min_peak_mass", cfg.min_peak_mass},
              {"external", to_json(cfg.external)}};
}

json to_json(const PipelineConfig& cfg) {
  return json{{"detector", to_json(cfg.detector)},
              {"inpainter", to_json(cfg.inpainter)},
              {"segmenter", to_json(cfg.segmenter)},
              {"mask_binarize_threshold", cfg.mask_binarize_threshold},
              {"eval_dilation", cfg.eval_dilation},
              {"workers", cfg.workers}};
}

json to_json(const SceneParams& p) {
  return json{{"width", p.width},
              {"height", p.height},
              {"lane_count", p.lane_count},
              {"curvature", p.curvature},
              {"lane_stroke", p.lane_stroke},
              {"horizon_y", p.horizon_y},
              {"road_brightness", p.road_brightness},
              {"lane_brightness", p.lane_brightness},
              {"noise_sigma", p.noise_sigma},
              {"seed", p.seed}};
}

json to_json(const PlacementPolicy& p) {
  return json{{"min_occluders", p.min_occluders},
              {"max_occluders", p.max_occluders},
              {"scale_by_y", p.scale_by_y},
              {"max_mutual_iou", p.max_mutual_iou},
              {"require_road_intersection", p.require_road_intersection},
              {"seed", p.seed},
              {"max_retries", p.max_retries}};
}

ExternalNodeSpec external_spec_from_json(const json& j, const std::string& where) {
  ExternalNodeSpec s;
  ObjectReader r(j, where);
  r.get("command", s.command);
  if (r.has("params")) {
    s.params = r.raw("params");
    if (!s.params.is_object()) r.fail("params", "expected an object");
  }
  r.mark("params");
  r.get("timeout_s", s.timeout_s);
  r.get("handshake_timeout_s", s.handshake_timeout_s);
  r.get("keep_scratch", s.keep_scratch);
  r.get("pass_clear_reference", s.pass_clear_reference);
  r.finish();
  if (!(s.timeout_s > 0.0)) throw ValidationError(where + ".timeout_s: must be > 0");
  if (!(s.handshake_timeout_s > 0.0)) throw ValidationError(where + ".handshake_timeout_s: must be > 0");
  return s;
}

DetectorConfig detector_config_from_json(const json& j, const std::string& where) {
  DetectorConfig c;
  ObjectReader r(j, where);
  r.get_enum("mode", c.mode,
             {{"oracle", DetectorMode::oracle}, {"diff", DetectorMode::diff}, {"external", DetectorMode::external}});
  r.get("diff_threshold", c.diff_threshold);
  r.get("min_component_area", c.min_component_area);
  r.get("open_radius", c.open_radius);
  r.get("class_filter", c.class_filter);
  r.get("box_dilation", c.box_dilation);
  r.get("confidence_threshold", c.confidence_threshold);
  if (r.has("external")) c.external = external_spec_from_json(r.raw("external"), r.path("external"));
  r.mark("external");
  r.finish();
  return c;
}

InpaintConfig inpaint_config_from_json(const json& j, const std::string& where) {
  InpaintConfig c;
  ObjectReader r(j, where);
  r.get_enum("mode", c.mode,
             {{"fmm", InpaintMode::fmm},
              {"fmm+refine", InpaintMode::fmm_refine},
              {"oracle", InpaintMode::oracle},
              {"external", InpaintMode::external}});
  r.get("fmm_radius", c.fmm_radius);
  r.get("patch_size", c.patch_size);
  r.get("search_window", c.search_window);
  r.get("refine_passes", c.refine_passes);
  if (r.has("external")) c.external = external_spec_from_json(r.raw("external"), r.path("external"));
  r.mark("external");
  r.finish();
  return c;
}

LaneFinderConfig lane_config_from_json(const json& j, const std::string& where) {
  LaneFinderConfig c;
  ObjectReader r(j, where);
  r.get_enum("mode", c.mode, {{"classical", SegmenterMode::classical}, {"external", SegmenterMode::external}});
  r.get("luma_threshold", c.luma_threshold);
  r.get("grad_threshold", c.grad_threshold);
  if (r.has("roi")) {
    const json& roi = r.raw("roi");
    if (roi.is_string() && roi.get<std::string>() == "manifest") {
      c.roi.reset();
    } else {
      if (!roi.is_array()) r.fail("roi", "expected an array of [x, y] pairs or \"manifest\"");
      Polygon poly;
      for (const auto& v : roi) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
          r.fail("roi", "expected an array of [x, y] pairs");
        }
        poly.push_back(Point2{v[0].get<double>(), v[1].get<double>()});
      }
      if (poly.size() < 3) r.fail("roi", "polygon needs at least 3 vertices");
      c.roi = std::move(poly);
    }
  }
  r.mark("roi");
  r.get("n_windows", c.n_windows);
  r.get("window_halfwidth", c.window_halfwidth);
  r.get("min_pixels_recenter", c.min_pixels_recenter);
  r.get_enum("fit", c.fit, {{"lsq", FitMethod::lsq}, {"ransac", FitMethod::ransac}});
  r.get("ransac_iters", c.ransac_iters);
  r.get("ransac_tol", c.ransac_tol);
  r.get("ransac_seed", c.ransac_seed);
  r.get("stroke", c.stroke);
  r.get("min_peak_mass", c.min_peak_mass);
  if (r.has("external")) c.external = external_spec_from_json(r.raw("external"), r.path("external"));
  r.mark("external");
  r.finish();
  return c;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  ObjectReader r(j, "config");
  if (r.has("detector")) c.detector = detector_config_from_json(r.raw("detector"));
  if (r.has("inpainter")) c.inpainter = inpaint_config_from_json(r.raw("inpainter"));
  if (r.has("segmenter")) c.segmenter = lane_config_from_json(r.raw("segmenter"));
  r.mark("detector");
  r.mark("inpainter");
  r.mark("segmenter");
  r.get("mask_binarize_threshold", c.mask_binarize_threshold);
  r.get("eval_dilation", c.eval_dilation);
  r.get("workers", c.workers);
  r.finish();
  validate(c);
  return c;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

PipelineConfig read_pipeline_config(const std::filesystem::path& path) {
  try {
    return pipeline_config_from_json(read_json(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace occlane
