#include "occlane/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "occlane/image_io.hpp"
#include "occlane/metrics.hpp"
#include "occlane/rng.hpp"

namespace occlane {

namespace fs = std::filesystem;

RasterRgba scale_sprite(const RasterRgba& rgba, double scale) {
  if (!(scale > 0.0)) throw ParamError("sprite scale must be positive");
  const int w = std::max(1, static_cast<int>(std::lround(rgba.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(rgba.height() * scale)));
  if (w == rgba.width() && h == rgba.height()) return rgba;
  const double sx = static_cast<double>(w) / rgba.width();
  const double sy = static_cast<double>(h) / rgba.height();
  RasterRgba out(w, h);
  for (int y = 0; y < h; ++y) {
    const int src_y = std::min(rgba.height() - 1, static_cast<int>((y + 0.5) / sy));
    for (int x = 0; x < w; ++x) {
      const int src_x = std::min(rgba.width() - 1, static_cast<int>((x + 0.5) / sx));
      for (int c = 0; c < 4; ++c) out.at(x, y, c) = rgba.at(src_x, src_y, c);
    }
  }
  return out;
}

namespace {

// Tight box of alpha > 0 pixels of `scaled` placed at `pos`, clipped to the frame.
std::optional<BBox> footprint(const RasterRgba& scaled, PixelPos pos, Size frame) {
  BBox box{frame.width, frame.height, 0, 0, 0, 1.0};
  bool any = false;
  for (int y = 0; y < scaled.height(); ++y) {
    const int fy = pos.y + y;
    if (fy < 0 || fy >= frame.height) continue;
    for (int x = 0; x < scaled.width(); ++x) {
      const int fx = pos.x + x;
      if (fx < 0 || fx >= frame.width || scaled.at(x, y, 3) == 0) continue;
      any = true;
      box.x_min = std::min(box.x_min, fx);
      box.y_min = std::min(box.y_min, fy);
      box.x_max = std::max(box.x_max, fx + 1);
      box.y_max = std::max(box.y_max, fy + 1);
    }
  }
  if (!any) return std::nullopt;
  return box;
}

void blend_into(RasterImage& frame, const RasterRgba& scaled, PixelPos pos) {
  for (int y = 0; y < scaled.height(); ++y) {
    const int fy = pos.y + y;
    if (fy < 0 || fy >= frame.height()) continue;
    for (int x = 0; x < scaled.width(); ++x) {
      const int fx = pos.x + x;
      const int a = scaled.at(x, y, 3);
      if (fx < 0 || fx >= frame.width() || a == 0) continue;
      for (int c = 0; c < 3; ++c) {
        const int v = a * scaled.at(x, y, c) + (255 - a) * frame.at(fx, fy, c);
        frame.at(fx, fy, c) = static_cast<std::uint8_t>((v + 127) / 255);
      }
    }
  }
}

double base_scale(const OccluderSprite& s) {
  return s.nominal_base_width > 0 ? static_cast<double>(s.nominal_base_width) / s.rgba.width() : 1.0;
}

long roi_overlap(const RasterMask& roi, const BBox& b) {
  long n = 0;
  for (int y = b.y_min; y < b.y_max; ++y) {
    const std::uint8_t* row = roi.row(y);
    for (int x = b.x_min; x < b.x_max; ++x) n += row[x] == kPositive;
  }
  return n;
}

}  // namespace

CompositeResult composite_occluder(const RasterImage& clear, const OccluderSprite& sprite, PixelPos position,
                                   double scale) {
  const RasterRgba scaled = scale_sprite(sprite.rgba, scale);
  auto box = footprint(scaled, position, clear.size());
  if (!box) throw ParamError("sprite has no visible (alpha > 0) pixels inside the frame");
  box->class_id = sprite.class_id;
  box->confidence = 1.0;
  CompositeResult result{clear, *box};
  blend_into(result.occluded, scaled, position);
  return result;
}

void validate(const PlacementPolicy& p) {
  if (p.min_occluders < 1 || p.max_occluders < p.min_occluders) {
    throw ParamError("occluders_per_frame must satisfy 1 <= min <= max");
  }
  if (!(p.max_mutual_iou >= 0.0 && p.max_mutual_iou <= 1.0)) throw ParamError("max_mutual_iou must be in [0,1]");
  if (p.max_retries < 1) throw ParamError("max_retries must be >= 1");
}

double perspective_scale(int bottom_y, int top_y, int height) {
  const double span = std::max(1, height - 1 - top_y);
  const double t = std::clamp((bottom_y - top_y) / span, 0.0, 1.0);
  return 0.35 + 0.65 * t;
}

std::optional<AugmentedFrame> augment_frame(const RasterImage& clear, const std::optional<Polygon>& road_roi,
                                            const std::vector<OccluderSprite>& sprites,
                                            const PlacementPolicy& policy, std::uint64_t frame_seed) {
  validate(policy);
  if (sprites.empty()) throw ParamError("sprite library is empty");
  if (policy.require_road_intersection && !road_roi) {
    throw ParamError("road_roi required when require_road_intersection is set");
  }
  const Size size = clear.size();
  std::optional<RasterMask> roi_mask;
  int top_y = 0;
  if (road_roi) {
    roi_mask = polygon_mask(*road_roi, size);
    double min_y = size.height;
    for (const auto& p : *road_roi) min_y = std::min(min_y, p.y);
    top_y = std::clamp(static_cast<int>(std::floor(min_y)), 0, size.height - 1);
  }

  Rng rng(frame_seed);
  const int count = rng.uniform_int(policy.min_occluders, policy.max_occluders);
  AugmentedFrame out{clear, {}};
  const int lowest_anchor = top_y + (size.height - top_y) / 6;

  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < policy.max_retries && !placed; ++attempt) {
      const OccluderSprite& sprite = sprites[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(sprites.size()) - 1))];
      const int bottom = rng.uniform_int(std::min(lowest_anchor, size.height - 1), size.height - 1);
      const int center_x = rng.uniform_int(0, size.width - 1);
      const double scale = base_scale(sprite) * (policy.scale_by_y ? perspective_scale(bottom, top_y, size.height) : 1.0);
      const RasterRgba scaled = scale_sprite(sprite.rgba, scale);
      const PixelPos pos{center_x - scaled.width() / 2, bottom - scaled.height() + 1};
      auto box = footprint(scaled, pos, size);
      if (!box) continue;
      if (policy.require_road_intersection && roi_overlap(*roi_mask, *box) == 0) continue;
      const bool crowded = std::any_of(out.boxes.begin(), out.boxes.end(),
                                       [&](const BBox& other) { return box_iou(*box, other) > policy.max_mutual_iou; });
      if (crowded) continue;
      box->class_id = sprite.class_id;
      box->confidence = 1.0;
      blend_into(out.occluded, scaled, pos);
      out.boxes.push_back(*box);
      placed = true;
    }
    if (!placed) return std::nullopt;
  }
  return out;
}

AugmentResult build_augmented_dataset(const DatasetManifest& clear_manifest, const std::vector<OccluderSprite>& sprites,
                                      const PlacementPolicy& policy, const fs::path& out_dir) {
  validate(policy);
  if (sprites.empty()) throw ParamError("sprite library is empty");
  AugmentResult result;
  result.manifest.class_names = clear_manifest.class_names;
  result.manifest.base_dir = out_dir;
  const fs::path out_abs = fs::absolute(out_dir).lexically_normal();
  auto rebase = [&](const std::string& rel) {
    const fs::path abs = fs::absolute(clear_manifest.resolve(rel)).lexically_normal();
    return abs.lexically_relative(out_abs).generic_string();
  };

  for (const auto& frame : clear_manifest.frames) {
    if (policy.require_road_intersection && !frame.road_roi) {
      result.warnings.push_back("frame '" + frame.id + "': no road_roi, skipped");
      continue;
    }
    const RasterImage clear = load_image(clear_manifest.resolve(frame.clear_image));
    auto aug = augment_frame(clear, frame.road_roi, sprites, policy, derive_seed(policy.seed, frame.id));
    if (!aug) {
      result.warnings.push_back("frame '" + frame.id + "': occluder placement failed after " +
                                std::to_string(policy.max_retries) + " retries, skipped");
      continue;
    }
    FrameRecord out = frame;
    out.clear_image = rebase(frame.clear_image);
    out.lane_mask = rebase(frame.lane_mask);
    out.occluded_image = "frames/" + frame.id + "_occ.png";
    out.occlusion_boxes = aug->boxes;
    save_raster(aug->occluded, out_dir / *out.occluded_image);
    result.manifest.frames.push_back(std::move(out));
  }
  return result;
}

std::vector<OccluderSprite> load_sprite_library(const fs::path& dir, const std::vector<std::string>& class_names) {
  if (!fs::is_directory(dir)) throw IoError("sprite directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<OccluderSprite> sprites;
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const auto us = stem.rfind('_');
    if (us == std::string::npos || us + 1 == stem.size() ||
        !std::all_of(stem.begin() + static_cast<long>(us) + 1, stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
      throw ValidationError("sprite file must be named <class>_<n>.png: " + file.string());
    }
    const std::string cls = stem.substr(0, us);
    const auto it = std::find(class_names.begin(), class_names.end(), cls);
    if (it == class_names.end()) throw ValidationError("sprite class '" + cls + "' is not a known class: " + file.string());
    OccluderSprite s;
    s.rgba = load_rgba(file);
    s.class_id = static_cast<int>(it - class_names.begin());
    s.nominal_base_width = s.rgba.width();
    s.name = stem;
    bool visible = false;
    for (int y = 0; y < s.rgba.height() && !visible; ++y) {
      for (int x = 0; x < s.rgba.width(); ++x) {
        if (s.rgba.at(x, y, 3) > 0) {
          visible = true;
          break;
        }
      }
    }
    if (!visible) throw ValidationError("sprite has no pixel with alpha > 0: " + file.string());
    sprites.push_back(std::move(s));
  }
  if (sprites.empty()) throw IoError("no sprites found in " + dir.string());
  return sprites;
}

namespace {

struct Rgb {
  int r, g, b;
};

void fill_rect(RasterRgba& s, int x0, int y0, int x1, int y1, Rgb c, int alpha = 255) {
  for (int y = std::max(0, y0); y < std::min(s.height(), y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(s.width(), x1); ++x) {
      s.at(x, y, 0) = static_cast<std::uint8_t>(c.r);
      s.at(x, y, 1) = static_cast<std::uint8_t>(c.g);
      s.at(x, y, 2) = static_cast<std::uint8_t>(c.b);
      s.at(x, y, 3) = static_cast<std::uint8_t>(alpha);
    }
  }
}

void fill_ellipse(RasterRgba& s, double cx, double cy, double rx, double ry, Rgb c) {
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) fill_rect(s, x, y, x + 1, y + 1, c);
    }
  }
}

// Rear view of a car, truck or bus: body, window, tail lights, bumper, wheels.
RasterRgba draw_vehicle(int w, int h, Rgb body, double window_frac, Rng& rng) {
  RasterRgba s(w, h);
  const int wheel_h = std::max(2, h / 7);
  fill_rect(s, 1, 0, w - 1, h - wheel_h, body);
  fill_rect(s, 0, h / 5, w, h - wheel_h, body);
  // soften the roof corners
  s.at(1, 0, 3) = s.at(w - 2, 0, 3) = 128;
  const int win_margin = std::max(2, w / 8);
  fill_rect(s, win_margin, std::max(1, h / 12), w - win_margin, static_cast<int>(h * window_frac), Rgb{35, 45, 55});
  const int light_w = std::max(2, w / 8);
  const int light_y = static_cast<int>(h * (window_frac + 0.08));
  fill_rect(s, 1, light_y, 1 + light_w, light_y + std::max(2, h / 10), Rgb{200, 25, 25});
  fill_rect(s, w - 1 - light_w, light_y, w - 1, light_y + std::max(2, h / 10), Rgb{200, 25, 25});
  fill_rect(s, 0, h - wheel_h - std::max(2, h / 9), w, h - wheel_h, Rgb{30, 30, 32});
  const int plate_w = std::max(4, w / 4);
  fill_rect(s, (w - plate_w) / 2, light_y + 1, (w + plate_w) / 2, light_y + std::max(3, h / 9), Rgb{230, 230, 220});
  const int wheel_w = std::max(3, w / 6);
  fill_rect(s, 2, h - wheel_h, 2 + wheel_w, h, Rgb{15, 15, 15});
  fill_rect(s, w - 2 - wheel_w, h - wheel_h, w - 2, h, Rgb{15, 15, 15});
  if (rng.unit() < 0.5) fill_rect(s, w / 2 - 1, 1, w / 2 + 1, std::max(2, h / 12), Rgb{200, 25, 25});
  return s;
}

RasterRgba draw_person(int w, int h, Rgb shirt, Rgb trousers) {
  RasterRgba s(w, h);
  const double head_r = w * 0.22;
  fill_ellipse(s, w / 2.0, head_r + 0.5, head_r, head_r, Rgb{205, 160, 130});
  fill_rect(s, w / 5, static_cast<int>(2 * head_r), w - w / 5, h * 11 / 20, shirt);
  fill_rect(s, w / 4, h * 11 / 20, w / 2, h, trousers);
  fill_rect(s, w / 2 + 1, h * 11 / 20, w - w / 4, h, trousers);
  return s;
}

RasterRgba draw_two_wheeler(int w, int h, Rgb frame, Rgb rider) {
  RasterRgba s = draw_person(w, h * 2 / 3, rider, Rgb{40, 40, 60});
  RasterRgba out(w, h);
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 4; ++c) out.at(x, y, c) = s.at(x, y, c);
    }
  }
  fill_rect(out, w / 3, h / 2, w - w / 3, h, Rgb{20, 20, 20});
  fill_rect(out, w / 6, h / 2, w - w / 6, h / 2 + std::max(2, h / 12), frame);
  return out;
}

}  // namespace

std::vector<OccluderSprite> make_default_sprites(std::uint64_t seed, int per_class) {
  static const Rgb kBodies[] = {{235, 235, 235}, {180, 182, 188}, {30, 30, 35},  {170, 30, 30},
                                {40, 60, 140},   {220, 190, 40},  {70, 72, 78},  {240, 240, 230}};
  static const Rgb kClothes[] = {{200, 40, 40}, {40, 90, 170}, {230, 230, 230}, {60, 60, 60}, {220, 180, 60}};
  Rng rng(seed);
  auto pick_body = [&] { return kBodies[rng.uniform_int(0, 7)]; };
  auto pick_cloth = [&] { return kClothes[rng.uniform_int(0, 4)]; };
  std::vector<OccluderSprite> out;
  auto add = [&](RasterRgba rgba, int cls, int n) {
    OccluderSprite s;
    s.nominal_base_width = rgba.width();
    s.rgba = std::move(rgba);
    s.class_id = cls;
    s.name = traffic_classes()[static_cast<std::size_t>(cls)] + "_" + std::to_string(n);
    out.push_back(std::move(s));
  };
  for (int n = 0; n < per_class; ++n) {
    const int cw = rng.uniform_int(58, 72);
    add(draw_vehicle(cw, cw * 3 / 4, pick_body(), 0.4, rng), 0, n);
    const int pw = rng.uniform_int(14, 18);
    add(draw_person(pw, pw * 3, pick_cloth(), Rgb{40, 40, 70}), 1, n);
    const int tw = rng.uniform_int(76, 88);
    add(draw_vehicle(tw, tw * 9 / 10, pick_body(), 0.25, rng), 2, n);
    const int bw = rng.uniform_int(84, 96);
    add(draw_vehicle(bw, bw * 19 / 20, Rgb{rng.uniform_int(150, 230), rng.uniform_int(60, 200), 40}, 0.45, rng), 3, n);
    const int mw = rng.uniform_int(18, 22);
    add(draw_two_wheeler(mw, mw * 2, pick_body(), pick_cloth()), 5, n);
    const int bkw = rng.uniform_int(16, 20);
    add(draw_two_wheeler(bkw, bkw * 2, Rgb{60, 160, 60}, pick_cloth()), 6, n);
  }
  return out;
}

void save_sprite_library(const std::vector<OccluderSprite>& sprites, const fs::path& dir,
                         const std::vector<std::string>& class_names) {
  std::map<int, int> counters;
  for (const auto& s : sprites) {
    if (s.class_id < 0 || s.class_id >= static_cast<int>(class_names.size())) {
      throw ValidationError("sprite class id out of range");
    }
    const int n = counters[s.class_id]++;
    save_raster(s.rgba, dir / (class_names[static_cast<std::size_t>(s.class_id)] + "_" + std::to_string(n) + ".png"));
  }
}

}  // namespace occlane
