#include "occlane/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace occlane {

PixelConfusion pixel_confusion(const RasterMask& pred, const RasterMask& gt) {
  if (pred.size() != gt.size()) throw ValidationError("prediction and ground-truth masks differ in size");
  PixelConfusion c;
  const auto p = pred.bytes();
  const auto g = gt.bytes();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pp = p[i] == kPositive;
    const bool gp = g[i] == kPositive;
    if ((!pp && p[i] != 0) || (!gp && g[i] != 0)) throw ValidationError("pixel_confusion requires binary masks");
    if (pp && gp) {
      ++c.tp;
    } else if (pp) {
      ++c.fp;
    } else if (gp) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

PixelScores pixel_scores(const PixelConfusion& c) {
  PixelScores s;
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  if (c.tp + c.fp + c.fn == 0) {
    s.iou = s.dice = s.precision = s.recall = 1.0;
    s.both_empty = true;
    s.precision_defined = s.recall_defined = false;
    return s;
  }
  s.iou = tp / (tp + fp + fn);
  s.dice = 2.0 * tp / (2.0 * tp + fp + fn);
  if (c.tp + c.fp > 0) {
    s.precision = tp / (tp + fp);
  } else {
    s.precision_defined = false;
  }
  if (c.tp + c.fn > 0) {
    s.recall = tp / (tp + fn);
  } else {
    s.recall_defined = false;
  }
  return s;
}

AggregateScores aggregate(std::span<const PixelConfusion> per_frame) {
  if (per_frame.empty()) throw ValidationError("cannot aggregate an empty list of frames");
  AggregateScores a;
  a.frames = static_cast<int>(per_frame.size());
  double iou = 0, dice = 0, prec = 0, rec = 0;
  int n_iou = 0, n_prec = 0, n_rec = 0;
  for (const auto& c : per_frame) {
    a.total += c;
    const PixelScores s = pixel_scores(c);
    if (s.both_empty) {
      ++a.excluded_iou;
    } else {
      iou += s.iou;
      dice += s.dice;
      ++n_iou;
    }
    if (s.precision_defined) {
      prec += s.precision;
      ++n_prec;
    } else {
      ++a.excluded_precision;
    }
    if (s.recall_defined) {
      rec += s.recall;
      ++n_rec;
    } else {
      ++a.excluded_recall;
    }
  }
  if (n_iou > 0) {
    a.macro.iou = iou / n_iou;
    a.macro.dice = dice / n_iou;
  } else {
    a.macro.iou = a.macro.dice = 1.0;
    a.macro.both_empty = true;
  }
  a.macro.precision_defined = n_prec > 0;
  a.macro.recall_defined = n_rec > 0;
  a.macro.precision = n_prec > 0 ? prec / n_prec : (a.macro.both_empty ? 1.0 : 0.0);
  a.macro.recall = n_rec > 0 ? rec / n_rec : (a.macro.both_empty ? 1.0 : 0.0);
  a.micro = pixel_scores(a.total);
  return a;
}

double box_iou(const BBox& a, const BBox& b) {
  const std::int64_t iw = std::max(0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const std::int64_t ih = std::max(0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const std::int64_t inter = iw * ih;
  const std::int64_t uni = a.area() + b.area() - inter;
  if (inter == 0 || uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

CIoUTerms box_ciou(const BBox& pred, const BBox& gt) {
  CIoUTerms t;
  t.iou = box_iou(pred, gt);
  const double pcx = (pred.x_min + pred.x_max) / 2.0;
  const double pcy = (pred.y_min + pred.y_max) / 2.0;
  const double gcx = (gt.x_min + gt.x_max) / 2.0;
  const double gcy = (gt.y_min + gt.y_max) / 2.0;
  t.center_dist_sq = (pcx - gcx) * (pcx - gcx) + (pcy - gcy) * (pcy - gcy);
  const double ew = std::max(pred.x_max, gt.x_max) - std::min(pred.x_min, gt.x_min);
  const double eh = std::max(pred.y_max, gt.y_max) - std::min(pred.y_min, gt.y_min);
  t.enclosing_diag_sq = ew * ew + eh * eh;
  const double d = std::atan(static_cast<double>(gt.width()) / gt.height()) -
                   std::atan(static_cast<double>(pred.width()) / pred.height());
  t.aspect_term = 4.0 / (std::numbers::pi * std::numbers::pi) * d * d;
  t.alpha = t.aspect_term / ((1.0 - t.iou) + t.aspect_term + 1e-9);
  t.ciou = t.iou - t.center_dist_sq / t.enclosing_diag_sq - t.alpha * t.aspect_term;
  return t;
}

std::optional<double> interpolated_ap(std::span<const RankedMatch> ranked, std::size_t num_gt) {
  if (num_gt == 0) {
    if (ranked.empty()) return std::nullopt;
    return 0.0;
  }
  std::vector<double> precision(ranked.size());
  std::vector<double> recall(ranked.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    tp += ranked[i].true_positive ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  // precision envelope: running max from the right
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  std::size_t k = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    while (k < recall.size() && recall[k] < level) ++k;
    if (k < recall.size()) sum += precision[k];
  }
  return sum / 101.0;
}

namespace {

std::vector<std::size_t> rank_by_confidence(std::span<const BBox> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].confidence > preds[b].confidence; });
  return order;
}

// Greedy matching of `order`ed predictions within one image; returns TP flag per ranked prediction.
std::vector<bool> greedy_match(std::span<const BBox> preds, const std::vector<std::size_t>& order,
                               std::span<const BBox> gts, double threshold) {
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> tp(order.size(), false);
  for (std::size_t r = 0; r < order.size(); ++r) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double iou = box_iou(preds[order[r]], gts[g]);
      if (iou >= threshold && iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      used[best_gt] = true;
      tp[r] = true;
    }
  }
  return tp;
}

}  // namespace

std::optional<double> average_precision(std::span<const BBox> preds, std::span<const BBox> gts, double iou_threshold) {
  const auto order = rank_by_confidence(preds);
  const auto tp = greedy_match(preds, order, gts, iou_threshold);
  std::vector<RankedMatch> ranked;
  for (std::size_t r = 0; r < order.size(); ++r) ranked.push_back({preds[order[r]].confidence, tp[r]});
  return interpolated_ap(ranked, gts.size());
}

DetectionEval map50_95(const std::vector<std::vector<BBox>>& preds_per_frame,
                       const std::vector<std::vector<BBox>>& gts_per_frame, const std::vector<std::string>& class_names,
                       double confidence_cutoff) {
  if (preds_per_frame.size() != gts_per_frame.size()) {
    throw ValidationError("prediction and ground-truth frame counts differ");
  }
  DetectionEval eval;
  eval.class_names = class_names;
  std::set<int> classes;
  std::size_t total_gt = 0;
  for (const auto& frame : gts_per_frame) {
    for (const auto& b : frame) classes.insert(b.class_id);
    total_gt += frame.size();
  }
  const std::size_t frames = gts_per_frame.size();

  auto split = [](const std::vector<BBox>& boxes, int cls) {
    std::vector<BBox> out;
    for (const auto& b : boxes) {
      if (b.class_id == cls) out.push_back(b);
    }
    return out;
  };

  double map_sum = 0.0;
  for (int cls : classes) {
    std::array<double, 10> aps{};
    for (std::size_t t = 0; t < kCocoIouThresholds.size(); ++t) {
      // (confidence, frame, rank-in-frame, tp) pooled then re-ranked stably by frame order
      struct Entry {
        double confidence;
        bool tp;
      };
      std::vector<Entry> pooled;
      std::size_t num_gt = 0;
      for (std::size_t f = 0; f < frames; ++f) {
        const auto preds = split(preds_per_frame[f], cls);
        const auto gts = split(gts_per_frame[f], cls);
        num_gt += gts.size();
        const auto order = rank_by_confidence(preds);
        const auto tp = greedy_match(preds, order, gts, kCocoIouThresholds[t]);
        // keep per-frame insertion order for stable global ranking
        std::vector<bool> tp_by_index(preds.size());
        for (std::size_t r = 0; r < order.size(); ++r) tp_by_index[order[r]] = tp[r];
        for (std::size_t i = 0; i < preds.size(); ++i) pooled.push_back({preds[i].confidence, tp_by_index[i]});
      }
      std::stable_sort(pooled.begin(), pooled.end(),
                       [](const Entry& a, const Entry& b) { return a.confidence > b.confidence; });
      std::vector<RankedMatch> ranked;
      for (const auto& e : pooled) ranked.push_back({e.confidence, e.tp});
      aps[t] = interpolated_ap(ranked, num_gt).value_or(0.0);
    }
    eval.ap[cls] = aps;
    map_sum += std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
  }
  eval.map50_95 = classes.empty() ? 0.0 : map_sum / static_cast<double>(classes.size());

  // Operating point: IoU 0.5, confidence >= cutoff, class-aware matching.
  std::size_t tp_total = 0;
  std::size_t pred_total = 0;
  std::set<int> pred_classes;
  for (const auto& frame : preds_per_frame) {
    for (const auto& b : frame) pred_classes.insert(b.class_id);
  }
  std::set<int> all_classes = classes;
  all_classes.insert(pred_classes.begin(), pred_classes.end());
  for (std::size_t f = 0; f < frames; ++f) {
    for (int cls : all_classes) {
      std::vector<BBox> preds;
      for (const auto& b : preds_per_frame[f]) {
        if (b.class_id == cls && b.confidence >= confidence_cutoff) preds.push_back(b);
      }
      const auto gts = split(gts_per_frame[f], cls);
      pred_total += preds.size();
      const auto tp = greedy_match(preds, rank_by_confidence(preds), gts, 0.5);
      tp_total += static_cast<std::size_t>(std::count(tp.begin(), tp.end(), true));
    }
  }
  eval.precision = pred_total > 0 ? static_cast<double>(tp_total) / static_cast<double>(pred_total) : 0.0;
  eval.recall = total_gt > 0 ? static_cast<double>(tp_total) / static_cast<double>(total_gt) : 0.0;
  return eval;
}

FidelityScores inpaint_fidelity(const RasterImage& inpainted, const RasterImage& clear, const RasterMask& hole) {
  if (inpainted.size() != clear.size() || hole.size() != clear.size()) {
    throw ValidationError("inpaint_fidelity: size mismatch");
  }
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < hole.height(); ++y) {
    for (int x = 0; x < hole.width(); ++x) {
      if (hole.at(x, y) != kPositive) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(inpainted.at(x, y, c)) - clear.at(x, y, c);
        abs_sum += std::abs(d);
        sq_sum += d * d;
        ++n;
      }
    }
  }
  if (n == 0) throw ValidationError("inpaint_fidelity: hole is empty");
  FidelityScores s;
  s.l1_masked = abs_sum / static_cast<double>(n);
  const double mse = sq_sum / static_cast<double>(n);
  s.psnr_masked = mse == 0.0 ? kPsnrCap : 10.0 * std::log10(255.0 * 255.0 / mse);
  return s;
}

}  // namespace occlane
