// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "cvtassd/errors.hpp"

namespace cvtassd {

double average_precision(std::span<const double> recall, std::span<const double> precision,
                         Interpolation mode) {
  if (recall.size() != precision.size()) throw DimensionError("average_precision: length mismatch");
  if (mode == Interpolation::ElevenPoint) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double thr = t / 10.0;
      double p = 0.0;
      for (size_t i = 0; i < recall.size(); ++i) {
        if (recall[i] >= thr) p = std::max(p, precision[i]);
      }
      ap += p / 11.0;
    }
    return ap;
  }
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (size_t i = 0; i + 1 < mrec.size(); ++i) {
    if (mrec[i + 1] != mrec[i]) ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
  }
  return ap;
}

namespace {

double pixel_area(const BoxCorner& b, const EvalImage& img) {
  return double(b.xmax - b.xmin) * img.width * double(b.ymax - b.ymin) * img.height;
}

bool in_range(double a, const AreaRange& r) { return a >= r.lo && a <= r.hi; }

}  // namespace

std::optional<double> class_ap(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                               int class_id, double iou_threshold, const AreaRange& area,
                               Interpolation mode) {
  std::map<std::string, size_t> image_index;
  for (size_t i = 0; i < gts.size(); ++i) image_index.emplace(gts[i].image_id, i);

  // Per image: the GTs of this class and whether each is ignored.
  std::vector<std::vector<const GroundTruthBox*>> boxes(gts.size());
  std::vector<std::vector<uint8_t>> ignored(gts.size()), used(gts.size());
  int64_t npos = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    for (const auto& g : gts[i].gts) {
      if (g.label != class_id) continue;
      const bool ign = g.difficult || !in_range(pixel_area(g.box, gts[i]), area);
      boxes[i].push_back(&g);
      ignored[i].push_back(ign ? 1 : 0);
      used[i].push_back(0);
      if (!ign) ++npos;
    }
  }
  if (npos == 0) return std::nullopt;

  struct Entry {
    float score;
    size_t image;
    const Detection* det;
  };
  std::vector<Entry> entries;
  for (const auto& img : dets) {
    const auto it = image_index.find(img.image_id);
    if (it == image_index.end()) continue;
    for (const auto& d : img.detections) {
      if (d.class_id == class_id) entries.push_back({d.score, it->second, &d});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.score > b.score; });

  std::vector<double> recall, precision;
  int64_t tp = 0, fp = 0;
  for (const auto& e : entries) {
    const auto& bx = boxes[e.image];
    // Best unmatched non-ignored GT first, then ignored GTs.
    double best = -1.0;
    int best_idx = -1;
    for (size_t g = 0; g < bx.size(); ++g) {
      if (ignored[e.image][g] || used[e.image][g]) continue;
      const double o = iou(e.det->box, bx[g]->box);
      if (o >= iou_threshold && o > best) {
        best = o;
        best_idx = static_cast<int>(g);
      }
    }
    if (best_idx >= 0) {
      used[e.image][static_cast<size_t>(best_idx)] = 1;
      ++tp;
    } else {
      bool hits_ignored = false;
      for (size_t g = 0; g < bx.size() && !hits_ignored; ++g) {
        if (ignored[e.image][g] && iou(e.det->box, bx[g]->box) >= iou_threshold) hits_ignored = true;
      }
      if (hits_ignored) continue;
      if (!in_range(pixel_area(e.det->box, gts[e.image]), area)) continue;
      ++fp;
    }
    recall.push_back(double(tp) / double(npos));
    precision.push_back(double(tp) / double(tp + fp));
  }
  return average_precision(recall, precision, mode);
}

namespace {

double mean_defined(const std::vector<std::optional<double>>& v, bool& any) {
  double s = 0.0;
  int n = 0;
  for (const auto& x : v) {
    if (x) {
      s += *x;
      ++n;
    }
  }
  any = n > 0;
  return n ? s / n : 0.0;
}

std::optional<double> map_at(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                             int num_classes, double thr, const AreaRange& area) {
  std::vector<std::optional<double>> aps;
  for (int c = 0; c < num_classes; ++c) aps.push_back(class_ap(dets, gts, c, thr, area));
  bool any = false;
  const double m = mean_defined(aps, any);
  return any ? std::optional<double>(m) : std::nullopt;
}

double coco_threshold(int i) { return (50 + 5 * i) / 100.0; }

std::optional<double> averaged(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                               int num_classes, const AreaRange& area) {
  double s = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto m = map_at(dets, gts, num_classes, coco_threshold(i), area);
    if (!m) return std::nullopt;
    s += *m;
  }
  return s / 10.0;
}

}  // namespace

EvalReport voc_ap(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                  int num_classes, double iou_threshold, Interpolation mode) {
  EvalReport r;
  for (int c = 0; c < num_classes; ++c) {
    r.per_class_ap.push_back(class_ap(dets, gts, c, iou_threshold, {}, mode));
  }
  bool any = false;
  r.map = mean_defined(r.per_class_ap, any);
  return r;
}

EvalReport coco_ap(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                   int num_classes) {
  EvalReport r;
  r.coco = true;
  for (int c = 0; c < num_classes; ++c) {
    double s = 0.0;
    bool defined = true;
    for (int i = 0; i < 10 && defined; ++i) {
      const auto ap = class_ap(dets, gts, c, coco_threshold(i));
      if (!ap) defined = false; else s += *ap;
    }
    r.per_class_ap.push_back(defined ? std::optional<double>(s / 10.0) : std::nullopt);
  }
  bool any = false;
  r.map = mean_defined(r.per_class_ap, any);
  r.ap_50_95 = averaged(dets, gts, num_classes, {});
  r.ap_50 = map_at(dets, gts, num_classes, 0.5, {});
  r.ap_75 = map_at(dets, gts, num_classes, 0.75, {});
  r.ap_small = averaged(dets, gts, num_classes, {0.0, 32.0 * 32.0 - 1e-9});
  r.ap_medium = averaged(dets, gts, num_classes, {32.0 * 32.0, 96.0 * 96.0});
  r.ap_large = averaged(dets, gts, num_classes, {96.0 * 96.0 + 1e-9, 1e300});
  return r;
}

namespace {

std::string pct(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v * 100.0);
  return buf;
}

std::string class_label(std::span<const std::string> names, size_t c) {
  return c < names.size() ? names[c] : "class" + std::to_string(c);
}

std::vector<std::pair<std::string, std::optional<double>>> rows(const EvalReport& r,
                                                                std::span<const std::string> names) {
  std::vector<std::pair<std::string, std::optional<double>>> out;
  for (size_t c = 0; c < r.per_class_ap.size(); ++c) out.emplace_back(class_label(names, c), r.per_class_ap[c]);
  out.emplace_back("mAP", r.map);
  if (r.coco) {
    out.emplace_back("AP@[.5:.95]", r.ap_50_95);
    out.emplace_back("AP@.5", r.ap_50);
    out.emplace_back("AP@.75", r.ap_75);
    out.emplace_back("AP_small", r.ap_small);
    out.emplace_back("AP_medium", r.ap_medium);
    out.emplace_back("AP_large", r.ap_large);
  }
  return out;
}

}  // namespace

std::string format_report_table(const EvalReport& r, std::span<const std::string> names) {
  const auto rs = rows(r, names);
  size_t width = 5;
  for (const auto& [k, _] : rs) width = std::max(width, k.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %6s\n", static_cast<int>(width), "class", "AP");
  out << buf;
  for (const auto& [k, v] : rs) {
    std::snprintf(buf, sizeof buf, "%-*s  %6s\n", static_cast<int>(width), k.c_str(), pct(v).c_str());
    out << buf;
  }
  return out.str();
}

std::string format_report_kv(const EvalReport& r, std::span<const std::string> names) {
  std::ostringstream out;
  for (const auto& [k, v] : rows(r, names)) out << k << '=' << pct(v) << '\n';
  return out.str();
}

}  // namespace cvtassd
