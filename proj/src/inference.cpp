// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cvtassd/data.hpp"
#include "cvtassd/errors.hpp"

namespace cvtassd {

std::vector<size_t> nms(std::span<const BoxCorner> boxes, std::span<const float> scores,
                        double iou_threshold) {
  if (boxes.size() != scores.size()) throw DimensionError("nms: boxes and scores differ in length");
  std::vector<size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<uint8_t> removed(boxes.size(), 0);
  std::vector<size_t> keep;
  for (size_t i = 0; i < order.size(); ++i) {
    const size_t cur = order[i];
    if (removed[cur]) continue;
    keep.push_back(cur);
    for (size_t j = i + 1; j < order.size(); ++j) {
      const size_t other = order[j];
      if (!removed[other] && iou(boxes[cur], boxes[other]) > iou_threshold) removed[other] = 1;
    }
  }
  return keep;
}

std::vector<std::vector<Detection>> decode_detections(const Tensor& loc, const Tensor& conf,
                                                      const AnchorSet& anchors,
                                                      const InferenceConfig& cfg,
                                                      const Variances& variances) {
  if (loc.rank() != 3 || conf.rank() != 3 || loc.dim(2) != 4 || loc.dim(0) != conf.dim(0) ||
      loc.dim(1) != conf.dim(1) || loc.dim(1) != static_cast<int64_t>(anchors.size())) {
    throw DimensionError("decode_detections: loc " + shape_str(loc.shape()) + ", conf " +
                         shape_str(conf.shape()) + " and " + std::to_string(anchors.size()) +
                         " anchors disagree");
  }
  const int64_t n = loc.dim(0), a = loc.dim(1), c = conf.dim(2);
  auto ld = loc.data();
  auto cd = conf.data();
  std::vector<std::vector<Detection>> out(static_cast<size_t>(n));
  std::vector<float> probs(static_cast<size_t>(a * c));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < a; ++j) {
      const float* row = cd.data() + (i * a + j) * c;
      const float mx = *std::max_element(row, row + c);
      double z = 0.0;
      for (int64_t k = 0; k < c; ++k) z += std::exp(double(row[k]) - mx);
      for (int64_t k = 0; k < c; ++k) {
        probs[static_cast<size_t>(j * c + k)] = static_cast<float>(std::exp(double(row[k]) - mx) / z);
      }
    }
    struct Candidate {
      Detection det;
      int64_t anchor;
    };
    std::vector<Candidate> all;
    for (int64_t k = 1; k < c; ++k) {
      std::vector<BoxCorner> boxes;
      std::vector<float> scores;
      std::vector<int64_t> idx;
      for (int64_t j = 0; j < a; ++j) {
        const float p = probs[static_cast<size_t>(j * c + k)];
        if (p < cfg.conf_threshold) continue;
        const std::span<const float, 4> off(ld.data() + (i * a + j) * 4, 4);
        boxes.push_back(decode(off, anchors.boxes[static_cast<size_t>(j)], variances));
        scores.push_back(p);
        idx.push_back(j);
      }
      auto keep = nms(boxes, scores, cfg.nms_threshold);
      if (keep.size() > static_cast<size_t>(cfg.top_k_per_class)) keep.resize(static_cast<size_t>(cfg.top_k_per_class));
      for (size_t q : keep) all.push_back({{boxes[q], static_cast<int>(k - 1), scores[q]}, idx[q]});
    }
    std::stable_sort(all.begin(), all.end(), [](const Candidate& x, const Candidate& y) {
      if (x.det.score != y.det.score) return x.det.score > y.det.score;
      if (x.det.class_id != y.det.class_id) return x.det.class_id < y.det.class_id;
      return x.anchor < y.anchor;
    });
    if (all.size() > static_cast<size_t>(cfg.top_k)) all.resize(static_cast<size_t>(cfg.top_k));
    for (const auto& cand : all) out[static_cast<size_t>(i)].push_back(cand.det);
  }
  return out;
}

std::vector<std::vector<Detection>> detect(const Detector& model, const AnchorSet& anchors,
                                           const Tensor& images, const InferenceConfig& cfg) {
  NoGradGuard guard;
  const HeadOutput h = model.forward(images, false);
  const ModelConfig& mc = model.config();
  return decode_detections(h.loc, h.conf, anchors, cfg, {mc.variance_center, mc.variance_size});
}

std::vector<Detection> detect_image(const Detector& model, const AnchorSet& anchors,
                                    const Tensor& image, const InferenceConfig& cfg) {
  const int r = model.config().input_size;
  Tensor x = image;
  if (x.dim(1) != r || x.dim(2) != r) x = resize_bilinear(x, r, r);
  x = reshape(x, {1, 3, r, r});
  return detect(model, anchors, x, cfg).front();
}

void write_detection_dump(std::ostream& out, std::span<const ImageDetections> dets) {
  char buf[256];
  for (const auto& img : dets) {
    for (const auto& d : img.detections) {
      std::snprintf(buf, sizeof buf, " %d %.6f %.6f %.6f %.6f %.6f\n", d.class_id, d.score, d.box.xmin,
                    d.box.ymin, d.box.xmax, d.box.ymax);
      out << img.image_id << buf;
    }
  }
}

std::vector<ImageDetections> read_detection_dump(std::istream& in) {
  std::vector<ImageDetections> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    Detection d;
    if (!(ls >> id >> d.class_id >> d.score >> d.box.xmin >> d.box.ymin >> d.box.xmax >> d.box.ymax)) {
      throw ParseError("detection dump line " + std::to_string(lineno) +
                       ": expected 'image_id class_id score xmin ymin xmax ymax'");
    }
    if (out.empty() || out.back().image_id != id) out.push_back({id, {}});
    out.back().detections.push_back(d);
  }
  return out;
}

}  // namespace cvtassd
