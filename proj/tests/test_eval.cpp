// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cvtassd/eval.hpp"
#include "oracles.hpp"

using namespace cvtassd;

namespace {

EvalImage image(std::string id, std::vector<GroundTruthBox> gts, int w = 100, int h = 100) {
  return {std::move(id), w, h, std::move(gts)};
}

// Shifts a box right so that its IoU with the original equals `target`
// (for equal-size boxes IoU = (1 - s) / (1 + s) with s the shift fraction).
BoxCorner shifted(const BoxCorner& b, double target) {
  const double s = (1 - target) / (1 + target);
  const float dx = static_cast<float>(s * (b.xmax - b.xmin));
  return {b.xmin + dx, b.ymin, b.xmax + dx, b.ymax};
}

// Independent AP: at each recall level k/npos, the best precision reached at
// any recall >= k/npos, averaged over the npos levels.
double oracle_ap(const std::vector<bool>& tp_sorted, int npos) {
  std::vector<double> rec, prec;
  int tp = 0;
  for (size_t i = 0; i < tp_sorted.size(); ++i) {
    tp += tp_sorted[i];
    rec.push_back(double(tp) / npos);
    prec.push_back(double(tp) / double(i + 1));
  }
  double ap = 0;
  for (int k = 1; k <= npos; ++k) {
    double best = 0;
    for (size_t i = 0; i < rec.size(); ++i)
      if (rec[i] >= double(k) / npos - 1e-12) best = std::max(best, prec[i]);
    ap += best / npos;
  }
  return ap;
}

}  // namespace

TEST(VocAp, FiveSixthsFixture) {
  const BoxCorner g1{0.1f, 0.1f, 0.3f, 0.3f}, g2{0.6f, 0.6f, 0.9f, 0.9f};
  const std::vector<EvalImage> gts = {image("a", {{g1, 0, false}, {g2, 0, false}})};
  const std::vector<ImageDetections> dets = {
      {"a", {{g1, 0, 0.9f}, {{0.4f, 0.0f, 0.5f, 0.1f}, 0, 0.8f}, {g2, 0, 0.7f}}}};
  const EvalReport r = voc_ap(dets, gts, 1);
  ASSERT_TRUE(r.per_class_ap[0].has_value());
  EXPECT_NEAR(*r.per_class_ap[0], 5.0 / 6.0, 1e-9);
  EXPECT_NEAR(r.map, 5.0 / 6.0, 1e-9);
}

TEST(CocoAp, PointThreeFixture) {
  // Dyadic coordinates: intersection 3/16, union 5/16, IoU exactly 0.6.
  const BoxCorner g{0.0f, 0.0f, 0.5f, 0.5f};
  const BoxCorner d{0.125f, 0.0f, 0.625f, 0.5f};
  ASSERT_EQ(iou(g, d), 0.6);
  const std::vector<EvalImage> gts = {image("a", {{g, 0, false}})};
  const std::vector<ImageDetections> dets = {{"a", {{d, 0, 0.9f}}}};
  const EvalReport r = coco_ap(dets, gts, 1);
  EXPECT_NEAR(*r.ap_50_95, 0.3, 1e-9);
  EXPECT_NEAR(*r.per_class_ap[0], 0.3, 1e-9);
  EXPECT_NEAR(*r.ap_50, 1.0, 1e-9);
  EXPECT_NEAR(*r.ap_75, 0.0, 1e-9);
}

TEST(VocAp, TrivialCases) {
  const BoxCorner g{0.1f, 0.1f, 0.5f, 0.5f};
  const std::vector<EvalImage> gts = {image("a", {{g, 1, false}})};
  EXPECT_NEAR(*voc_ap(std::vector<ImageDetections>{{"a", {{g, 1, 1.0f}}}}, gts, 3).per_class_ap[1], 1.0, 1e-12);

  // Wrong class: the GT class scores 0; the predicted class has no GT and
  // stays undefined, so mAP covers the GT class only.
  const EvalReport wrong = voc_ap(std::vector<ImageDetections>{{"a", {{g, 2, 1.0f}}}}, gts, 3);
  EXPECT_NEAR(*wrong.per_class_ap[1], 0.0, 1e-12);
  EXPECT_FALSE(wrong.per_class_ap[2].has_value());
  EXPECT_FALSE(wrong.per_class_ap[0].has_value());
  EXPECT_NEAR(wrong.map, 0.0, 1e-12);

  const EvalReport empty = coco_ap({}, gts, 3);
  EXPECT_NEAR(*empty.per_class_ap[1], 0.0, 1e-12);
  EXPECT_NEAR(*empty.ap_50_95, 0.0, 1e-12);
  EXPECT_NEAR(*empty.ap_50, 0.0, 1e-12);
}

TEST(CocoAp, PerfectDetector) {
  std::mt19937_64 r(3);
  std::vector<EvalImage> gts;
  std::vector<ImageDetections> dets;
  for (int i = 0; i < 5; ++i) {
    EvalImage im = image("im" + std::to_string(i), {}, 200, 200);
    ImageDetections d{im.image_id, {}};
    for (int k = 0; k < 3; ++k) {
      const BoxCorner b = oracle::random_box(r, 0.05f);
      im.gts.push_back({b, k % 2, false});
      d.detections.push_back({b, k % 2, 1.0f});
    }
    gts.push_back(im);
    dets.push_back(d);
  }
  const EvalReport rep = coco_ap(dets, gts, 2);
  EXPECT_NEAR(*rep.ap_50_95, 1.0, 1e-12);
  for (int i = 0; i < 10; ++i) {
    const double t = (50 + 5 * i) / 100.0;
    EXPECT_NEAR(*class_ap(dets, gts, 0, t), 1.0, 1e-12) << t;
  }
}

TEST(CocoAp, SizeBucketsUseNativePixels) {
  // 20x20 px box in a 100x100 image is small; 50x50 px is medium; 100x100 px large.
  const BoxCorner small{0.0f, 0.0f, 0.2f, 0.2f}, medium{0.5f, 0.5f, 1.0f, 1.0f};
  const std::vector<EvalImage> gts = {image("a", {{small, 0, false}, {medium, 0, false}}),
                                      image("b", {{{0, 0, 1, 1}, 0, false}})};
  const std::vector<ImageDetections> dets = {{"a", {{small, 0, 0.9f}}}, {"b", {{{0, 0, 1, 1}, 0, 0.8f}}}};
  const EvalReport r = coco_ap(dets, gts, 1);
  EXPECT_NEAR(*r.ap_small, 1.0, 1e-12);
  EXPECT_NEAR(*r.ap_medium, 0.0, 1e-12);
  EXPECT_NEAR(*r.ap_large, 1.0, 1e-12);
}

TEST(VocAp, DifficultIgnored) {
  const BoxCorner g{0.1f, 0.1f, 0.5f, 0.5f}, h{0.6f, 0.6f, 0.9f, 0.9f};
  const std::vector<EvalImage> gts = {image("a", {{g, 0, false}, {h, 0, true}})};
  // Detecting the difficult box is neither TP nor FP.
  const std::vector<ImageDetections> dets = {{"a", {{h, 0, 0.95f}, {g, 0, 0.5f}}}};
  EXPECT_NEAR(*voc_ap(dets, gts, 1).per_class_ap[0], 1.0, 1e-12);
  const std::vector<EvalImage> only_difficult = {image("a", {{h, 0, true}})};
  EXPECT_FALSE(voc_ap(dets, only_difficult, 1).per_class_ap[0].has_value());
}

TEST(VocAp, MonotoneScoreInvarianceAndLowFalsePositive) {
  std::mt19937_64 r(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalImage> gts;
    std::vector<ImageDetections> dets;
    std::uniform_real_distribution<float> sc(0.05f, 1.0f);
    for (int i = 0; i < 3; ++i) {
      EvalImage im = image("i" + std::to_string(i), {});
      ImageDetections d{im.image_id, {}};
      for (int k = 0; k < 2; ++k) {
        const BoxCorner b = oracle::random_box(r, 0.1f);
        im.gts.push_back({b, k, false});
        d.detections.push_back({shifted(b, 0.3 + 0.7 * sc(r)), k, sc(r)});
        d.detections.push_back({oracle::random_box(r, 0.1f), k, sc(r)});
      }
      gts.push_back(im);
      dets.push_back(d);
    }
    const EvalReport base = voc_ap(dets, gts, 2);
    auto warped = dets;
    for (auto& im : warped)
      for (auto& d : im.detections) d.score = std::pow(d.score, 3.0f) * 0.5f;
    const EvalReport w = voc_ap(warped, gts, 2);
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(*base.per_class_ap[static_cast<size_t>(c)], *w.per_class_ap[static_cast<size_t>(c)], 1e-12);

    auto more = dets;
    more[0].detections.push_back({{0.99f, 0.99f, 1.0f, 1.0f}, 0, 0.001f});
    EXPECT_LE(*voc_ap(more, gts, 2).per_class_ap[0], *base.per_class_ap[0] + 1e-12);

    // The 0.5 slice of the COCO computation is the VOC number.
    EXPECT_NEAR(*coco_ap(dets, gts, 2).ap_50, base.map, 1e-12);
  }
}

TEST(VocAp, AgreesWithExhaustiveOracle) {
  std::mt19937_64 r(21);
  std::uniform_int_distribution<int> ng(1, 3), nd(0, 5);
  std::uniform_real_distribution<float> sc(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    EvalImage im = image("x", {});
    const int g = ng(r);
    for (int i = 0; i < g; ++i) im.gts.push_back({oracle::random_box(r, 0.2f), 0, false});
    ImageDetections d{"x", {}};
    const int n = nd(r);
    for (int i = 0; i < n; ++i) {
      const BoxCorner base = im.gts[static_cast<size_t>(i) % im.gts.size()].box;
      const BoxCorner b = (i % 3 == 2) ? oracle::random_box(r, 0.1f) : shifted(base, 0.2 + 0.8 * sc(r));
      d.detections.push_back({b, 0, sc(r)});
    }
    // Oracle: walk detections by score, each taking the best still-free GT
    // at IoU >= 0.5.
    std::vector<size_t> order(d.detections.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return d.detections[a].score > d.detections[b].score; });
    std::vector<bool> taken(im.gts.size(), false), tp;
    for (size_t i : order) {
      int best = -1;
      double bo = 0;
      for (size_t k = 0; k < im.gts.size(); ++k) {
        const double o = iou(d.detections[i].box, im.gts[k].box);
        if (!taken[k] && o >= 0.5 && o > bo) {
          bo = o;
          best = static_cast<int>(k);
        }
      }
      if (best >= 0) taken[static_cast<size_t>(best)] = true;
      tp.push_back(best >= 0);
    }
    const std::vector<EvalImage> gts = {im};
    const std::vector<ImageDetections> dets = {d};
    EXPECT_NEAR(*voc_ap(dets, gts, 1).per_class_ap[0], oracle_ap(tp, g), 1e-12) << trial;
  }
}

TEST(AveragePrecision, ElevenPoint) {
  // Recall 0.5 at precision 1, recall 1.0 at precision 2/3.
  const std::vector<double> rec = {0.5, 0.5, 1.0}, prec = {1.0, 0.5, 2.0 / 3.0};
  EXPECT_NEAR(average_precision(rec, prec, Interpolation::AllPoint), 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(average_precision(rec, prec, Interpolation::ElevenPoint), (6 * 1.0 + 5 * 2.0 / 3.0) / 11.0, 1e-12);
  EXPECT_NEAR(average_precision({}, {}, Interpolation::ElevenPoint), 0.0, 1e-12);
}

TEST(Report, KeyValueFormat) {
  EvalReport r;
  r.per_class_ap = {0.8333333, std::nullopt};
  r.map = 0.8333333;
  const std::vector<std::string> names = {"circle", "square"};
  EXPECT_EQ(format_report_kv(r, names), "circle=83.3\nsquare=nan\nmAP=83.3\n");
  const std::string table = format_report_table(r, names);
  EXPECT_NE(table.find("circle"), std::string::npos);
  EXPECT_NE(table.find("83.3"), std::string::npos);
}
