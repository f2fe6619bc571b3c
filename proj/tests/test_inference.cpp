// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cvtassd/errors.hpp"
#include "cvtassd/inference.hpp"
#include "oracles.hpp"

using namespace cvtassd;
using oracle::random_tensor;

TEST(Nms, SmallCases) {
  const std::vector<BoxCorner> one = {{0.1f, 0.1f, 0.4f, 0.4f}};
  const std::vector<float> s1 = {0.3f};
  EXPECT_EQ(nms(one, s1), (std::vector<size_t>{0}));

  const std::vector<BoxCorner> twin = {one[0], one[0]};
  const std::vector<float> s2 = {0.8f, 0.9f};
  EXPECT_EQ(nms(twin, s2), (std::vector<size_t>{1}));

  // Equal scores: the lower index wins.
  const std::vector<float> tie = {0.5f, 0.5f};
  EXPECT_EQ(nms(twin, tie), (std::vector<size_t>{0}));

  // IoU exactly at the threshold is kept.
  const std::vector<BoxCorner> half = {{0, 0, 0.5f, 0.5f}, {0, 0, 0.5f, 0.25f}};
  ASSERT_DOUBLE_EQ(iou(half[0], half[1]), 0.5);
  EXPECT_EQ(nms(half, std::vector<float>{0.9f, 0.1f}, 0.5).size(), 2u);

  EXPECT_TRUE(nms({}, {}).empty());
  EXPECT_THROW(nms(one, s2), DimensionError);
}

TEST(Nms, MatchesBruteForce) {
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 r(seed);
    std::uniform_int_distribution<int> count(1, 10), coarse(0, 4);
    std::uniform_real_distribution<double> th(0.2, 0.8);
    const int n = count(r);
    std::vector<BoxCorner> boxes;
    std::vector<float> scores;
    for (int i = 0; i < n; ++i) {
      boxes.push_back(oracle::random_box(r, 0.2f));
      // Coarse scores produce ties.
      scores.push_back(static_cast<float>(coarse(r)) / 4.0f);
    }
    const double t = th(r);
    const auto kept = nms(boxes, scores, t);
    ASSERT_EQ(kept, oracle::nms_brute(boxes, scores, t)) << "seed " << seed;
    for (size_t i = 0; i < kept.size(); ++i)
      for (size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(iou(boxes[kept[i]], boxes[kept[j]]), t);
  }
}

TEST(Decode, BackgroundOnlyGivesNothing) {
  AnchorSet anchors;
  anchors.boxes = {{0.5f, 0.5f, 0.2f, 0.2f}, {0.3f, 0.3f, 0.1f, 0.1f}};
  anchors.level_counts = {2};
  const Tensor loc = Tensor::zeros({1, 2, 4});
  Tensor conf = Tensor::zeros({1, 2, 4});
  conf.data()[0] = conf.data()[4] = 20.0f;
  EXPECT_TRUE(decode_detections(loc, conf, anchors, {}, {}).front().empty());
}

TEST(Decode, IdentityOffsetsReturnAnchor) {
  AnchorSet anchors;
  anchors.boxes = {{0.5f, 0.5f, 0.2f, 0.2f}, {0.3f, 0.3f, 0.1f, 0.1f}};
  anchors.level_counts = {2};
  const Tensor loc = Tensor::zeros({1, 2, 4});
  Tensor conf = Tensor::zeros({1, 2, 5});
  conf.data()[0] = 20.0f;               // anchor 0 background
  conf.data()[5 + 4] = 20.0f;           // anchor 1, foreground class 3
  const auto dets = decode_detections(loc, conf, anchors, {}, {}).front();
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].class_id, 3);
  EXPECT_GT(dets[0].score, 0.99f);
  EXPECT_EQ(dets[0].box, to_corner(anchors.boxes[1]));
  EXPECT_THROW(decode_detections(loc, Tensor::zeros({1, 3, 5}), anchors, {}, {}), DimensionError);
}

TEST(Decode, MatchesStraightLineReference) {
  std::mt19937_64 r(77);
  InferenceConfig cfg;
  cfg.conf_threshold = 0.05f;
  cfg.top_k_per_class = 6;
  cfg.top_k = 10;
  const Variances var;
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t a = 50, c = 4;
    AnchorSet anchors;
    for (int64_t j = 0; j < a; ++j) anchors.boxes.push_back(to_center(oracle::random_box(r, 0.1f)));
    anchors.level_counts = {a};
    const Tensor loc = random_tensor({1, a, 4}, r, -0.5f, 0.5f);
    const Tensor conf = random_tensor({1, a, c}, r, -2.0f, 2.0f);
    const auto got = decode_detections(loc, conf, anchors, cfg, var).front();

    struct Ref {
      Detection d;
      int64_t anchor;
    };
    std::vector<Ref> all;
    for (int64_t k = 1; k < c; ++k) {
      std::vector<BoxCorner> boxes;
      std::vector<float> scores;
      std::vector<int64_t> ids;
      for (int64_t j = 0; j < a; ++j) {
        double z = 0;
        for (int64_t q = 0; q < c; ++q) z += std::exp(double(conf.at({0, j, q})));
        const float p = static_cast<float>(std::exp(double(conf.at({0, j, k}))) / z);
        if (p < cfg.conf_threshold) continue;
        const std::array<float, 4> off = {loc.at({0, j, 0}), loc.at({0, j, 1}), loc.at({0, j, 2}), loc.at({0, j, 3})};
        boxes.push_back(decode(off, anchors.boxes[static_cast<size_t>(j)], var));
        scores.push_back(p);
        ids.push_back(j);
      }
      auto kept = oracle::nms_brute(boxes, scores, cfg.nms_threshold);
      kept.resize(std::min<size_t>(kept.size(), static_cast<size_t>(cfg.top_k_per_class)));
      for (size_t q : kept) all.push_back({{boxes[q], static_cast<int>(k - 1), scores[q]}, ids[q]});
    }
    std::sort(all.begin(), all.end(), [](const Ref& x, const Ref& y) {
      if (x.d.score != y.d.score) return x.d.score > y.d.score;
      if (x.d.class_id != y.d.class_id) return x.d.class_id < y.d.class_id;
      return x.anchor < y.anchor;
    });
    all.resize(std::min<size_t>(all.size(), static_cast<size_t>(cfg.top_k)));
    ASSERT_EQ(got.size(), all.size()) << trial;
    for (size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].class_id, all[i].d.class_id);
      EXPECT_NEAR(got[i].score, all[i].d.score, 1e-6);
      EXPECT_EQ(got[i].box, all[i].d.box);
      EXPECT_GE(got[i].box.xmin, 0.0f);
      EXPECT_LE(got[i].box.xmax, 1.0f);
    }
  }
}

TEST(Detect, DeterministicAndBatchIndependent) {
  const Detector det(tiny_preset().model);
  const AnchorSet anchors = generate_anchors(anchor_config(det.config()));
  std::mt19937_64 r(5);
  const Tensor img = random_tensor({1, 3, 96, 96}, r, 0, 1);
  const auto a = detect(det, anchors, img, {}).front();
  const auto b = detect(det, anchors, img, {}).front();
  std::vector<Tensor> two = {img, img};
  const auto pair = detect(det, anchors, concat(two, 0), {});
  auto same = [](const std::vector<Detection>& x, const std::vector<Detection>& y) {
    if (x.size() != y.size()) return false;
    for (size_t i = 0; i < x.size(); ++i)
      if (x[i].box != y[i].box || x[i].class_id != y[i].class_id || x[i].score != y[i].score) return false;
    return true;
  };
  EXPECT_TRUE(same(a, b));
  EXPECT_TRUE(same(pair[0], pair[1]));
  EXPECT_LE(a.size(), 200u);
  const auto z1 = detect(det, anchors, Tensor::zeros({1, 3, 96, 96}), {}).front();
  const auto z2 = detect(det, anchors, Tensor::zeros({1, 3, 96, 96}), {}).front();
  EXPECT_TRUE(same(z1, z2));
  for (const auto& d : a) EXPECT_GE(d.score, 0.01f);
}

TEST(Detect, ResizesArbitraryImages) {
  const Detector det(tiny_preset().model);
  const AnchorSet anchors = generate_anchors(anchor_config(det.config()));
  std::mt19937_64 r(6);
  const auto d = detect_image(det, anchors, random_tensor({3, 50, 70}, r, 0, 1), {});
  for (const auto& x : d) {
    EXPECT_GE(x.box.xmin, 0.0f);
    EXPECT_LE(x.box.ymax, 1.0f);
  }
}

TEST(Dump, RoundTripAndMalformed) {
  std::vector<ImageDetections> dets = {
      {"img_a", {{{0.1f, 0.2f, 0.3f, 0.4f}, 2, 0.75f}, {{0, 0, 1, 1}, 0, 0.015f}}},
      {"img_b", {{{0.5f, 0.5f, 0.6f, 0.9f}, 19, 1.0f}}}};
  std::stringstream ss;
  write_detection_dump(ss, dets);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "img_a 2 0.750000 0.100000 0.200000 0.300000 0.400000");
  const auto back = read_detection_dump(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].image_id, "img_a");
  ASSERT_EQ(back[0].detections.size(), 2u);
  EXPECT_EQ(back[1].detections[0].class_id, 19);
  EXPECT_NEAR(back[0].detections[0].box.ymax, 0.4f, 1e-6);
  std::istringstream bad("img 1 0.5 0.1\n");
  EXPECT_THROW(read_detection_dump(bad), ParseError);
}
