// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cvtassd/data.hpp"
#include "cvtassd/errors.hpp"
#include "oracles.hpp"

using namespace cvtassd;
namespace fs = std::filesystem;

namespace {

fs::path fixture(const std::string& name) { return fs::path(CVTASSD_SOURCE_DIR) / "tests" / "fixtures" / name; }

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cvtassd_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_pixels(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (size_t i = 0; i < a.data().size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

void expect_valid(const Sample& s) {
  for (const auto& g : s.gts) {
    EXPECT_GT(g.box.area(), 0.0f);
    EXPECT_GE(g.box.xmin, 0.0f);
    EXPECT_GE(g.box.ymin, 0.0f);
    EXPECT_LE(g.box.xmax, 1.0f);
    EXPECT_LE(g.box.ymax, 1.0f);
  }
}

}  // namespace

TEST(Synth, DeterministicAndContract) {
  const auto a = synth_dataset(32, 3, 96, 7);
  const auto b = synth_dataset(32, 3, 96, 7);
  const auto c = synth_dataset(32, 3, 96, 8);
  ASSERT_EQ(a.size(), 32u);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(encode_ppm(a[i].image), encode_ppm(b[i].image));
    EXPECT_TRUE(same_pixels(a[i].image, b[i].image));
    ASSERT_EQ(a[i].gts.size(), b[i].gts.size());
    for (size_t k = 0; k < a[i].gts.size(); ++k) EXPECT_EQ(a[i].gts[k].box, b[i].gts[k].box);
    EXPECT_GE(a[i].gts.size(), 1u);
    EXPECT_LE(a[i].gts.size(), 4u);
    for (const auto& g : a[i].gts) {
      EXPECT_GE(g.label, 0);
      EXPECT_LT(g.label, 3);
    }
    expect_valid(a[i]);
    differs |= !same_pixels(a[i].image, c[i].image);
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(synth_dataset(1, 9, 96, 0), ConfigError);
  EXPECT_THROW(synth_dataset(0, 3, 96, 0), ConfigError);
}

TEST(Synth, GtIsTightBoundOfRenderedMask) {
  const int r = 96;
  for (const auto& s : synth_dataset(40, 8, r, 11)) {
    const auto px = s.image.data();
    auto bright = [&](int x, int y) {
      for (int c = 0; c < 3; ++c)
        if (px[(static_cast<size_t>(c) * r + y) * r + x] < 0.5f) return false;
      return true;
    };
    for (const auto& g : s.gts) {
      const int gx0 = static_cast<int>(std::lround(g.box.xmin * r)), gy0 = static_cast<int>(std::lround(g.box.ymin * r));
      const int gx1 = static_cast<int>(std::lround(g.box.xmax * r)), gy1 = static_cast<int>(std::lround(g.box.ymax * r));
      // Search one pixel beyond the box; shapes keep a 2-pixel gap.
      int bx0 = r, by0 = r, bx1 = -1, by1 = -1;
      for (int y = std::max(0, gy0 - 1); y < std::min(r, gy1 + 1); ++y)
        for (int x = std::max(0, gx0 - 1); x < std::min(r, gx1 + 1); ++x)
          if (bright(x, y)) {
            bx0 = std::min(bx0, x);
            by0 = std::min(by0, y);
            bx1 = std::max(bx1, x + 1);
            by1 = std::max(by1, y + 1);
          }
      EXPECT_LE(std::abs(bx0 - gx0), 1) << s.id;
      EXPECT_LE(std::abs(by0 - gy0), 1) << s.id;
      EXPECT_LE(std::abs(bx1 - gx1), 1) << s.id;
      EXPECT_LE(std::abs(by1 - gy1), 1) << s.id;
    }
  }
}

TEST(Ppm, SmallImagesAndRoundTrip) {
  const std::string white = std::string("P6\n2 2\n255\n") + std::string(12, '\xff');
  const Tensor w = decode_ppm(white);
  EXPECT_EQ(w.shape(), (Shape{3, 2, 2}));
  for (float v : w.data()) EXPECT_EQ(v, 1.0f);

  const Tensor red = decode_ppm(std::string("P6 1 1 255\n\xff\x00\x00", 14));
  EXPECT_EQ(red.at({0, 0, 0}), 1.0f);
  EXPECT_EQ(red.at({1, 0, 0}), 0.0f);
  EXPECT_EQ(red.at({2, 0, 0}), 0.0f);

  // Comments in the header are allowed.
  EXPECT_EQ(decode_ppm(std::string("P6\n# c\n1 1\n255\n\x10\x20\x30")).at({2, 0, 0}), 0x30 / 255.0f);

  std::mt19937_64 r(1);
  Tensor img = oracle::random_tensor({3, 5, 7}, r, 0, 1);
  for (float& v : img.data()) v = std::round(v * 255) / 255;
  EXPECT_TRUE(same_pixels(decode_ppm(encode_ppm(img)), img));
}

TEST(Ppm, MalformedInput) {
  EXPECT_THROW(decode_ppm("P3\n1 1\n255\n000"), ParseError);
  EXPECT_THROW(decode_ppm("P6\n1\n"), ParseError);
  EXPECT_THROW(decode_ppm("P6\n2 2\n65535\n"), ParseError);
  EXPECT_THROW(decode_ppm("P6\n2 2\n255\n\x01\x02"), ParseError);
  EXPECT_THROW(decode_ppm(""), ParseError);
  EXPECT_THROW(load_image("/nonexistent/image.ppm"), DataError);
}

TEST(Resize, ConstantStaysConstantAndIdentity) {
  Tensor c({3, 7, 5}, 0.42f);
  const Tensor up = resize_bilinear(c, 13, 11);
  EXPECT_EQ(up.shape(), (Shape{3, 13, 11}));
  for (float v : up.data()) EXPECT_NEAR(v, 0.42f, 1e-6);
  const Tensor down = resize_bilinear(c, 2, 3);
  for (float v : down.data()) EXPECT_NEAR(v, 0.42f, 1e-6);
  std::mt19937_64 r(2);
  const Tensor x = oracle::random_tensor({3, 4, 6}, r, 0, 1);
  EXPECT_LT(oracle::max_abs_diff(resize_bilinear(x, 4, 6).data(), std::vector<double>(x.data().begin(), x.data().end())), 1e-7);
}

TEST(Voc, FixtureFile) {
  const VocAnnotation a = parse_voc_xml(fixture("voc_two_objects.xml"));
  EXPECT_EQ(a.filename, "000042.ppm");
  EXPECT_EQ(a.width, 200);
  EXPECT_EQ(a.height, 100);
  ASSERT_EQ(a.objects.size(), 2u);
  EXPECT_EQ(a.objects[0].label, 0);  // aeroplane
  EXPECT_FALSE(a.objects[0].difficult);
  EXPECT_EQ(a.objects[0].box, (BoxCorner{0.0f, 0.1f, 0.5f, 0.6f}));
  EXPECT_EQ(a.objects[1].label, 19);  // tvmonitor
  EXPECT_TRUE(a.objects[1].difficult);
  EXPECT_EQ(a.objects[1].box, (BoxCorner{0.75f, 0.5f, 1.0f, 1.0f}));
  EXPECT_EQ(voc_class_names()[0], "aeroplane");
}

TEST(Voc, FullImageBoxAndErrors) {
  const std::string full =
      "<annotation><size><width>64</width><height>48</height></size>"
      "<object><name>dog</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>64</xmax><ymax>48</ymax></bndbox></object>"
      "</annotation>";
  const VocAnnotation a = parse_voc_xml_string(full);
  ASSERT_EQ(a.objects.size(), 1u);
  EXPECT_EQ(a.objects[0].box, (BoxCorner{0, 0, 1, 1}));
  EXPECT_EQ(a.objects[0].label, 11);

  const std::string no_ymax =
      "<annotation><size><width>64</width><height>48</height></size>"
      "<object><name>dog</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>64</xmax></bndbox></object>"
      "</annotation>";
  try {
    parse_voc_xml_string(no_ymax);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bndbox.ymax"), std::string::npos) << e.what();
  }
  const std::string no_size = "<annotation><object><name>dog</name></object></annotation>";
  try {
    parse_voc_xml_string(no_size);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("size.width"), std::string::npos) << e.what();
  }
  std::string unknown = full;
  unknown.replace(unknown.find("dog"), 3, "unicorn");
  EXPECT_THROW(parse_voc_xml_string(unknown), DataError);
  EXPECT_THROW(parse_voc_xml_string("<annotation><size>"), ParseError);
}

TEST(Voc, XmlRoundTripWithinOnePixel) {
  std::mt19937_64 r(4);
  for (int t = 0; t < 50; ++t) {
    VocAnnotation a;
    a.filename = "x.ppm";
    a.width = 97 + t;
    a.height = 61 + 2 * t;
    for (int k = 0; k < 3; ++k) a.objects.push_back({oracle::random_box(r, 0.1f), (t + k) % 20, k == 1});
    const VocAnnotation b = parse_voc_xml_string(to_voc_xml(a));
    ASSERT_EQ(b.objects.size(), a.objects.size());
    for (size_t k = 0; k < a.objects.size(); ++k) {
      EXPECT_EQ(b.objects[k].label, a.objects[k].label);
      EXPECT_EQ(b.objects[k].difficult, a.objects[k].difficult);
      EXPECT_LE(std::fabs(b.objects[k].box.xmin - a.objects[k].box.xmin) * a.width, 1.0f);
      EXPECT_LE(std::fabs(b.objects[k].box.ymin - a.objects[k].box.ymin) * a.height, 1.0f);
      EXPECT_LE(std::fabs(b.objects[k].box.xmax - a.objects[k].box.xmax) * a.width, 1.0f);
      EXPECT_LE(std::fabs(b.objects[k].box.ymax - a.objects[k].box.ymax) * a.height, 1.0f);
    }
  }
}

TEST(Dataset, SaveLoadAndVocDirectory) {
  const auto data = synth_dataset(3, 4, 48, 5);
  const fs::path dir = scratch_dir("store");
  save_dataset(dir, data);
  const auto back = load_dataset(dir.string(), 48);
  ASSERT_EQ(back.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].id, data[i].id);
    ASSERT_EQ(back[i].gts.size(), data[i].gts.size());
    EXPECT_NEAR(back[i].gts[0].box.xmax, data[i].gts[0].box.xmax, 1e-6);
    EXPECT_EQ(back[i].gts[0].label, data[i].gts[0].label);
    EXPECT_LT(oracle::max_abs_diff(back[i].image.data(),
                                   std::vector<double>(data[i].image.data().begin(), data[i].image.data().end())),
              0.5 / 255 + 1e-6);
  }

  const fs::path voc = scratch_dir("voc");
  fs::copy_file(fixture("voc_two_objects.xml"), voc / "000042.xml");
  save_image(voc / "000042.ppm", Tensor({3, 100, 200}, 0.5f));
  const auto v = load_dataset(voc.string(), 96);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].id, "000042");
  EXPECT_EQ(v[0].width(), 200);
  EXPECT_EQ(v[0].gts.size(), 2u);

  EXPECT_THROW(load_dataset("/nonexistent/dir", 96), DataError);
  EXPECT_THROW(load_dataset("synth:3:x:1", 96), ConfigError);
  EXPECT_EQ(load_dataset("synth:2:3:1", 96).size(), 2u);
}

TEST(Augment, OptionOneIsIdentity) {
  const auto s = synth_dataset(1, 3, 96, 1)[0];
  Rng r(3);
  AugmentTrace t;
  const Sample o = augment_option(s, 1, r, 96, &t);
  EXPECT_EQ(encode_ppm(o.image), encode_ppm(s.image));
  EXPECT_TRUE(same_pixels(o.image, s.image));
  ASSERT_EQ(o.gts.size(), s.gts.size());
  for (size_t i = 0; i < s.gts.size(); ++i) EXPECT_EQ(o.gts[i].box, s.gts[i].box);
  EXPECT_EQ(t.option, 1);
}

TEST(Augment, ContrastIdentityAndClamp) {
  const auto s = synth_dataset(1, 3, 48, 2)[0];
  EXPECT_TRUE(same_pixels(adjust_contrast(s, 1.0).image, s.image));
  const Sample hi = adjust_contrast(s, 1.5);
  for (float v : hi.image.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  Rng r(4);
  AugmentTrace t;
  augment_option(s, 5, r, 48, &t);
  EXPECT_GE(t.contrast, 0.5);
  EXPECT_LE(t.contrast, 1.5);
}

TEST(Augment, CropRemapsAndDropsByCentre) {
  Sample s;
  s.id = "c";
  s.image = Tensor({3, 10, 10}, 0.2f);
  s.gts = {{{0.0f, 0.0f, 0.4f, 0.4f}, 0, false}, {{0.6f, 0.6f, 1.0f, 1.0f}, 1, false}};
  const Sample c = crop_sample(s, {1, 1, 5, 5});
  ASSERT_EQ(c.gts.size(), 1u);
  EXPECT_EQ(c.gts[0].label, 0);
  EXPECT_NEAR(c.gts[0].box.xmin, 0.0f, 1e-6);
  EXPECT_NEAR(c.gts[0].box.xmax, 0.6f, 1e-6);
  EXPECT_EQ(c.image.shape(), (Shape{3, 5, 5}));
  EXPECT_THROW(crop_sample(s, {8, 8, 5, 5}), DimensionError);
}

TEST(Augment, MinOverlapCropHoldsByConstruction) {
  const auto data = synth_dataset(16, 8, 96, 3);
  int checked_09 = 0;
  for (uint64_t seed = 0; seed < 400; ++seed) {
    const Sample& s = data[seed % data.size()];
    Rng r(seed);
    AugmentTrace t;
    const Sample out = augment_option(s, 3, r, 96, &t);
    expect_valid(out);
    if (t.fell_back) continue;
    const int w = s.width(), h = s.height();
    const BoxCorner crop{float(t.crop.x) / w, float(t.crop.y) / h, float(t.crop.x + t.crop.w) / w,
                         float(t.crop.y + t.crop.h) / h};
    size_t survivors = 0;
    for (const auto& g : s.gts) {
      const double mx = 0.5 * (g.box.xmin + g.box.xmax) * w, my = 0.5 * (g.box.ymin + g.box.ymax) * h;
      if (mx < t.crop.x || mx >= t.crop.x + t.crop.w || my < t.crop.y || my >= t.crop.y + t.crop.h) continue;
      ++survivors;
      const BoxCorner inter{std::max(g.box.xmin, crop.xmin), std::max(g.box.ymin, crop.ymin),
                            std::min(g.box.xmax, crop.xmax), std::min(g.box.ymax, crop.ymax)};
      EXPECT_GE(iou(g.box, inter), t.min_overlap - 1e-9);
    }
    EXPECT_EQ(out.gts.size(), survivors);
    EXPECT_GE(survivors, 1u);
    checked_09 += t.min_overlap == 0.9;
  }
  EXPECT_GT(checked_09, 0);
}

TEST(Augment, DeterministicAndInvariants) {
  const auto data = synth_dataset(8, 8, 96, 9);
  int options[6] = {0};
  for (uint64_t seed = 0; seed < 300; ++seed) {
    const Sample& s = data[seed % data.size()];
    Rng r1(seed), r2(seed);
    AugmentTrace t1, t2;
    const Sample a = augment(s, r1, 64, &t1);
    const Sample b = augment(s, r2, 64, &t2);
    EXPECT_TRUE(same_pixels(a.image, b.image));
    EXPECT_EQ(a.gts.size(), b.gts.size());
    EXPECT_EQ(t1.chosen, t2.chosen);
    EXPECT_EQ(a.image.shape(), (Shape{3, 64, 64}));
    expect_valid(a);
    ++options[t1.chosen];
  }
  for (int k = 1; k <= 5; ++k) EXPECT_GT(options[k], 30) << k;
  Rng r(0);
  EXPECT_THROW(augment_option(data[0], 6, r, 64), ConfigError);
}
