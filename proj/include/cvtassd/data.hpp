// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cvtassd/box.hpp"
#include "cvtassd/nn.hpp"
#include "cvtassd/tensor.hpp"

namespace cvtassd {

struct Sample {
  Tensor image;  // (3, H, W) in [0, 1]
  std::vector<GroundTruthBox> gts;
  std::string id;
  int width() const { return static_cast<int>(image.dim(2)); }
  int height() const { return static_cast<int>(image.dim(1)); }
};

/// Shape classes of the synthetic set, indexed by class id.
const std::array<std::string_view, 8>& synth_class_names();
/// The 20 VOC classes in canonical order.
const std::array<std::string_view, 20>& voc_class_names();

/// Noise background with 1-4 non-overlapping shapes; GT boxes are the tight
/// pixel bounds of each rendered shape.
std::vector<Sample> synth_dataset(int n, int num_classes, int resolution, uint64_t seed);

/// Parses `synth:<n>:<classes>:<seed>` or loads a dataset directory.
std::vector<Sample> load_dataset(const std::string& spec, int resolution);
void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);

// ---- images ---------------------------------------------------------------

Tensor decode_ppm(std::string_view bytes);
std::string encode_ppm(const Tensor& image);
/// Reads a binary P6 image; throws DataError when unreadable, ParseError when malformed.
Tensor load_image(const std::filesystem::path& path);
/// Same, followed by a bilinear resize to resolution x resolution when > 0.
Tensor load_image(const std::filesystem::path& path, int resolution);
void save_image(const std::filesystem::path& path, const Tensor& image);
/// Half-pixel-centre bilinear resize of a (3, H, W) image.
Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w);

// ---- VOC XML --------------------------------------------------------------

struct VocAnnotation {
  std::string filename;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthBox> objects;
};

VocAnnotation parse_voc_xml(const std::filesystem::path& path);
VocAnnotation parse_voc_xml_string(const std::string& xml);
std::string to_voc_xml(const VocAnnotation& ann);

// ---- augmentation ---------------------------------------------------------

struct PixelRect {
  int x = 0, y = 0, w = 0, h = 0;
};

struct AugmentTrace {
  int option = 1;         // 1..5 as chosen; 1 also when a crop search fell back
  int chosen = 1;         // option drawn before any fallback
  bool fell_back = false;
  PixelRect crop;         // valid for options 2-4 when applied
  double min_overlap = 0; // option 3
  double contrast = 1;    // option 5
};

/// Draws one of the five options uniformly and applies it. The result is
/// resized to resolution x resolution.
Sample augment(const Sample& s, Rng& rng, int resolution, AugmentTrace* trace = nullptr);
/// Applies a specific option (1..5).
Sample augment_option(const Sample& s, int option, Rng& rng, int resolution,
                      AugmentTrace* trace = nullptr);
/// Crops the sample to `rect`; GTs whose centre falls outside are dropped and
/// the rest are clipped to the crop.
Sample crop_sample(const Sample& s, const PixelRect& rect);
Sample adjust_contrast(const Sample& s, double factor);

}  // namespace cvtassd
