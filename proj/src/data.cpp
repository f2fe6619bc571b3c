// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "cvtassd/errors.hpp"

namespace cvtassd {

namespace fs = std::filesystem;

const std::array<std::string_view, 8>& synth_class_names() {
  static const std::array<std::string_view, 8> names{
      "rectangle", "disc", "triangle", "ring", "cross", "diamond", "bar", "checker"};
  return names;
}

const std::array<std::string_view, 20>& voc_class_names() {
  static const std::array<std::string_view, 20> names{
      "aeroplane", "bicycle", "bird",  "boat",      "bottle", "bus",         "car",
      "cat",       "chair",   "cow",   "diningtable", "dog",  "horse",       "motorbike",
      "person",    "pottedplant", "sheep", "sofa",  "train",  "tvmonitor"};
  return names;
}

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool shape_covers(int cls, double u, double v) {
  const double du = u - 0.5, dv = v - 0.5;
  switch (cls) {
    case 0:  // rectangle
    case 6:  // bar
      return true;
    case 1: return du * du + dv * dv <= 0.25;
    case 2: return std::fabs(du) <= 0.5 * v + 0.02;
    case 3: {
      const double r2 = du * du + dv * dv;
      return r2 <= 0.25 && r2 >= 0.07;
    }
    case 4: return std::fabs(du) <= 1.0 / 6 || std::fabs(dv) <= 1.0 / 6;
    case 5: return std::fabs(du) + std::fabs(dv) <= 0.5;
    case 7: return (static_cast<int>(u * 4) + static_cast<int>(v * 4)) % 2 == 0;
    default: return false;
  }
}

struct Placed {
  int x0, y0, x1, y1;  // inclusive pixel bounds of the reserved region
};

}  // namespace

std::vector<Sample> synth_dataset(int n, int num_classes, int resolution, uint64_t seed) {
  if (n < 1) throw ConfigError("synth_dataset: n must be >= 1");
  if (num_classes < 1 || num_classes > 8) throw ConfigError("synth_dataset: num_classes must be in 1..8");
  if (resolution < 24) throw ConfigError("synth_dataset: resolution must be >= 24");
  Rng rng(seed);
  const int r = resolution;
  const int lo = std::max(8, static_cast<int>(std::lround(0.15 * r)));
  const int hi = std::max(lo, static_cast<int>(std::lround(0.45 * r)));
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Tensor img({3, r, r});
    auto px = img.data();
    for (float& p : px) p = static_cast<float>(uniform(rng, 0.0, 0.35));

    Sample s;
    s.id = "synth" + std::to_string(i);
    std::vector<Placed> placed;
    const int count = uniform_int(rng, 1, 4);
    for (int k = 0; k < count; ++k) {
      const int cls = uniform_int(rng, 0, num_classes - 1);
      int w = uniform_int(rng, lo, hi), h = w;
      if (cls == 6) {
        const int thin = std::max(4, w / 4);
        if (uniform_int(rng, 0, 1)) h = thin; else w = thin;
      } else if (cls != 7) {
        h = std::clamp(static_cast<int>(std::lround(w * uniform(rng, 0.8, 1.2))), lo, hi);
      }
      bool ok = false;
      int x0 = 0, y0 = 0;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        x0 = uniform_int(rng, 0, r - w);
        y0 = uniform_int(rng, 0, r - h);
        ok = std::none_of(placed.begin(), placed.end(), [&](const Placed& p) {
          return x0 <= p.x1 + 2 && p.x0 <= x0 + w - 1 + 2 && y0 <= p.y1 + 2 && p.y0 <= y0 + h - 1 + 2;
        });
      }
      if (!ok) continue;
      const float color[3] = {static_cast<float>(uniform(rng, 0.6, 1.0)),
                              static_cast<float>(uniform(rng, 0.6, 1.0)),
                              static_cast<float>(uniform(rng, 0.6, 1.0))};
      int bx0 = r, by0 = r, bx1 = -1, by1 = -1;
      for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          const double u = (x - x0 + 0.5) / w, v = (y - y0 + 0.5) / h;
          if (!shape_covers(cls, u, v)) continue;
          for (int c = 0; c < 3; ++c) px[(static_cast<size_t>(c) * r + y) * r + x] = color[c];
          bx0 = std::min(bx0, x);
          by0 = std::min(by0, y);
          bx1 = std::max(bx1, x);
          by1 = std::max(by1, y);
        }
      }
      placed.push_back({x0, y0, x0 + w - 1, y0 + h - 1});
      const float fr = static_cast<float>(r);
      s.gts.push_back({{bx0 / fr, by0 / fr, (bx1 + 1) / fr, (by1 + 1) / fr}, cls, false});
    }
    s.image = img;
    out.push_back(std::move(s));
  }
  return out;
}

// ---- images -----------------------------------------------------------------

Tensor decode_ppm(std::string_view bytes) {
  size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    int v = 0;
    const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), v);
    if (ec != std::errc() || v <= 0) throw ParseError(std::string("ppm: bad ") + what);
    pos = static_cast<size_t>(ptr - bytes.data());
    return v;
  };
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P6") throw ParseError("ppm: missing P6 magic");
  pos = 2;
  const int w = read_int("width");
  const int h = read_int("height");
  const int maxval = read_int("maxval");
  if (maxval != 255) throw ParseError("ppm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("ppm: missing separator after header");
  }
  ++pos;
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (bytes.size() - pos < need) throw ParseError("ppm: truncated pixel data");
  Tensor img({3, h, w});
  auto d = img.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const auto b = static_cast<unsigned char>(bytes[pos + (static_cast<size_t>(y) * w + x) * 3 + c]);
        d[(static_cast<size_t>(c) * h + y) * w + x] = b / 255.0f;
      }
    }
  }
  return img;
}

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw DimensionError("encode_ppm: expects (3, H, W)");
  const int64_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const size_t header = out.size();
  out.resize(header + static_cast<size_t>(w * h * 3));
  auto d = image.data();
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        const float v = std::clamp(d[static_cast<size_t>((c * h + y) * w + x)], 0.0f, 1.0f);
        out[header + static_cast<size_t>((y * w + x) * 3 + c)] =
            static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

Tensor load_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_ppm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Tensor load_image(const fs::path& path, int resolution) {
  Tensor img = load_image(path);
  if (resolution > 0 && (img.dim(1) != resolution || img.dim(2) != resolution)) {
    img = resize_bilinear(img, resolution, resolution);
  }
  return img;
}

void save_image(const fs::path& path, const Tensor& image) { write_file(path, encode_ppm(image)); }

Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w) {
  if (image.rank() != 3) throw DimensionError("resize_bilinear: expects (C, H, W)");
  if (out_h < 1 || out_w < 1) throw ConfigError("resize_bilinear: output size must be positive");
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out({c, out_h, out_w});
  auto src = image.data();
  auto dst = out.data();
  auto coord = [](int64_t o, int64_t in_size, int64_t out_size, int64_t& i0, int64_t& i1, float& t) {
    double s = (o + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
    i0 = static_cast<int64_t>(std::floor(s));
    i1 = std::min(i0 + 1, in_size - 1);
    t = static_cast<float>(s - i0);
  };
  for (int64_t y = 0; y < out_h; ++y) {
    int64_t y0, y1;
    float ty;
    coord(y, h, out_h, y0, y1, ty);
    for (int64_t x = 0; x < out_w; ++x) {
      int64_t x0, x1;
      float tx;
      coord(x, w, out_w, x0, x1, tx);
      for (int64_t ch = 0; ch < c; ++ch) {
        const float* p = src.data() + ch * h * w;
        const float top = p[y0 * w + x0] + (p[y0 * w + x1] - p[y0 * w + x0]) * tx;
        const float bot = p[y1 * w + x0] + (p[y1 * w + x1] - p[y1 * w + x0]) * tx;
        dst[static_cast<size_t>((ch * out_h + y) * out_w + x)] = top + (bot - top) * ty;
      }
    }
  }
  return out;
}

// ---- VOC XML ----------------------------------------------------------------

namespace {

namespace pt = boost::property_tree;

template <typename T>
T required(const pt::ptree& tree, const std::string& path) {
  const auto node = tree.get_child_optional(path);
  if (!node) throw ParseError("voc xml: missing element <" + path + ">");
  try {
    return node->get_value<T>();
  } catch (const pt::ptree_bad_data&) {
    throw ParseError("voc xml: malformed value in <" + path + ">");
  }
}

int voc_class_id(const std::string& name) {
  const auto& names = voc_class_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("voc xml: unknown class name '" + name + "'");
  return static_cast<int>(it - names.begin());
}

VocAnnotation parse_tree(const pt::ptree& doc) {
  const auto root_opt = doc.get_child_optional("annotation");
  if (!root_opt) throw ParseError("voc xml: missing element <annotation>");
  const pt::ptree& root = *root_opt;
  VocAnnotation ann;
  ann.filename = root.get<std::string>("filename", "");
  ann.width = required<int>(root, "size.width");
  ann.height = required<int>(root, "size.height");
  if (ann.width <= 0 || ann.height <= 0) throw ParseError("voc xml: non-positive image size");
  const float fw = static_cast<float>(ann.width), fh = static_cast<float>(ann.height);
  for (const auto& [key, obj] : root) {
    if (key != "object") continue;
    GroundTruthBox g;
    g.label = voc_class_id(required<std::string>(obj, "name"));
    g.difficult = obj.get<int>("difficult", 0) != 0;
    const double xmin = required<double>(obj, "bndbox.xmin");
    const double ymin = required<double>(obj, "bndbox.ymin");
    const double xmax = required<double>(obj, "bndbox.xmax");
    const double ymax = required<double>(obj, "bndbox.ymax");
    g.box = clip_unit({static_cast<float>((xmin - 1) / fw), static_cast<float>((ymin - 1) / fh),
                       static_cast<float>(xmax / fw), static_cast<float>(ymax / fh)});
    if (!(g.box.area() > 0.0f)) throw DataError("voc xml: degenerate box for " + std::string(voc_class_names()[g.label]));
    ann.objects.push_back(g);
  }
  return ann;
}

}  // namespace

VocAnnotation parse_voc_xml_string(const std::string& xml) {
  std::istringstream in(xml);
  pt::ptree doc;
  try {
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("voc xml: ") + e.what());
  }
  return parse_tree(doc);
}

VocAnnotation parse_voc_xml(const fs::path& path) {
  try {
    return parse_voc_xml_string(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string to_voc_xml(const VocAnnotation& ann) {
  std::ostringstream out;
  out << "<annotation>\n  <filename>" << ann.filename << "</filename>\n"
      << "  <size>\n    <width>" << ann.width << "</width>\n    <height>" << ann.height
      << "</height>\n    <depth>3</depth>\n  </size>\n";
  for (const auto& g : ann.objects) {
    out << "  <object>\n    <name>" << voc_class_names().at(static_cast<size_t>(g.label))
        << "</name>\n    <difficult>" << (g.difficult ? 1 : 0) << "</difficult>\n    <bndbox>\n"
        << "      <xmin>" << std::lround(g.box.xmin * ann.width) + 1 << "</xmin>\n"
        << "      <ymin>" << std::lround(g.box.ymin * ann.height) + 1 << "</ymin>\n"
        << "      <xmax>" << std::lround(g.box.xmax * ann.width) << "</xmax>\n"
        << "      <ymax>" << std::lround(g.box.ymax * ann.height) << "</ymax>\n"
        << "    </bndbox>\n  </object>\n";
  }
  out << "</annotation>\n";
  return out.str();
}

// ---- dataset store ----------------------------------------------------------

void save_dataset(const fs::path& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir);
  std::ostringstream labels;
  labels.setf(std::ios::fixed);
  labels.precision(6);
  for (const auto& s : samples) {
    save_image(dir / (s.id + ".ppm"), s.image);
    for (const auto& g : s.gts) {
      labels << s.id << ' ' << g.label << ' ' << g.box.xmin << ' ' << g.box.ymin << ' ' << g.box.xmax
             << ' ' << g.box.ymax << '\n';
    }
  }
  write_file(dir / "labels.txt", labels.str());
}

namespace {

std::vector<Sample> load_label_store(const fs::path& dir) {
  std::map<std::string, std::vector<GroundTruthBox>> by_id;
  std::ifstream in(dir / "labels.txt");
  if (!in) throw DataError("cannot read " + (dir / "labels.txt").string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id;
    GroundTruthBox g;
    if (!(ls >> id >> g.label >> g.box.xmin >> g.box.ymin >> g.box.xmax >> g.box.ymax)) {
      throw ParseError("labels.txt:" + std::to_string(lineno) + ": expected 'id class xmin ymin xmax ymax'");
    }
    if (g.label < 0) throw DataError("labels.txt:" + std::to_string(lineno) + ": negative class id");
    by_id[id].push_back(g);
  }
  std::set<std::string> ids;
  for (const auto& [id, _] : by_id) ids.insert(id);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ppm") ids.insert(e.path().stem().string());
  }
  std::vector<Sample> out;
  for (const auto& id : ids) {
    Sample s;
    s.id = id;
    s.image = load_image(dir / (id + ".ppm"));
    s.gts = by_id[id];
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> load_voc_dir(const fs::path& dir) {
  std::vector<fs::path> xmls;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".xml") xmls.push_back(e.path());
  }
  std::sort(xmls.begin(), xmls.end());
  if (xmls.empty()) throw DataError(dir.string() + ": no labels.txt and no VOC XML files");
  std::vector<Sample> out;
  for (const auto& x : xmls) {
    const VocAnnotation ann = parse_voc_xml(x);
    fs::path img = dir / ann.filename;
    if (ann.filename.empty() || img.extension() != ".ppm") img = dir / (x.stem().string() + ".ppm");
    Sample s;
    s.id = x.stem().string();
    s.image = load_image(img);
    s.gts = ann.objects;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<Sample> load_dataset(const std::string& spec, int resolution) {
  if (spec.rfind("synth:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(spec.substr(6));
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw ConfigError("dataset spec must be synth:<n>:<classes>:<seed>");
    try {
      return synth_dataset(std::stoi(parts[0]), std::stoi(parts[1]), resolution,
                           std::stoull(parts[2]));
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("dataset spec must be synth:<n>:<classes>:<seed>");
    }
  }
  const fs::path dir(spec);
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + spec);
  if (fs::exists(dir / "labels.txt")) return load_label_store(dir);
  return load_voc_dir(dir);
}

// ---- augmentation -----------------------------------------------------------

Sample crop_sample(const Sample& s, const PixelRect& rect) {
  const int w = s.width(), h = s.height();
  if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0 || rect.x + rect.w > w || rect.y + rect.h > h) {
    throw DimensionError("crop_sample: rectangle outside the image");
  }
  Tensor img({3, rect.h, rect.w});
  auto src = s.image.data();
  auto dst = img.data();
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < rect.h; ++y) {
      for (int x = 0; x < rect.w; ++x) {
        dst[(static_cast<size_t>(c) * rect.h + y) * rect.w + x] =
            src[(static_cast<size_t>(c) * h + rect.y + y) * w + rect.x + x];
      }
    }
  }
  Sample out;
  out.id = s.id;
  out.image = img;
  const double cx0 = double(rect.x) / w, cy0 = double(rect.y) / h;
  const double cx1 = double(rect.x + rect.w) / w, cy1 = double(rect.y + rect.h) / h;
  for (const auto& g : s.gts) {
    const double mx = 0.5 * (g.box.xmin + g.box.xmax), my = 0.5 * (g.box.ymin + g.box.ymax);
    if (mx < cx0 || mx >= cx1 || my < cy0 || my >= cy1) continue;
    auto remap = [](double v, double lo, double hi) {
      return static_cast<float>(std::clamp((v - lo) / (hi - lo), 0.0, 1.0));
    };
    GroundTruthBox ng = g;
    ng.box = {remap(g.box.xmin, cx0, cx1), remap(g.box.ymin, cy0, cy1), remap(g.box.xmax, cx0, cx1),
              remap(g.box.ymax, cy0, cy1)};
    if (ng.box.area() > 0.0f) out.gts.push_back(ng);
  }
  return out;
}

Sample adjust_contrast(const Sample& s, double factor) {
  Sample out = s;
  out.image = s.image.clone();
  for (float& p : out.image.data()) {
    p = static_cast<float>(std::clamp(0.5 + factor * (p - 0.5), 0.0, 1.0));
  }
  return out;
}

namespace {

Sample to_resolution(Sample s, int resolution) {
  if (resolution > 0 && (s.width() != resolution || s.height() != resolution)) {
    s.image = resize_bilinear(s.image, resolution, resolution);
  }
  return s;
}

PixelRect random_rect(Rng& rng, int w, int h, double min_scale) {
  const double sw = uniform(rng, min_scale, 1.0), sh = uniform(rng, min_scale, 1.0);
  const int cw = std::max(1, static_cast<int>(std::lround(sw * w)));
  const int ch = std::max(1, static_cast<int>(std::lround(sh * h)));
  return {uniform_int(rng, 0, w - cw), uniform_int(rng, 0, h - ch), cw, ch};
}

bool aspect_ok(const PixelRect& r) {
  const double a = double(r.w) / r.h;
  return a >= 0.5 && a <= 2.0;
}

// Fraction of the GT's area retained inside the crop, i.e. the IoU between the
// original box and its crop-intersected part.
double retained_overlap(const BoxCorner& g, const PixelRect& r, int w, int h) {
  const BoxCorner crop{float(r.x) / w, float(r.y) / h, float(r.x + r.w) / w, float(r.y + r.h) / h};
  const BoxCorner inter{std::max(g.xmin, crop.xmin), std::max(g.ymin, crop.ymin),
                        std::min(g.xmax, crop.xmax), std::min(g.ymax, crop.ymax)};
  if (inter.xmax <= inter.xmin || inter.ymax <= inter.ymin) return 0.0;
  return iou(g, inter);
}

bool centre_inside(const BoxCorner& g, const PixelRect& r, int w, int h) {
  const double mx = 0.5 * (g.xmin + g.xmax) * w, my = 0.5 * (g.ymin + g.ymax) * h;
  return mx >= r.x && mx < r.x + r.w && my >= r.y && my < r.y + r.h;
}

}  // namespace

Sample augment_option(const Sample& s, int option, Rng& rng, int resolution, AugmentTrace* trace) {
  AugmentTrace local;
  AugmentTrace& t = trace ? *trace : local;
  t = AugmentTrace{};
  t.option = t.chosen = option;
  const int w = s.width(), h = s.height();
  auto fallback = [&] {
    t.option = 1;
    t.fell_back = true;
    return to_resolution(s, resolution);
  };
  switch (option) {
    case 1:
      return to_resolution(s, resolution);
    case 2: {
      if (uniform(rng, 0.0, 1.0) < 0.5) {
        t.option = 1;
        return to_resolution(s, resolution);
      }
      for (int trial = 0; trial < 50; ++trial) {
        const PixelRect r = random_rect(rng, w, h, 0.3);
        if (!aspect_ok(r)) continue;
        Sample c = crop_sample(s, r);
        if (!s.gts.empty() && c.gts.empty()) continue;
        t.crop = r;
        return to_resolution(std::move(c), resolution);
      }
      return fallback();
    }
    case 3: {
      static constexpr std::array<double, 5> kOverlaps{0.1, 0.3, 0.5, 0.7, 0.9};
      t.min_overlap = kOverlaps[static_cast<size_t>(uniform_int(rng, 0, 4))];
      for (int trial = 0; trial < 50; ++trial) {
        const PixelRect r = random_rect(rng, w, h, 0.3);
        if (!aspect_ok(r)) continue;
        int kept = 0;
        bool ok = true;
        for (const auto& g : s.gts) {
          if (!centre_inside(g.box, r, w, h)) continue;
          ++kept;
          if (retained_overlap(g.box, r, w, h) < t.min_overlap) ok = false;
        }
        if (!ok || (kept == 0 && !s.gts.empty())) continue;
        t.crop = r;
        return to_resolution(crop_sample(s, r), resolution);
      }
      return fallback();
    }
    case 4: {
      for (int trial = 0; trial < 50; ++trial) {
        const PixelRect r = random_rect(rng, w, h, 0.1);
        Sample c = crop_sample(s, r);
        if (!s.gts.empty() && c.gts.empty()) continue;
        t.crop = r;
        return to_resolution(std::move(c), resolution);
      }
      return fallback();
    }
    case 5:
      t.contrast = uniform(rng, 0.5, 1.5);
      return to_resolution(adjust_contrast(s, t.contrast), resolution);
    default:
      throw ConfigError("augment: option must be in 1..5");
  }
}

Sample augment(const Sample& s, Rng& rng, int resolution, AugmentTrace* trace) {
  return augment_option(s, uniform_int(rng, 1, 5), rng, resolution, trace);
}

}  // namespace cvtassd
