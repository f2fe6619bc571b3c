// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/config.hpp"

#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

#include "cvtassd/errors.hpp"

namespace cvtassd {

void StageConfig::validate() const {
  embed.validate();
  if (num_blocks < 1) throw ConfigError("stage needs at least one block");
  if (heads < 1 || dim % heads != 0) {
    throw ConfigError("stage dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (!(mlp_ratio > 0.0f)) throw ConfigError("mlp_ratio must be positive");
  if (proj_kernel < 1 || proj_kernel % 2 == 0) {
    throw ConfigError("proj_kernel must be a positive odd size");
  }
}

std::string_view level_source_name(LevelSource s) {
  switch (s) {
    case LevelSource::Stage1: return "stage1";
    case LevelSource::Stage2: return "stage2";
    case LevelSource::Stage3: return "stage3";
    case LevelSource::Previous: return "previous";
  }
  return "?";
}

void ModelConfig::finalize() {
  if (input_size < 1) throw ConfigError("input_size must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  int in = 3;
  for (auto& s : stages) {
    s.embed.in_channels = in;
    s.embed.out_channels = s.dim;
    s.embed.groups = 1;
    s.validate();
    in = s.dim;
  }
  if (head.levels.empty()) throw ConfigError("pyramid needs at least one level");
  if (head.levels.front().source == LevelSource::Previous) {
    throw ConfigError("first pyramid level cannot take the previous level as source");
  }
  for (const auto& l : head.levels) {
    if (l.channels < 1 || l.mid_channels < 1 || l.lateral_kernel < 1 ||
        l.lateral_kernel % 2 == 0 || l.extra_kernel < 1 || l.extra_stride < 1 ||
        l.extra_padding < 0) {
      throw ConfigError("invalid pyramid level settings");
    }
  }
  if (anchors.size() != head.levels.size()) {
    throw ConfigError("anchor settings list has " + std::to_string(anchors.size()) +
                      " entries for " + std::to_string(head.levels.size()) + " pyramid levels");
  }
  for (const auto& a : anchors) {
    if (a.ratios.empty()) throw ConfigError("anchor level has an empty aspect-ratio list");
    for (float r : a.ratios) {
      if (!(r > 0.0f)) throw ConfigError("anchor aspect ratios must be positive");
    }
    if (!(a.min_size > 0.0f) || a.max_size < a.min_size) {
      throw ConfigError("anchor sizes need 0 < min_size <= max_size");
    }
    if (a.max_size > static_cast<float>(input_size)) {
      throw ConfigError("anchor max_size exceeds the input resolution");
    }
  }
  if (!(variance_center > 0.0f) || !(variance_size > 0.0f)) {
    throw ConfigError("anchor variances must be positive");
  }
}

std::vector<int> ModelConfig::anchors_per_location() const {
  std::vector<int> out;
  for (const auto& a : anchors) out.push_back(a.boxes_per_location());
  return out;
}

void TrainConfig::validate() const {
  if (!(clip_norm > 0.0f)) throw ConfigError("clip_norm must be positive");
  if (total_iters < 1) throw ConfigError("total_iters must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(match_threshold > 0.0f && match_threshold < 1.0f)) {
    throw ConfigError("match_threshold must lie in (0, 1)");
  }
  if (!(neg_ratio > 0.0f)) throw ConfigError("neg_ratio must be positive");
}

namespace {

StageConfig make_stage(int kernel, int stride, int pad, int dim, int heads, int blocks,
                       int proj_kernel) {
  StageConfig s;
  s.embed = ConvSpec::square(3, dim, kernel, stride, pad);
  s.dim = dim;
  s.heads = heads;
  s.num_blocks = blocks;
  s.mlp_ratio = 4.0f;
  s.proj_kernel = proj_kernel;
  return s;
}

PyramidLevelSpec lateral(LevelSource src, int channels, int kernel) {
  PyramidLevelSpec l;
  l.source = src;
  l.channels = channels;
  l.lateral_kernel = kernel;
  return l;
}

PyramidLevelSpec extra(int mid, int channels, int kernel, int stride, int pad) {
  PyramidLevelSpec l;
  l.source = LevelSource::Previous;
  l.mid_channels = mid;
  l.channels = channels;
  l.extra_kernel = kernel;
  l.extra_stride = stride;
  l.extra_padding = pad;
  return l;
}

}  // namespace

Settings paper_preset() {
  Settings s;
  ModelConfig& m = s.model;
  m.input_size = 384;
  m.num_classes = 20;
  m.stages = {make_stage(7, 4, 2, 64, 1, 1, 3), make_stage(3, 2, 1, 192, 3, 4, 3),
              make_stage(3, 2, 1, 384, 6, 16, 3)};
  m.head.levels = {lateral(LevelSource::Stage1, 192, 1), lateral(LevelSource::Stage2, 768, 1),
                   lateral(LevelSource::Stage3, 1024, 1), extra(128, 256, 3, 2, 1),
                   extra(128, 256, 3, 2, 1),          extra(128, 256, 3, 2, 1),
                   extra(128, 256, 3, 1, 0)};
  m.head.attention_max_tokens = 512;
  m.anchors = {{{2.0f}, 21, 42},        {{2.0f}, 42, 63},        {{2.0f, 3.0f}, 63, 114},
               {{2.0f, 3.0f}, 114, 163}, {{2.0f, 3.0f}, 163, 214}, {{2.0f}, 214, 265},
               {{2.0f}, 265, 315}};
  m.finalize();
  return s;
}

Settings tiny_preset() {
  Settings s;
  ModelConfig& m = s.model;
  m.input_size = 96;
  m.num_classes = 3;
  m.stages = {make_stage(7, 4, 2, 8, 1, 1, 3), make_stage(3, 2, 1, 16, 2, 1, 3),
              make_stage(3, 2, 1, 32, 4, 1, 3)};
  m.head.levels = {lateral(LevelSource::Stage2, 32, 3), lateral(LevelSource::Stage3, 32, 3),
                   extra(16, 32, 3, 2, 1)};
  m.head.attention_max_tokens = 1024;
  m.anchors = {{{2.0f}, 12, 24}, {{2.0f, 3.0f}, 24, 48}, {{2.0f}, 48, 80}};
  m.finalize();
  s.train.initial_lr = 0.5f;
  s.train.total_iters = 1000;
  s.train.batch_size = 8;
  s.train.seed = 7;
  return s;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Line {
  int number;
  std::string key;
  std::string value;
};

[[noreturn]] void bad(const Line& l, const std::string& why) {
  throw ConfigError("config line " + std::to_string(l.number) + " (" + l.key + "): " + why);
}

int to_int(const Line& l) {
  int v = 0;
  auto [p, ec] = std::from_chars(l.value.data(), l.value.data() + l.value.size(), v);
  if (ec != std::errc() || p != l.value.data() + l.value.size()) bad(l, "expected an integer");
  return v;
}

uint64_t to_u64(const Line& l) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(l.value.data(), l.value.data() + l.value.size(), v);
  if (ec != std::errc() || p != l.value.data() + l.value.size()) bad(l, "expected an integer");
  return v;
}

float to_float(const Line& l, const std::string& text) {
  try {
    size_t used = 0;
    const float v = std::stof(text, &used);
    if (used != text.size()) bad(l, "expected a number");
    return v;
  } catch (const std::logic_error&) {
    bad(l, "expected a number");
  }
}

float to_float(const Line& l) { return to_float(l, l.value); }

bool to_bool(const Line& l) {
  if (l.value == "true" || l.value == "1" || l.value == "yes") return true;
  if (l.value == "false" || l.value == "0" || l.value == "no") return false;
  bad(l, "expected true/false");
}

std::vector<float> to_floats(const Line& l) {
  std::vector<float> out;
  std::stringstream ss(l.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_float(l, item));
  }
  return out;
}

void apply_stage(StageConfig& s, const std::string& field, const Line& l) {
  if (field == "embed_kernel") {
    s.embed.kernel_h = s.embed.kernel_w = to_int(l);
  } else if (field == "embed_stride") {
    s.embed.stride_h = s.embed.stride_w = to_int(l);
  } else if (field == "embed_padding") {
    s.embed.pad_h = s.embed.pad_w = to_int(l);
  } else if (field == "dim") {
    s.dim = to_int(l);
  } else if (field == "heads") {
    s.heads = to_int(l);
  } else if (field == "blocks") {
    s.num_blocks = to_int(l);
  } else if (field == "mlp_ratio") {
    s.mlp_ratio = to_float(l);
  } else if (field == "proj_kernel") {
    s.proj_kernel = to_int(l);
  } else {
    bad(l, "unknown stage key");
  }
}

void apply_level(ModelConfig& m, size_t index, const std::string& field, const Line& l) {
  if (index >= m.head.levels.size()) {
    bad(l, "level index beyond head.levels = " + std::to_string(m.head.levels.size()));
  }
  PyramidLevelSpec& p = m.head.levels[index];
  AnchorLevel& a = m.anchors[index];
  if (field == "source") {
    if (l.value == "stage1") p.source = LevelSource::Stage1;
    else if (l.value == "stage2") p.source = LevelSource::Stage2;
    else if (l.value == "stage3") p.source = LevelSource::Stage3;
    else if (l.value == "previous") p.source = LevelSource::Previous;
    else bad(l, "source must be stage1|stage2|stage3|previous");
  } else if (field == "channels") {
    p.channels = to_int(l);
  } else if (field == "lateral_kernel") {
    p.lateral_kernel = to_int(l);
  } else if (field == "mid_channels") {
    p.mid_channels = to_int(l);
  } else if (field == "extra_kernel") {
    p.extra_kernel = to_int(l);
  } else if (field == "extra_stride") {
    p.extra_stride = to_int(l);
  } else if (field == "extra_padding") {
    p.extra_padding = to_int(l);
  } else if (field == "ratios") {
    a.ratios = to_floats(l);
  } else if (field == "min_size") {
    a.min_size = to_float(l);
  } else if (field == "max_size") {
    a.max_size = to_float(l);
  } else {
    bad(l, "unknown level key");
  }
}

}  // namespace

Settings parse_config(std::string_view text) {
  std::vector<Line> lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    const std::string t = trim(raw);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    lines.push_back({number, trim(t.substr(0, eq)), trim(t.substr(eq + 1))});
  }

  Settings s = paper_preset();
  size_t start = 0;
  if (!lines.empty() && lines[0].key == "preset") {
    if (lines[0].value == "paper") s = paper_preset();
    else if (lines[0].value == "tiny") s = tiny_preset();
    else bad(lines[0], "unknown preset");
    start = 1;
  }

  static const std::regex stage_re(R"(stage([123])\.(\w+))");
  static const std::regex level_re(R"(level([1-9][0-9]*)\.(\w+))");
  ModelConfig& m = s.model;
  TrainConfig& t = s.train;
  InferenceConfig& inf = s.infer;
  for (size_t i = start; i < lines.size(); ++i) {
    const Line& l = lines[i];
    const std::string& k = l.key;
    std::smatch match;
    if (std::regex_match(k, match, stage_re)) {
      apply_stage(m.stages[std::stoi(match[1]) - 1], match[2], l);
    } else if (std::regex_match(k, match, level_re)) {
      apply_level(m, static_cast<size_t>(std::stoi(match[1]) - 1), match[2], l);
    } else if (k == "preset") {
      bad(l, "preset must be the first setting");
    } else if (k == "model.input_size") {
      m.input_size = to_int(l);
    } else if (k == "model.num_classes") {
      m.num_classes = to_int(l);
    } else if (k == "model.seed") {
      m.init_seed = to_u64(l);
    } else if (k == "head.levels") {
      const int n = to_int(l);
      if (n < 1) bad(l, "need at least one level");
      m.head.levels.resize(static_cast<size_t>(n));
      m.anchors.resize(static_cast<size_t>(n), AnchorLevel{{2.0f}, 0.0f, 0.0f});
    } else if (k == "head.residual") {
      m.head.residual = to_bool(l);
    } else if (k == "head.attention") {
      m.head.attention = to_bool(l);
    } else if (k == "head.attention_max_tokens") {
      m.head.attention_max_tokens = to_int(l);
    } else if (k == "anchors.variance_center") {
      m.variance_center = to_float(l);
    } else if (k == "anchors.variance_size") {
      m.variance_size = to_float(l);
    } else if (k == "train.lr") {
      t.initial_lr = to_float(l);
    } else if (k == "train.iters") {
      t.total_iters = to_int(l);
    } else if (k == "train.momentum") {
      t.momentum = to_float(l);
    } else if (k == "train.weight_decay") {
      t.weight_decay = to_float(l);
    } else if (k == "train.clip_norm") {
      t.clip_norm = to_float(l);
    } else if (k == "train.loc_weight") {
      t.loc_weight = to_float(l);
    } else if (k == "train.batch_size") {
      t.batch_size = to_int(l);
    } else if (k == "train.seed") {
      t.seed = to_u64(l);
    } else if (k == "train.match_threshold") {
      t.match_threshold = to_float(l);
    } else if (k == "train.neg_ratio") {
      t.neg_ratio = to_float(l);
    } else if (k == "train.augment") {
      t.augment = to_bool(l);
    } else if (k == "train.checkpoint_every") {
      t.checkpoint_every = to_int(l);
    } else if (k == "infer.conf_threshold") {
      inf.conf_threshold = to_float(l);
    } else if (k == "infer.nms_threshold") {
      inf.nms_threshold = to_float(l);
    } else if (k == "infer.top_k_per_class") {
      inf.top_k_per_class = to_int(l);
    } else if (k == "infer.top_k") {
      inf.top_k = to_int(l);
    } else {
      bad(l, "unknown key");
    }
  }
  m.finalize();
  t.validate();
  return s;
}

Settings load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const Settings& settings) {
  const ModelConfig& m = settings.model;
  const TrainConfig& t = settings.train;
  const InferenceConfig& inf = settings.infer;
  std::ostringstream os;
  os << "model.input_size = " << m.input_size << "\n";
  os << "model.num_classes = " << m.num_classes << "\n";
  os << "model.seed = " << m.init_seed << "\n";
  for (int i = 0; i < 3; ++i) {
    const StageConfig& s = m.stages[static_cast<size_t>(i)];
    const std::string p = "stage" + std::to_string(i + 1) + ".";
    os << p << "embed_kernel = " << s.embed.kernel_h << "\n"
       << p << "embed_stride = " << s.embed.stride_h << "\n"
       << p << "embed_padding = " << s.embed.pad_h << "\n"
       << p << "dim = " << s.dim << "\n"
       << p << "heads = " << s.heads << "\n"
       << p << "blocks = " << s.num_blocks << "\n"
       << p << "mlp_ratio = " << s.mlp_ratio << "\n"
       << p << "proj_kernel = " << s.proj_kernel << "\n";
  }
  os << "head.levels = " << m.head.levels.size() << "\n";
  os << "head.residual = " << (m.head.residual ? "true" : "false") << "\n";
  os << "head.attention = " << (m.head.attention ? "true" : "false") << "\n";
  os << "head.attention_max_tokens = " << m.head.attention_max_tokens << "\n";
  for (size_t i = 0; i < m.head.levels.size(); ++i) {
    const auto& l = m.head.levels[i];
    const auto& a = m.anchors[i];
    const std::string p = "level" + std::to_string(i + 1) + ".";
    os << p << "source = " << level_source_name(l.source) << "\n"
       << p << "channels = " << l.channels << "\n"
       << p << "lateral_kernel = " << l.lateral_kernel << "\n"
       << p << "mid_channels = " << l.mid_channels << "\n"
       << p << "extra_kernel = " << l.extra_kernel << "\n"
       << p << "extra_stride = " << l.extra_stride << "\n"
       << p << "extra_padding = " << l.extra_padding << "\n"
       << p << "ratios = ";
    for (size_t r = 0; r < a.ratios.size(); ++r) os << (r ? ", " : "") << a.ratios[r];
    os << "\n" << p << "min_size = " << a.min_size << "\n" << p << "max_size = " << a.max_size << "\n";
  }
  os << "anchors.variance_center = " << m.variance_center << "\n";
  os << "anchors.variance_size = " << m.variance_size << "\n";
  os << "train.lr = " << t.initial_lr << "\n"
     << "train.iters = " << t.total_iters << "\n"
     << "train.momentum = " << t.momentum << "\n"
     << "train.weight_decay = " << t.weight_decay << "\n"
     << "train.clip_norm = " << t.clip_norm << "\n"
     << "train.loc_weight = " << t.loc_weight << "\n"
     << "train.batch_size = " << t.batch_size << "\n"
     << "train.seed = " << t.seed << "\n"
     << "train.match_threshold = " << t.match_threshold << "\n"
     << "train.neg_ratio = " << t.neg_ratio << "\n"
     << "train.augment = " << (t.augment ? "true" : "false") << "\n"
     << "train.checkpoint_every = " << t.checkpoint_every << "\n";
  os << "infer.conf_threshold = " << inf.conf_threshold << "\n"
     << "infer.nms_threshold = " << inf.nms_threshold << "\n"
     << "infer.top_k_per_class = " << inf.top_k_per_class << "\n"
     << "infer.top_k = " << inf.top_k << "\n";
  return os.str();
}

}  // namespace cvtassd
