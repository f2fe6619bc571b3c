// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/inspect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cvtassd/anchors.hpp"
#include "cvtassd/backbone.hpp"

namespace cvtassd {

int64_t InspectReport::params_under(std::string_view prefix) const {
  int64_t s = 0;
  for (const auto& l : layers) {
    if (l.name.starts_with(prefix)) s += l.params;
  }
  return s;
}

int64_t InspectReport::macs_under(std::string_view prefix) const {
  int64_t s = 0;
  for (const auto& l : layers) {
    if (l.name.starts_with(prefix)) s += l.macs;
  }
  return s;
}

int64_t InspectReport::stage_attention_macs(int stage) const {
  const std::string p = "stage" + std::to_string(stage) + ".block";
  int64_t s = 0;
  for (const auto& l : layers) {
    if (l.name.starts_with(p) && l.name.ends_with(".attn.core")) s += l.macs;
  }
  return s;
}

namespace {

int64_t conv_params(const ConvSpec& c, bool bias) {
  return c.out_channels * (c.in_channels / c.groups) * c.kernel_h * c.kernel_w + (bias ? c.out_channels : 0);
}

int64_t conv_macs(const ConvSpec& c, int64_t out_h, int64_t out_w) {
  return out_h * out_w * c.out_channels * (c.in_channels / c.groups) * c.kernel_h * c.kernel_w;
}

int stage_of(LevelSource s) {
  switch (s) {
    case LevelSource::Stage1: return 0;
    case LevelSource::Stage2: return 1;
    case LevelSource::Stage3: return 2;
    case LevelSource::Previous: return -1;
  }
  return -1;
}

}  // namespace

InspectReport inspect_model(const ModelConfig& model_cfg, int64_t input_size) {
  ModelConfig cfg = model_cfg;
  cfg.finalize();
  InspectReport r;
  r.input_size = input_size > 0 ? input_size : cfg.input_size;
  const auto grids = stage_grid_sizes(cfg.stages, r.input_size);
  r.grids.assign(grids.begin(), grids.end());
  auto push = [&](std::string name, Shape out, int64_t params, int64_t macs) {
    r.layers.push_back({std::move(name), std::move(out), params, macs});
  };

  for (size_t i = 0; i < 3; ++i) {
    const StageConfig& s = cfg.stages[i];
    const std::string p = "stage" + std::to_string(i + 1);
    const int64_t g = grids[i], t = g * g, d = s.dim;
    push(p + ".embed.conv", {d, g, g}, conv_params(s.embed, true), conv_macs(s.embed, g, g));
    push(p + ".embed.norm", {t, d}, 2 * d, 0);
    const int64_t k2 = int64_t(s.proj_kernel) * s.proj_kernel;
    const auto hidden = static_cast<int64_t>(std::lround(s.mlp_ratio * s.dim));
    for (int b = 0; b < s.num_blocks; ++b) {
      const std::string bp = p + ".block" + std::to_string(b + 1);
      push(bp + ".norm1", {t, d}, 2 * d, 0);
      push(bp + ".attn.proj_qkv", {3, t, d}, 3 * (d * k2 + d * d + d), 3 * t * (d * k2 + d * d));
      push(bp + ".attn.core", {t, d}, 0, 2 * t * t * d);
      push(bp + ".attn.out", {t, d}, d * d + d, t * d * d);
      push(bp + ".norm2", {t, d}, 2 * d, 0);
      push(bp + ".mlp", {t, d}, d * hidden + hidden + hidden * d + d, 2 * t * d * hidden);
    }
  }

  const auto shapes = pyramid_shapes(cfg, r.input_size);
  const auto built = pyramid_shapes(cfg, cfg.input_size);
  r.pyramid = shapes;
  const bool uses_stage3 = std::any_of(cfg.head.levels.begin(), cfg.head.levels.end(),
                                       [](const PyramidLevelSpec& l) { return l.source == LevelSource::Stage3; });
  if (cfg.head.residual && uses_stage3) {
    const int64_t c = cfg.stages[2].dim, g = grids[2];
    const ConvSpec k3 = ConvSpec::square(static_cast<int>(c), static_cast<int>(c), 3, 1, 1);
    push("head.res", {c, g, g}, 2 * conv_params(k3, false) + 4 * c, 2 * conv_macs(k3, g, g));
  }
  const auto apl = cfg.anchors_per_location();
  int64_t prev = 0;
  for (size_t l = 0; l < cfg.head.levels.size(); ++l) {
    const auto& spec = cfg.head.levels[l];
    const std::string idx = std::to_string(l + 1);
    const int64_t c = spec.channels, f = shapes[l].size;
    const int si = stage_of(spec.source);
    if (si >= 0) {
      const int in = cfg.stages[static_cast<size_t>(si)].dim;
      const ConvSpec lat = ConvSpec::square(in, static_cast<int>(c), spec.lateral_kernel, 1, spec.lateral_kernel / 2);
      push("head.lateral" + idx, {c, f, f}, conv_params(lat, true), conv_macs(lat, f, f));
    } else {
      const ConvSpec c1 = ConvSpec::square(static_cast<int>(prev), spec.mid_channels, 1);
      const ConvSpec c2 = ConvSpec::square(spec.mid_channels, static_cast<int>(c), spec.extra_kernel,
                                           spec.extra_stride, spec.extra_padding);
      const int64_t pf = shapes[l - 1].size;
      push("head.extra" + idx, {c, f, f},
           conv_params(c1, false) + 2 * spec.mid_channels + conv_params(c2, false) + 2 * c,
           conv_macs(c1, pf, pf) + conv_macs(c2, f, f));
    }
    const int64_t built_positions = built[l].size * built[l].size;
    if (cfg.head.attention && built_positions <= cfg.head.attention_max_tokens) {
      const int64_t t = f * f, c8 = std::max<int64_t>(1, c / 8);
      const bool active = t <= cfg.head.attention_max_tokens;
      push("head.au" + idx, {c, f, f}, 2 * (c * c8 + c8) + c * c + c,
           active ? 2 * t * c * c8 + t * c * c + t * t * c8 + t * t * c : 0);
    }
    const ConvSpec loc = ConvSpec::square(static_cast<int>(c), apl[l] * 4, 3, 1, 1);
    const ConvSpec conf = ConvSpec::square(static_cast<int>(c), apl[l] * (cfg.num_classes + 1), 3, 1, 1);
    push("head.pred" + idx + ".loc", {int64_t(apl[l]) * 4, f, f}, conv_params(loc, true), conv_macs(loc, f, f));
    push("head.pred" + idx + ".conf", {int64_t(apl[l]) * (cfg.num_classes + 1), f, f},
         conv_params(conf, true), conv_macs(conf, f, f));
    r.num_anchors += f * f * apl[l];
    prev = c;
  }
  for (const auto& l : r.layers) {
    r.total_params += l.params;
    r.total_macs += l.macs;
  }
  return r;
}

std::string format_inspect(const InspectReport& r) {
  std::ostringstream out;
  char buf[256];
  size_t width = 5;
  for (const auto& l : r.layers) width = std::max(width, l.name.size());
  std::snprintf(buf, sizeof buf, "input %lldx%lld\n", static_cast<long long>(r.input_size),
                static_cast<long long>(r.input_size));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-*s  %-16s %12s %16s\n", static_cast<int>(width), "layer", "output", "params", "macs");
  out << buf;
  for (const auto& l : r.layers) {
    std::snprintf(buf, sizeof buf, "%-*s  %-16s %12lld %16lld\n", static_cast<int>(width), l.name.c_str(),
                  shape_str(l.output).c_str(), static_cast<long long>(l.params), static_cast<long long>(l.macs));
    out << buf;
  }
  out << "\nstage grids:";
  for (auto g : r.grids) out << ' ' << g << 'x' << g;
  out << "\npyramid:\n";
  for (size_t l = 0; l < r.pyramid.size(); ++l) {
    std::snprintf(buf, sizeof buf, "  level%zu %lldx%lld x %lld\n", l + 1, static_cast<long long>(r.pyramid[l].size),
                  static_cast<long long>(r.pyramid[l].size), static_cast<long long>(r.pyramid[l].channels));
    out << buf;
  }
  out << "anchors " << r.num_anchors << '\n';
  out << "total_params " << r.total_params << '\n';
  out << "total_macs " << r.total_macs << '\n';
  return out.str();
}

}  // namespace cvtassd
