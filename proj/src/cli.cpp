// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "cvtassd/checkpoint.hpp"
#include "cvtassd/data.hpp"
#include "cvtassd/errors.hpp"
#include "cvtassd/eval.hpp"
#include "cvtassd/inspect.hpp"
#include "cvtassd/train.hpp"

namespace cvtassd {

namespace fs = std::filesystem;

Tensor draw_detections(const Tensor& image, std::span<const Detection> dets) {
  Tensor out = image.clone();
  const int64_t h = image.dim(1), w = image.dim(2);
  auto px = out.data();
  static constexpr float kPalette[8][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0},
                                           {1, 0, 1}, {0, 1, 1}, {1, 0.5f, 0}, {1, 1, 1}};
  auto put = [&](int64_t x, int64_t y, const float* c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    for (int64_t ch = 0; ch < 3; ++ch) px[static_cast<size_t>((ch * h + y) * w + x)] = c[ch];
  };
  for (const auto& d : dets) {
    const float* c = kPalette[static_cast<size_t>(d.class_id) % 8];
    const int64_t x0 = std::lround(d.box.xmin * w), y0 = std::lround(d.box.ymin * h);
    const int64_t x1 = std::max(x0, std::lround(d.box.xmax * w) - 1);
    const int64_t y1 = std::max(y0, std::lround(d.box.ymax * h) - 1);
    for (int64_t x = x0; x <= x1; ++x) {
      put(x, y0, c);
      put(x, y1, c);
    }
    for (int64_t y = y0; y <= y1; ++y) {
      put(x0, y, c);
      put(x1, y, c);
    }
  }
  return out;
}

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out = ".";
  std::string checkpoint;
  std::string image;
  int iters = 0;
  int64_t seed = -1;
  int checkpoint_every = -1;
  bool no_augment = false;
  bool coco = false;
  bool eleven_point = false;
  int input = 0;
};

std::vector<std::string> class_names(const std::string& data, int num_classes) {
  std::vector<std::string> names;
  const bool voc = !data.starts_with("synth:") && !fs::exists(fs::path(data) / "labels.txt");
  for (int c = 0; c < num_classes; ++c) {
    if (voc && c < 20) {
      names.emplace_back(voc_class_names()[static_cast<size_t>(c)]);
    } else if (!voc && c < 8) {
      names.emplace_back(synth_class_names()[static_cast<size_t>(c)]);
    } else {
      names.push_back("class" + std::to_string(c));
    }
  }
  return names;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

Detector load_model(const Settings& s, const std::string& checkpoint) {
  Detector m(s.model);
  if (!checkpoint.empty()) load_checkpoint(checkpoint, m.parameters());
  return m;
}

int cmd_train(const Options& o, std::ostream& out) {
  Settings s = load_config(o.config);
  if (o.iters > 0) s.train.total_iters = o.iters;
  if (o.seed >= 0) s.train.seed = static_cast<uint64_t>(o.seed);
  if (o.checkpoint_every >= 0) s.train.checkpoint_every = o.checkpoint_every;
  if (o.no_augment) s.train.augment = false;
  s.train.validate();
  const auto data = load_dataset(o.data, s.model.input_size);
  fs::create_directories(o.out);
  Detector model(s.model);
  const ParamList params = model.parameters();
  std::ofstream log(fs::path(o.out) / "train.log", std::ios::binary);
  if (!log) throw DataError("cannot write " + (fs::path(o.out) / "train.log").string());
  TrainHooks hooks;
  hooks.on_record = [&](const TrainRecord& r) { log << format_log_line(r) << '\n' << std::flush; };
  hooks.on_checkpoint = [&](int64_t done) {
    save_checkpoint(fs::path(o.out) / ("checkpoint_" + std::to_string(done) + ".ckpt"), params);
    if (done == s.train.total_iters) save_checkpoint(fs::path(o.out) / "final.ckpt", params);
  };
  const auto records = train_loop(model, data, s.train, hooks);
  write_text(fs::path(o.out) / "config.cfg", format_config(s));
  out << "trained " << records.size() << " iterations, final loss " << records.back().loss << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Settings s = load_config(o.config);
  const Detector model = load_model(s, o.checkpoint);
  const auto data = load_dataset(o.data, s.model.input_size);
  const AnchorSet anchors = generate_anchors(anchor_config(model.config()));
  std::vector<ImageDetections> dets;
  std::vector<EvalImage> gts;
  for (const auto& sm : data) {
    dets.push_back({sm.id, detect_image(model, anchors, sm.image, s.infer)});
    gts.push_back({sm.id, sm.width(), sm.height(), sm.gts});
  }
  fs::create_directories(o.out);
  std::ofstream dump(fs::path(o.out) / "detections.txt", std::ios::binary);
  write_detection_dump(dump, dets);
  const int k = s.model.num_classes;
  const EvalReport rep = o.coco ? coco_ap(dets, gts, k)
                                : voc_ap(dets, gts, k, 0.5,
                                         o.eleven_point ? Interpolation::ElevenPoint : Interpolation::AllPoint);
  const auto names = class_names(o.data, k);
  const std::string table = format_report_table(rep, names);
  write_text(fs::path(o.out) / "report.txt", table);
  write_text(fs::path(o.out) / "report.kv", format_report_kv(rep, names));
  out << table;
  return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const Settings s = load_config(o.config);
  const Detector model = load_model(s, o.checkpoint);
  const Tensor image = load_image(o.image);
  const AnchorSet anchors = generate_anchors(anchor_config(model.config()));
  const ImageDetections dets{fs::path(o.image).stem().string(), detect_image(model, anchors, image, s.infer)};
  fs::create_directories(o.out);
  std::ofstream dump(fs::path(o.out) / "detections.txt", std::ios::binary);
  write_detection_dump(dump, std::span<const ImageDetections>(&dets, 1));
  save_image(fs::path(o.out) / "annotated.ppm", draw_detections(image, dets.detections));
  out << dets.detections.size() << " detections\n";
  return kExitOk;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  const Settings s = load_config(o.config);
  out << format_inspect(inspect_model(s.model, o.input));
  return kExitOk;
}

}  // namespace

int run(std::span<const std::string> argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"CvT-ASSD detector: train, evaluate, run and inspect", "cvt_assd"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "train on a dataset");
  train->add_option("--config", o.config, "model config file")->required()->check(CLI::ExistingFile);
  train->add_option("--data", o.data, "dataset directory or synth:<n>:<classes>:<seed>")->required();
  train->add_option("--out", o.out, "output directory for log and checkpoints");
  train->add_option("--iters", o.iters, "override train.iters");
  train->add_option("--seed", o.seed, "override train.seed");
  train->add_option("--checkpoint-every", o.checkpoint_every, "override train.checkpoint_every");
  train->add_flag("--no-augment", o.no_augment, "disable augmentation");

  auto* eval = app.add_subcommand("eval", "detect over a dataset and report AP");
  eval->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", o.data)->required();
  eval->add_option("--out", o.out);
  eval->add_flag("--coco", o.coco, "COCO-style AP over IoU 0.50:0.95");
  eval->add_flag("--eleven-point", o.eleven_point, "11-point interpolated VOC AP");

  auto* infer = app.add_subcommand("infer", "detect on one PPM image");
  infer->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  infer->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  infer->add_option("--image", o.image)->required();
  infer->add_option("--out", o.out);

  auto* inspect = app.add_subcommand("inspect", "per-layer shapes, parameters and MACs");
  inspect->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  inspect->add_option("--input", o.input, "input resolution (default: configured)");

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (infer->parsed()) return cmd_infer(o, out);
    return cmd_inspect(o, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << '\n';
    return kExitData;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cvtassd
