// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cvtassd/cli.hpp"
#include "cvtassd/config.hpp"
#include "cvtassd/data.hpp"
#include "cvtassd/inspect.hpp"

using namespace cvtassd;
namespace fs = std::filesystem;

namespace {

std::string config_path(const char* name) { return (fs::path(CVTASSD_SOURCE_DIR) / "configs" / name).string(); }

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "cvt_assd");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

size_t count_lines(const std::string& s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Inspect, PaperTableListsLevelsAndTotal) {
  const Result r = call({"inspect", "--config", config_path("paper.cfg")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* lvl : {"96x96 x 192", "48x48 x 768", "24x24 x 1024", "12x12 x 256", "6x6 x 256", "3x3 x 256",
                          "1x1 x 256"}) {
    EXPECT_NE(r.out.find(lvl), std::string::npos) << lvl;
  }
  EXPECT_NE(r.out.find("anchors 50656"), std::string::npos);
  const InspectReport rep = inspect_model(paper_preset().model);
  EXPECT_NE(r.out.find("total_params " + std::to_string(rep.total_params)), std::string::npos);
  EXPECT_EQ(call({"inspect", "--config", config_path("paper.cfg")}).out, r.out);
}

TEST(Inspect, TotalsAreLayerSums) {
  const InspectReport rep = inspect_model(tiny_preset().model);
  int64_t p = 0, m = 0;
  for (const auto& l : rep.layers) {
    p += l.params;
    m += l.macs;
  }
  EXPECT_EQ(rep.total_params, p);
  EXPECT_EQ(rep.total_macs, m);
  Detector det(tiny_preset().model);
  EXPECT_EQ(rep.total_params, count_parameters(det.parameters()));
}

TEST(Inspect, StageOneAttentionIsQuadraticInTokens) {
  const ModelConfig m = tiny_preset().model;
  const double big = static_cast<double>(inspect_model(m, 96).stage_attention_macs(1));
  const double small = static_cast<double>(inspect_model(m, 48).stage_attention_macs(1));
  ASSERT_GT(small, 0);
  EXPECT_NEAR(big / small, 16.0, 0.8);
}

TEST(Inspect, ProjKernelOneHasFewerProjectionParams) {
  ModelConfig a = paper_preset().model, b = a;
  for (auto& s : b.stages) s.proj_kernel = 1;
  const InspectReport ra = inspect_model(a), rb = inspect_model(b);
  int64_t pa = 0, pb = 0;
  for (const auto& l : ra.layers)
    if (l.name.find("proj_qkv") != std::string::npos) pa += l.params;
  for (const auto& l : rb.layers)
    if (l.name.find("proj_qkv") != std::string::npos) pb += l.params;
  EXPECT_GT(pb, 0);
  EXPECT_LT(pb, pa);
  EXPECT_LT(rb.total_params, ra.total_params);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(call({"frobnicate"}).code, 1);
  EXPECT_EQ(call({}).code, 1);
  EXPECT_EQ(call({"inspect"}).code, 1);
  const Result missing = call({"train", "--config", config_path("tiny.cfg"), "--data", "/nonexistent/dir"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("data error"), std::string::npos);
  EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(Cli, TrainEvalInferSmoke) {
  const fs::path dir = fs::temp_directory_path() / "cvtassd_cli_smoke";
  fs::remove_all(dir);
  const std::string cfg = config_path("tiny.cfg");
  const Result tr = call({"train", "--config", cfg, "--data", "synth:8:3:1", "--iters", "3", "--out",
                          (dir / "run").string(), "--checkpoint-every", "2"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(count_lines(slurp(dir / "run" / "train.log")), 3u);
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint_2.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint_3.ckpt"));
  const std::string ckpt = (dir / "run" / "final.ckpt").string();
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_EQ(slurp(dir / "run" / "final.ckpt"), slurp(dir / "run" / "checkpoint_3.ckpt"));

  // Same seed, same bytes.
  ASSERT_EQ(call({"train", "--config", cfg, "--data", "synth:8:3:1", "--iters", "3", "--out",
                  (dir / "rerun").string()})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "rerun" / "final.ckpt"), slurp(dir / "run" / "final.ckpt"));
  EXPECT_EQ(slurp(dir / "rerun" / "train.log"), slurp(dir / "run" / "train.log"));

  const Result ev = call({"eval", "--config", cfg, "--checkpoint", ckpt, "--data", "synth:4:3:1", "--out",
                          (dir / "eval").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const std::string kv = slurp(dir / "eval" / "report.kv");
  EXPECT_NE(kv.find("mAP="), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / "detections.txt"));
  const Result ev2 = call({"eval", "--config", cfg, "--checkpoint", ckpt, "--data", "synth:4:3:1", "--out",
                           (dir / "eval2").string()});
  EXPECT_EQ(slurp(dir / "eval2" / "detections.txt"), slurp(dir / "eval" / "detections.txt"));

  const auto sample = synth_dataset(1, 3, 80, 5).front();
  save_image(dir / "img.ppm", sample.image);
  const Result inf = call({"infer", "--config", cfg, "--checkpoint", ckpt, "--image", (dir / "img.ppm").string(),
                           "--out", (dir / "infer").string()});
  ASSERT_EQ(inf.code, 0) << inf.err;
  const Tensor annotated = load_image(dir / "infer" / "annotated.ppm");
  EXPECT_EQ(annotated.shape(), sample.image.shape());
  EXPECT_TRUE(fs::exists(dir / "infer" / "detections.txt"));
  fs::remove_all(dir);
}

TEST(Cli, DrawDetectionsBurnsOutline) {
  const Tensor img = Tensor::zeros({3, 10, 10});
  const std::vector<Detection> d = {{{0.2f, 0.2f, 0.6f, 0.6f}, 0, 0.9f}};
  const Tensor out = draw_detections(img, d);
  EXPECT_EQ(out.at({0, 2, 2}), 1.0f);
  EXPECT_EQ(out.at({0, 5, 5}), 1.0f);
  EXPECT_EQ(out.at({0, 2, 5}), 1.0f);
  EXPECT_EQ(out.at({0, 3, 3}), 0.0f);
  EXPECT_EQ(out.at({1, 2, 2}), 0.0f);
  EXPECT_EQ(img.at({0, 2, 2}), 0.0f);
}
