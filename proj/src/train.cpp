// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cvtassd/errors.hpp"
#include "cvtassd/loss.hpp"
#include "cvtassd/optim.hpp"

namespace cvtassd {

std::string format_log_line(const TrainRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld %.6g %.6g %.6g", static_cast<long long>(r.iter),
                static_cast<double>(r.loss), r.lr, r.grad_scale);
  return buf;
}

Batch make_batch(const std::vector<const Sample*>& samples, const AnchorSet& anchors,
                 const ModelConfig& model, const TrainConfig& cfg, Rng* augment_rng) {
  const int r = model.input_size;
  const auto b = static_cast<int64_t>(samples.size());
  Batch out;
  out.images = Tensor({b, 3, r, r});
  auto dst = out.images.data();
  const Variances var{model.variance_center, model.variance_size};
  for (int64_t i = 0; i < b; ++i) {
    const Sample& src = *samples[static_cast<size_t>(i)];
    Rng unused(0);
    Sample s = augment_rng ? augment(src, *augment_rng, r) : augment_option(src, 1, unused, r);
    auto px = s.image.data();
    std::copy(px.begin(), px.end(), dst.begin() + i * 3 * r * r);
    out.matches.push_back(match_anchors(anchors.boxes, s.gts, cfg.match_threshold, var));
  }
  return out;
}

std::vector<TrainRecord> train_loop(Detector& model, const std::vector<Sample>& dataset,
                                    const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (dataset.empty()) throw DataError("train_loop: empty dataset");
  const AnchorSet anchors = generate_anchors(anchor_config(model.config()));
  const ParamList params = model.parameters();
  Sgd opt(cfg.momentum, cfg.weight_decay);

  Rng order_rng(cfg.seed);
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), order_rng);
  size_t cursor = 0;

  std::vector<TrainRecord> log;
  for (int64_t it = 0; it < cfg.total_iters; ++it) {
    std::vector<const Sample*> picked;
    for (int k = 0; k < cfg.batch_size; ++k) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      picked.push_back(&dataset[order[cursor++]]);
    }
    // Per-batch augmentation stream, independent of how batches are produced.
    std::seed_seq seq{static_cast<uint64_t>(cfg.seed), static_cast<uint64_t>(it)};
    Rng aug_rng(seq);
    const Batch batch = make_batch(picked, anchors, model.config(), cfg, cfg.augment ? &aug_rng : nullptr);

    const HeadOutput out = model.forward(batch.images, true);
    const MultiboxLoss loss =
        multibox_loss(out.loc, out.conf, batch.matches, cfg.neg_ratio, cfg.loc_weight);
    const float value = loss.total.item();
    if (!std::isfinite(value)) {
      throw TrainingError("non-finite loss at iteration " + std::to_string(it));
    }
    loss.total.backward();

    TrainRecord rec;
    rec.iter = it;
    rec.loss = value;
    rec.lr = cosine_lr(it, cfg);
    rec.grad_norm = global_grad_norm(params);
    rec.grad_scale = clip_gradients(params, cfg.clip_norm);
    rec.clipped_norm = global_grad_norm(params);
    opt.step(params, rec.lr);
    log.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);

    const int64_t done = it + 1;
    const bool due = done == cfg.total_iters || (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0);
    if (due && hooks.on_checkpoint) hooks.on_checkpoint(done);
  }
  return log;
}

}  // namespace cvtassd
