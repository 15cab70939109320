/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pqaccel/accel.hpp"
#include "pqaccel/quantize.hpp"
#include "pqaccel/rng.hpp"
#include "pqaccel/tensor.hpp"

namespace pqaccel {

// Desk-scale models for exercising the progressive acceleration pipeline:
// a stack of conv(+ReLU) layers ending in a classifier head that predicts a
// class per output position.

enum class LossKind { softmax_ce, squared };

struct ToyLayer {
  ConvLayer dense;
  bool relu = true;
  std::optional<QuantizedLayer> quantized;  // frozen codebooks when set
  ConvLayer frozen_view;  // cached dense reconstruction of the codebooks

  const ConvLayer& effective() const { return quantized ? frozen_view : dense; }
};

struct ToyModel {
  int in_channels = 3;
  int in_h = 16;
  int in_w = 16;
  int classes = 4;  // head output channels, class 0 = background
  LossKind loss = LossKind::softmax_ce;
  std::vector<ToyLayer> layers;

  ToyLayer* find(const std::string& name);
  const ToyLayer* find(const std::string& name) const;
  /// Input feature size each layer sees, by shape propagation.
  std::vector<InputGeometry> layer_inputs() const;
  Tensor4 forward(const Tensor4& x) const;
};

/// Random conv stack: `hidden_layers` conv3x3(+ReLU) layers of width
/// `hidden` (layer names conv0, conv1, ...) and a 1x1 head named `head`.
ToyModel make_toy_model(int channels, int hidden, int classes, int h, int w,
                        int hidden_layers, uint32_t seed);

struct ToySample {
  Tensor4 image;                // 1 x C x H x W
  std::vector<int> label_map;   // class per pixel (softmax_ce)
  Tensor4 target;               // dense target (squared)
};

struct ToyDataset {
  std::vector<ToySample> samples;
  int classes = 0;
};

/// Synthetic scenes: one colored axis-aligned rectangle per image on a
/// noisy background; the label map marks the rectangle's class per pixel.
ToyDataset make_toy_dataset(int count, int classes, int channels, int h, int w,
                            uint32_t seed);

/// Drift-and-flip augmentation for the toy data path: the rectangle content
/// drifts by uniform fractions of max_drift pixels per axis and flips
/// horizontally with probability flip_prob.
ToySample augment_sample(const ToySample& s, Rng& rng, int max_drift,
                         double flip_prob = 0.5);

double toy_loss(const ToyModel& model, const ToyDataset& data);
double toy_accuracy(const ToyModel& model, const ToyDataset& data);

struct FinetuneConfig {
  int steps = 200;
  float lr = 1e-4f;
  int batch = 8;
};

struct FinetuneStats {
  int steps_run = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::vector<std::string> warnings;
};

/// Plain SGD on every layer outside the frozen set; quantized layers are
/// always frozen. Frozen layers (weights and codebooks) are bit-unchanged.
/// Mini-batches are drawn with the seeded RNG; step order is fixed, so the
/// run is deterministic. Throws DataError with a diagnostic on divergence
/// (non-finite loss).
FinetuneStats toy_finetune(ToyModel& model, const std::set<std::string>& frozen,
                           const ToyDataset& data, const FinetuneConfig& cfg,
                           uint32_t seed);

struct StageSpec {
  std::vector<std::string> targets;
  SchemeKind kind = SchemeKind::vq;
  int subspace_dim = 4;
  std::optional<double> alpha;          // budget-solved when set
  std::optional<QuantScheme> explicit_scheme;  // otherwise required
};

struct StageSchedule {
  std::vector<StageSpec> stages;
  FinetuneConfig finetune;
  uint32_t seed = 0;
};

struct StageResult {
  int stage = 0;  // 0 = original model, before any acceleration
  MacReport macs;
  double metric = 0.0;
  std::vector<std::string> quantized_layers;  // cumulative
};

using FinetuneHook =
    std::function<void(ToyModel&, const std::set<std::string>& frozen, int stage)>;
using EvalHook = std::function<double(const ToyModel&)>;

/// Stage-wise acceleration from the original network: each stage quantizes
/// its target layers (codebooks then frozen), the fine-tune hook may update
/// only the remaining original layers, and the eval hook's metric is
/// recorded. A schedule naming a missing layer, or the same layer twice,
/// is a config error. Returns one StageResult per stage plus the baseline.
std::vector<StageResult> progressive_accelerate(ToyModel& model,
                                                const StageSchedule& schedule,
                                                const FinetuneHook& finetune_hook,
                                                const EvalHook& eval_hook);

// Declarative pipeline config (JSON): keys stages[] (targets[], scheme,
// subspace_dim, alpha or params{}), finetune{steps,lr,batch}, seed,
// model{channels,hidden,classes,height,width,hidden_layers,seed},
// dataset{train,eval,augment,seed}.
struct PipelineConfig {
  StageSchedule schedule;
  // toy model shape
  int channels = 3, hidden = 32, classes = 3, height = 12, width = 12,
      hidden_layers = 3;
  uint32_t model_seed = 7;
  // dataset shape
  int train_count = 64, eval_count = 32;
  bool augment = false;
  uint32_t data_seed = 11;
};

PipelineConfig load_pipeline_config(const std::string& path);

}  // namespace pqaccel
