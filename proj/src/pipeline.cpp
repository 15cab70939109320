/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pqaccel/conv.hpp"

namespace pqaccel {

ToyLayer* ToyModel::find(const std::string& name) {
  for (auto& l : layers)
    if (l.dense.name == name) return &l;
  return nullptr;
}

const ToyLayer* ToyModel::find(const std::string& name) const {
  for (const auto& l : layers)
    if (l.dense.name == name) return &l;
  return nullptr;
}

std::vector<InputGeometry> ToyModel::layer_inputs() const {
  std::vector<InputGeometry> geoms;
  int h = in_h, w = in_w;
  for (const auto& l : layers) {
    geoms.push_back({h, w});
    OutputGeometry out = output_geometry(l.effective(), h, w);
    h = out.height;
    w = out.width;
  }
  return geoms;
}

namespace {

Tensor4 relu(Tensor4 t) {
  for (float& v : t.data) v = std::max(v, 0.0f);
  return t;
}

/// Activations a0..aL (a0 = input, aL = head output).
std::vector<Tensor4> forward_all(const ToyModel& model, const Tensor4& x) {
  std::vector<Tensor4> acts;
  acts.reserve(model.layers.size() + 1);
  acts.push_back(x);
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const ToyLayer& l = model.layers[i];
    Tensor4 z = conv_forward(l.effective(), acts.back());
    acts.push_back(l.relu ? relu(std::move(z)) : std::move(z));
  }
  return acts;
}

struct LossGrad {
  double loss = 0.0;
  Tensor4 grad;  // d loss / d output
};

/// Softmax cross-entropy per output position, averaged over positions.
LossGrad softmax_ce(const Tensor4& logits, const std::vector<int>& label_map) {
  const int c_count = logits.channels;
  const int positions = logits.height * logits.width;
  if (int(label_map.size()) != logits.count * positions)
    throw ShapeError("label map does not match head output geometry");
  LossGrad lg;
  lg.grad = Tensor4(logits.count, c_count, logits.height, logits.width);
  const double inv = 1.0 / (double(logits.count) * positions);
  for (int n = 0; n < logits.count; ++n) {
    for (int y = 0; y < logits.height; ++y) {
      for (int x = 0; x < logits.width; ++x) {
        float max_logit = logits.at(n, 0, y, x);
        for (int c = 1; c < c_count; ++c)
          max_logit = std::max(max_logit, logits.at(n, c, y, x));
        double denom = 0.0;
        for (int c = 0; c < c_count; ++c)
          denom += std::exp(double(logits.at(n, c, y, x)) - max_logit);
        const int label = label_map[(size_t(n) * logits.height + y) * logits.width + x];
        if (label < 0 || label >= c_count)
          throw DataError("label " + std::to_string(label) + " out of range");
        const double log_p =
            double(logits.at(n, label, y, x)) - max_logit - std::log(denom);
        lg.loss -= log_p * inv;
        for (int c = 0; c < c_count; ++c) {
          const double p =
              std::exp(double(logits.at(n, c, y, x)) - max_logit) / denom;
          lg.grad.at(n, c, y, x) = float((p - (c == label ? 1.0 : 0.0)) * inv);
        }
      }
    }
  }
  return lg;
}

/// 0.5 * mean squared error over all output elements.
LossGrad squared_loss(const Tensor4& out, const Tensor4& target) {
  if (out.data.size() != target.data.size())
    throw ShapeError("squared loss target shape " + target.shape_str() +
                     " does not match output " + out.shape_str());
  LossGrad lg;
  lg.grad = Tensor4(out.count, out.channels, out.height, out.width);
  const double inv = 1.0 / double(out.data.size());
  for (size_t i = 0; i < out.data.size(); ++i) {
    const double diff = double(out.data[i]) - double(target.data[i]);
    lg.loss += 0.5 * diff * diff * inv;
    lg.grad.data[i] = float(diff * inv);
  }
  return lg;
}

struct ConvGrads {
  Tensor4 weights;
  std::vector<float> bias;
  Tensor4 input;
};

ConvGrads conv_backward(const ConvLayer& layer, const Tensor4& input,
                        const Tensor4& grad_out) {
  ConvGrads g;
  g.weights = Tensor4(layer.kernel_count(), layer.channel_count(),
                      layer.kernel_h(), layer.kernel_w());
  g.bias.assign(size_t(layer.kernel_count()), 0.0f);
  g.input = Tensor4(input.count, input.channels, input.height, input.width);

  const int stride = layer.stride, pad = layer.padding;
  for (int n = 0; n < grad_out.count; ++n) {
    for (int m = 0; m < layer.kernel_count(); ++m) {
      for (int oy = 0; oy < grad_out.height; ++oy) {
        for (int ox = 0; ox < grad_out.width; ++ox) {
          const float go = grad_out.at(n, m, oy, ox);
          if (go == 0.0f) continue;
          g.bias[m] += go;
          for (int c = 0; c < layer.channel_count(); ++c) {
            for (int i = 0; i < layer.kernel_h(); ++i) {
              const int iy = oy * stride - pad + i;
              if (iy < 0 || iy >= input.height) continue;
              for (int j = 0; j < layer.kernel_w(); ++j) {
                const int ix = ox * stride - pad + j;
                if (ix < 0 || ix >= input.width) continue;
                g.weights.at(m, c, i, j) += input.at(n, c, iy, ix) * go;
                g.input.at(n, c, iy, ix) += layer.weights.at(m, c, i, j) * go;
              }
            }
          }
        }
      }
    }
  }
  return g;
}

LossGrad sample_loss(const ToyModel& model, const std::vector<Tensor4>& acts,
                     const ToySample& s) {
  return model.loss == LossKind::softmax_ce
             ? softmax_ce(acts.back(), s.label_map)
             : squared_loss(acts.back(), s.target);
}

}  // namespace

Tensor4 ToyModel::forward(const Tensor4& x) const {
  return forward_all(*this, x).back();
}

ToyModel make_toy_model(int channels, int hidden, int classes, int h, int w,
                        int hidden_layers, uint32_t seed) {
  if (channels < 1 || hidden < 1 || classes < 2 || hidden_layers < 1)
    throw ParamError("make_toy_model: bad shape parameters");
  ToyModel model;
  model.in_channels = channels;
  model.in_h = h;
  model.in_w = w;
  model.classes = classes + 1;  // plus background
  Rng rng(seed);
  int in_c = channels;
  for (int i = 0; i < hidden_layers; ++i) {
    ToyLayer l;
    l.dense.name = "conv" + std::to_string(i);
    l.dense.weights = Tensor4(hidden, in_c, 3, 3);
    const float scale = std::sqrt(2.0f / float(in_c * 9));
    for (float& v : l.dense.weights.data) v = rng.normal_float() * scale;
    l.dense.bias.assign(size_t(hidden), 0.0f);
    l.dense.stride = 1;
    l.dense.padding = 1;
    l.relu = true;
    model.layers.push_back(std::move(l));
    in_c = hidden;
  }
  ToyLayer head;
  head.dense.name = "head";
  head.dense.weights = Tensor4(model.classes, in_c, 1, 1);
  const float scale = std::sqrt(2.0f / float(in_c));
  for (float& v : head.dense.weights.data) v = rng.normal_float() * scale;
  head.dense.bias.assign(size_t(model.classes), 0.0f);
  head.relu = false;
  model.layers.push_back(std::move(head));
  return model;
}

ToyDataset make_toy_dataset(int count, int classes, int channels, int h, int w,
                            uint32_t seed) {
  if (count < 1 || classes < 1 || channels < 1 || h < 4 || w < 4)
    throw ParamError("make_toy_dataset: bad shape parameters");
  ToyDataset data;
  data.classes = classes + 1;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    ToySample s;
    s.image = Tensor4(1, channels, h, w);
    for (float& v : s.image.data) v = rng.normal_float() * 0.1f;
    s.label_map.assign(size_t(h) * w, 0);

    const int cls = 1 + int(rng.uniform_index(size_t(classes)));
    const int bw = 2 + int(rng.uniform_index(size_t(w / 2)));
    const int bh = 2 + int(rng.uniform_index(size_t(h / 2)));
    const int x0 = int(rng.uniform_index(size_t(w - bw)));
    const int y0 = int(rng.uniform_index(size_t(h - bh)));
    for (int y = y0; y < y0 + bh; ++y) {
      for (int x = x0; x < x0 + bw; ++x) {
        s.label_map[size_t(y) * w + x] = cls;
        for (int c = 0; c < channels; ++c) {
          // distinct color signature per class
          const float color = (c % classes) == (cls - 1) ? 1.0f : -0.3f;
          s.image.at(0, c, y, x) += color;
        }
      }
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

ToySample augment_sample(const ToySample& s, Rng& rng, int max_drift,
                         double flip_prob) {
  const int h = s.image.height, w = s.image.width;
  const int dx = int(rng.uniform() * (2.0 * max_drift + 1.0)) - max_drift;
  const int dy = int(rng.uniform() * (2.0 * max_drift + 1.0)) - max_drift;
  const bool flip = rng.uniform() < flip_prob;

  ToySample out;
  out.image = Tensor4(1, s.image.channels, h, w);
  out.label_map.assign(size_t(h) * w, 0);
  out.target = s.target;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sx = (flip ? w - 1 - x : x) - dx;
      int sy = y - dy;
      if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
      for (int c = 0; c < s.image.channels; ++c)
        out.image.at(0, c, y, x) = s.image.at(0, c, sy, sx);
      if (!s.label_map.empty())
        out.label_map[size_t(y) * w + x] = s.label_map[size_t(sy) * w + sx];
    }
  }
  return out;
}

double toy_loss(const ToyModel& model, const ToyDataset& data) {
  double total = 0.0;
  for (const auto& s : data.samples) {
    auto acts = forward_all(model, s.image);
    total += sample_loss(model, acts, s).loss;
  }
  return total / double(data.samples.size());
}

double toy_accuracy(const ToyModel& model, const ToyDataset& data) {
  size_t correct = 0, total = 0;
  for (const auto& s : data.samples) {
    Tensor4 out = model.forward(s.image);
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        int best = 0;
        float best_v = out.at(0, 0, y, x);
        for (int c = 1; c < out.channels; ++c)
          if (out.at(0, c, y, x) > best_v) {
            best_v = out.at(0, c, y, x);
            best = c;
          }
        correct += best == s.label_map[size_t(y) * out.width + x];
        ++total;
      }
    }
  }
  return total > 0 ? double(correct) / double(total) : 0.0;
}

FinetuneStats toy_finetune(ToyModel& model, const std::set<std::string>& frozen,
                           const ToyDataset& data, const FinetuneConfig& cfg,
                           uint32_t seed) {
  if (cfg.steps < 0 || cfg.batch < 1 || !(cfg.lr > 0.0f))
    throw ParamError("toy_finetune: bad steps/lr/batch");
  if (data.samples.empty()) throw ParamError("toy_finetune: empty dataset");

  FinetuneStats stats;
  stats.loss_before = toy_loss(model, data);
  if (cfg.steps == 0) {
    stats.loss_after = stats.loss_before;
    return stats;
  }

  std::vector<ToyLayer*> trainable;
  for (auto& l : model.layers)
    if (!l.quantized && !frozen.count(l.dense.name)) trainable.push_back(&l);
  if (trainable.empty()) {
    stats.warnings.push_back("all layers frozen; nothing to fine-tune");
    stats.loss_after = stats.loss_before;
    return stats;
  }

  Rng rng(seed);
  const int n = int(data.samples.size());
  for (int step = 0; step < cfg.steps; ++step) {
    // one SGD step on a random mini-batch, gradients averaged over it
    std::vector<Tensor4> grad_w(model.layers.size());
    std::vector<std::vector<float>> grad_b(model.layers.size());
    for (size_t i = 0; i < model.layers.size(); ++i) {
      const auto& wshape = model.layers[i].effective().weights;
      grad_w[i] = Tensor4(wshape.count, wshape.channels, wshape.height, wshape.width);
      grad_b[i].assign(model.layers[i].effective().bias.size(), 0.0f);
    }
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const ToySample& s = data.samples[rng.uniform_index(size_t(n))];
      auto acts = forward_all(model, s.image);
      LossGrad lg = sample_loss(model, acts, s);
      batch_loss += lg.loss;
      Tensor4 grad = std::move(lg.grad);
      for (int li = int(model.layers.size()) - 1; li >= 0; --li) {
        const ToyLayer& l = model.layers[li];
        if (l.relu)  // activation mask: outputs that were clipped pass no grad
          for (size_t i = 0; i < grad.data.size(); ++i)
            if (acts[li + 1].data[i] <= 0.0f) grad.data[i] = 0.0f;
        ConvGrads cg = conv_backward(l.effective(), acts[li], grad);
        for (size_t i = 0; i < cg.weights.data.size(); ++i)
          grad_w[li].data[i] += cg.weights.data[i];
        for (size_t i = 0; i < cg.bias.size(); ++i) grad_b[li][i] += cg.bias[i];
        grad = std::move(cg.input);
      }
    }
    batch_loss /= cfg.batch;
    if (!std::isfinite(batch_loss))
      throw DataError("toy_finetune: diverged (non-finite loss) at step " +
                      std::to_string(step));
    const float scale = cfg.lr / float(cfg.batch);
    for (ToyLayer* l : trainable) {
      auto it = std::find_if(model.layers.begin(), model.layers.end(),
                             [&](const ToyLayer& x) { return &x == l; });
      const size_t li = size_t(it - model.layers.begin());
      for (size_t i = 0; i < l->dense.weights.data.size(); ++i)
        l->dense.weights.data[i] -= scale * grad_w[li].data[i];
      for (size_t i = 0; i < l->dense.bias.size(); ++i)
        l->dense.bias[i] -= scale * grad_b[li][i];
    }
    ++stats.steps_run;
  }
  stats.loss_after = toy_loss(model, data);
  return stats;
}

std::vector<StageResult> progressive_accelerate(ToyModel& model,
                                                const StageSchedule& schedule,
                                                const FinetuneHook& finetune_hook,
                                                const EvalHook& eval_hook) {
  // validate the whole schedule up front
  std::set<std::string> scheduled;
  for (const auto& stage : schedule.stages) {
    if (stage.targets.empty())
      throw ConfigError("pipeline stage has no target layers");
    for (const auto& name : stage.targets) {
      const ToyLayer* l = model.find(name);
      if (l == nullptr)
        throw ConfigError("pipeline schedule names unknown layer '" + name + "'");
      if (l->quantized)
        throw ConfigError("pipeline schedule names already-quantized layer '" +
                          name + "'");
      if (!scheduled.insert(name).second)
        throw ConfigError("layer '" + name + "' appears in two stages");
    }
  }

  auto snapshot = [&](int stage_index, const std::set<std::string>& frozen) {
    StageResult r;
    r.stage = stage_index;
    std::vector<InputGeometry> geoms = model.layer_inputs();
    std::vector<MacReport::Entry> entries;
    for (size_t i = 0; i < model.layers.size(); ++i) {
      const ToyLayer& l = model.layers[i];
      MacReport::Entry e;
      e.name = l.dense.name;
      e.group = i + 1 == model.layers.size() ? "head" : "feature";
      e.original_macs = mac_count_dense(l.effective(), geoms[i]);
      e.accelerated_macs = l.quantized
                               ? mac_count_quantized(*l.quantized, geoms[i])
                               : e.original_macs;
      e.quantized = l.quantized.has_value();
      entries.push_back(std::move(e));
    }
    r.macs = make_mac_report(std::move(entries), {});
    r.metric = eval_hook ? eval_hook(model) : 0.0;
    r.quantized_layers.assign(frozen.begin(), frozen.end());
    return r;
  };

  std::vector<StageResult> results;
  std::set<std::string> frozen;
  results.push_back(snapshot(0, frozen));

  for (size_t si = 0; si < schedule.stages.size(); ++si) {
    const StageSpec& stage = schedule.stages[si];
    std::vector<InputGeometry> geoms = model.layer_inputs();
    for (const auto& name : stage.targets) {
      ToyLayer* l = model.find(name);
      size_t li = 0;
      while (model.layers[li].dense.name != name) ++li;

      QuantScheme scheme;
      if (stage.alpha) {
        BudgetSolution sol =
            solve_budget(*stage.alpha, l->dense, geoms[li], stage.subspace_dim,
                         stage.kind, LookupCounting::counted,
                         uint32_t(Rng::derive(schedule.seed, si)));
        scheme = sol.scheme;
      } else if (stage.explicit_scheme) {
        scheme = *stage.explicit_scheme;
        scheme.kind = stage.kind;
        scheme.subspace_dim = stage.subspace_dim;
        scheme.seed = uint32_t(Rng::derive(schedule.seed, si));
      } else {
        throw ConfigError("pipeline stage needs either alpha or explicit params");
      }
      l->quantized = quantize_layer(l->dense, scheme);
      l->frozen_view = reconstruct_weights(*l->quantized);
      frozen.insert(name);
    }
    if (finetune_hook) finetune_hook(model, frozen, int(si + 1));
    results.push_back(snapshot(int(si + 1), frozen));
  }
  return results;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open pipeline config '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("pipeline config '" + path + "': " + e.what());
  }

  PipelineConfig cfg;
  try {
    cfg.schedule.seed = j.value("seed", 0u);
    if (j.contains("finetune")) {
      const auto& ft = j["finetune"];
      cfg.schedule.finetune.steps = ft.value("steps", cfg.schedule.finetune.steps);
      cfg.schedule.finetune.lr = ft.value("lr", cfg.schedule.finetune.lr);
      cfg.schedule.finetune.batch = ft.value("batch", cfg.schedule.finetune.batch);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      cfg.channels = m.value("channels", cfg.channels);
      cfg.hidden = m.value("hidden", cfg.hidden);
      cfg.classes = m.value("classes", cfg.classes);
      cfg.height = m.value("height", cfg.height);
      cfg.width = m.value("width", cfg.width);
      cfg.hidden_layers = m.value("hidden_layers", cfg.hidden_layers);
      cfg.model_seed = m.value("seed", cfg.model_seed);
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      cfg.train_count = d.value("train", cfg.train_count);
      cfg.eval_count = d.value("eval", cfg.eval_count);
      cfg.augment = d.value("augment", cfg.augment);
      cfg.data_seed = d.value("seed", cfg.data_seed);
    }
    for (const auto& js : j.value("stages", nlohmann::json::array())) {
      StageSpec spec;
      for (const auto& t : js.at("targets")) spec.targets.push_back(t.get<std::string>());
      spec.kind = scheme_kind_from(js.value("scheme", std::string("vq")));
      spec.subspace_dim = js.value("subspace_dim", 4);
      if (js.contains("alpha")) {
        spec.alpha = js["alpha"].get<double>();
      } else if (js.contains("params")) {
        QuantScheme qs;
        qs.kind = spec.kind;
        qs.subspace_dim = spec.subspace_dim;
        const auto& p = js["params"];
        qs.k_vq = p.value("k_vq", qs.k_vq);
        qs.l_dl = p.value("l_dl", qs.l_dl);
        qs.k_dl = p.value("k_dl", qs.k_dl);
        qs.rho = p.value("rho", qs.rho);
        spec.explicit_scheme = qs;
      }
      cfg.schedule.stages.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("pipeline config '" + path + "': " + e.what());
  }
  return cfg;
}

}  // namespace pqaccel
