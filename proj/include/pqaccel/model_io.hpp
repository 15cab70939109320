/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pqaccel/accel.hpp"
#include "pqaccel/quantize.hpp"
#include "pqaccel/tensor.hpp"

namespace pqaccel {

// Model serialization: a versioned text manifest (`model.txt`, stable field
// order) plus one raw little-endian f32 blob per weight/bias array. Layer
// names must be unique and filename-safe.
//
//   pqaccel-model v1
//   layer name=<id> group=<id> target=<0|1> kernels=M channels=N kh=.. kw=..
//         stride=.. pad=.. in_h=.. in_w=.. weights=<file> bias=<file>
//
// in_h/in_w declare the input feature-map size the layer sees; MAC
// accounting and budget solving read them from here.

struct LayerDesc {
  std::string group = "default";
  bool target = false;
  int in_h = 0;
  int in_w = 0;
  ConvLayer layer;

  bool operator==(const LayerDesc&) const = default;
};

struct Model {
  std::vector<LayerDesc> layers;

  const LayerDesc* find(const std::string& name) const;
  LayerDesc* find(const std::string& name);

  bool operator==(const Model&) const = default;
};

void save_model(const Model& model, const std::string& dir);
Model load_model(const std::string& dir);

// Quantized models reuse the manifest format (`model.q.txt`): untouched
// layers keep `layer` lines and dense blobs, accelerated layers get
// `qlayer` lines pointing at a codebook blob. Codebook blob layout, per
// subspace: VQ centroids f32[d*K] then assignments i32[n]; DL dictionary
// f32[d*L], coefficient indices i32[K*rho], values f32[K*rho], per-column
// counts u8[K], then assignments i32[n]. Each subspace payload is followed
// by its f64 squared reconstruction error.

struct QuantizedModel {
  struct Entry {
    LayerDesc desc;  // weights empty when the layer is quantized
    std::optional<QuantizedLayer> quantized;

    const std::string& name() const {
      return quantized ? quantized->name : desc.layer.name;
    }
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries;

  const Entry* find(const std::string& name) const;

  bool operator==(const QuantizedModel&) const = default;
};

void save_quantized_model(const QuantizedModel& model, const std::string& dir);
QuantizedModel load_quantized_model(const std::string& dir);

/// Per-layer MAC accounting for a model (optionally with quantized layers)
/// rolled up into the requested groups.
MacReport acceleration_report(const QuantizedModel& model,
                              const std::vector<std::string>& groups = {},
                              LookupCounting lc = LookupCounting::counted);
MacReport acceleration_report(const Model& model,
                              const std::vector<std::string>& groups = {});

}  // namespace pqaccel
