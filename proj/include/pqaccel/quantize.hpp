/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pqaccel/kmeans.hpp"
#include "pqaccel/partition.hpp"
#include "pqaccel/sparse.hpp"
#include "pqaccel/tensor.hpp"

namespace pqaccel {

enum class SchemeKind { vq, dl };

const char* scheme_kind_name(SchemeKind k);
SchemeKind scheme_kind_from(const std::string& name);

/// Per-layer hyperparameter bundle for either codebook scheme.
struct QuantScheme {
  SchemeKind kind = SchemeKind::vq;
  int subspace_dim = 4;
  // VQ
  int k_vq = 16;
  // DL
  int l_dl = 8;
  int k_dl = 64;
  int rho = 2;
  uint32_t seed = 0;
  int kmeans_max_iter = 100;
  int dl_iters = 30;

  bool operator==(const QuantScheme&) const = default;
};

/// A conv layer with its kernels replaced by per-subspace codebooks.
/// One codebook per subspace, pooling all M*k_h*k_w sub-vectors across
/// kernels and spatial taps. Bias is never quantized.
struct QuantizedLayer {
  std::string name;
  int kernels = 0;   // M
  int channels = 0;  // true N
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int padding = 0;
  std::vector<float> bias;
  SubspacePartition partition;
  SchemeKind kind = SchemeKind::vq;
  std::vector<VqCodebook> vq;  // per subspace when kind == vq
  std::vector<DlCodebook> dl;  // per subspace when kind == dl
  QuantScheme scheme;          // effective (post-clamp) parameters
  std::vector<std::string> warnings;
  std::vector<double> subspace_error_sq;

  double error_sq() const {
    double e = 0.0;
    for (double s : subspace_error_sq) e += s;
    return e;
  }

  bool operator==(const QuantizedLayer&) const = default;
};

/// Learns per-subspace codebooks on the layer's partitioned kernels.
/// Codebook sizes exceeding the sub-vector count are clamped, with a
/// warning recorded on the result. Deterministic under scheme.seed.
QuantizedLayer quantize_layer(const ConvLayer& layer, const QuantScheme& scheme);

/// Dense layer whose kernels are the codebook reconstructions reassembled
/// through the partition layout; bias preserved.
ConvLayer reconstruct_weights(const QuantizedLayer& q);

}  // namespace pqaccel
