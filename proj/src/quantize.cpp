/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/quantize.hpp"

#include <sstream>

#include "pqaccel/rng.hpp"

namespace pqaccel {

const char* scheme_kind_name(SchemeKind k) {
  return k == SchemeKind::vq ? "vq" : "dl";
}

SchemeKind scheme_kind_from(const std::string& name) {
  if (name == "vq") return SchemeKind::vq;
  if (name == "dl") return SchemeKind::dl;
  throw ConfigError("unknown scheme kind '" + name + "' (expected vq or dl)");
}

QuantizedLayer quantize_layer(const ConvLayer& layer, const QuantScheme& scheme) {
  PartitionedKernels parts = partition_kernels(layer, scheme.subspace_dim);
  const int n_cols = parts.partition.columns();

  QuantizedLayer q;
  q.name = layer.name;
  q.kernels = layer.kernel_count();
  q.channels = layer.channel_count();
  q.kernel_h = layer.kernel_h();
  q.kernel_w = layer.kernel_w();
  q.stride = layer.stride;
  q.padding = layer.padding;
  q.bias = layer.bias;
  q.partition = parts.partition;
  q.kind = scheme.kind;
  q.scheme = scheme;

  auto warn_clamp = [&q](const char* what, int from, int to) {
    std::ostringstream os;
    os << what << " clamped from " << from << " to " << to
       << " (sub-vector count limit)";
    q.warnings.push_back(os.str());
  };

  if (scheme.kind == SchemeKind::vq) {
    int k = scheme.k_vq;
    if (k < 1) throw ParamError("quantize_layer: k_vq must be >= 1");
    if (k > n_cols) {
      warn_clamp("k_vq", k, n_cols);
      k = n_cols;
    }
    q.scheme.k_vq = k;
    for (int s = 0; s < parts.partition.subspace_count; ++s) {
      KmeansOptions opts;
      opts.max_iter = scheme.kmeans_max_iter;
      KmeansResult km = kmeans(parts.subspaces[s], k,
                               uint32_t(Rng::derive(scheme.seed, uint64_t(s))), opts);
      VqCodebook cb;
      cb.dim = scheme.subspace_dim;
      cb.codewords = k;
      cb.centroids = std::move(km.centroids);
      cb.assignments = std::move(km.assignments);
      q.subspace_error_sq.push_back(vq_error_sq(cb, parts.subspaces[s]));
      q.vq.push_back(std::move(cb));
    }
  } else {
    int k = scheme.k_dl, l = scheme.l_dl, rho = scheme.rho;
    if (k < 2) throw ParamError("quantize_layer: k_dl must be >= 2");
    if (l < 1) throw ParamError("quantize_layer: l_dl must be >= 1");
    if (k > n_cols) {
      if (n_cols < 2)
        throw ParamError("quantize_layer: DL needs at least 2 sub-vectors");
      warn_clamp("k_dl", k, n_cols);
      k = n_cols;
    }
    if (l >= k) {
      warn_clamp("l_dl", l, k - 1);
      l = k - 1;
    }
    int rho_max = std::min(scheme.subspace_dim, l);
    if (rho > rho_max) {
      warn_clamp("rho", rho, rho_max);
      rho = rho_max;
    }
    if (rho < 1) throw ParamError("quantize_layer: rho must be >= 1");
    q.scheme.k_dl = k;
    q.scheme.l_dl = l;
    q.scheme.rho = rho;
    for (int s = 0; s < parts.partition.subspace_count; ++s) {
      DlOptions opts;
      opts.iters = scheme.dl_iters;
      DlLearnResult r = dl_learn(parts.subspaces[s], l, k, rho,
                                 uint32_t(Rng::derive(scheme.seed, uint64_t(s))), opts);
      q.subspace_error_sq.push_back(dl_error_sq(r.codebook, parts.subspaces[s]));
      q.dl.push_back(std::move(r.codebook));
    }
  }
  return q;
}

ConvLayer reconstruct_weights(const QuantizedLayer& q) {
  std::vector<ColMatrix> recon;
  recon.reserve(q.partition.subspace_count);
  for (int s = 0; s < q.partition.subspace_count; ++s) {
    recon.push_back(q.kind == SchemeKind::vq ? vq_reconstruction(q.vq[s])
                                             : dl_reconstruction(q.dl[s]));
  }
  ConvLayer layer;
  layer.name = q.name;
  layer.weights = unpartition_kernels(q.partition, recon, q.channels);
  layer.bias = q.bias;
  layer.stride = q.stride;
  layer.padding = q.padding;
  return layer;
}

}  // namespace pqaccel
