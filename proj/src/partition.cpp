/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/partition.hpp"

#include <sstream>

namespace pqaccel {

PartitionedKernels partition_kernels(const ConvLayer& layer, int d) {
  layer.validate();
  const int n = layer.channel_count();
  if (d < 1) throw ParamError("subspace_dim must be >= 1");
  if (d > n) {
    std::ostringstream os;
    os << "subspace_dim " << d << " exceeds channel count " << n << " of layer '"
       << layer.name << "'";
    throw ParamError(os.str());
  }

  PartitionedKernels out;
  SubspacePartition& p = out.partition;
  p.subspace_dim = d;
  p.subspace_count = (n + d - 1) / d;
  p.pad_channels = p.subspace_count * d - n;
  p.kernels = layer.kernel_count();
  p.kernel_h = layer.kernel_h();
  p.kernel_w = layer.kernel_w();

  out.subspaces.reserve(p.subspace_count);
  for (int s = 0; s < p.subspace_count; ++s) {
    ColMatrix w(d, p.columns());
    for (int m = 0; m < p.kernels; ++m) {
      for (int i = 0; i < p.kernel_h; ++i) {
        for (int j = 0; j < p.kernel_w; ++j) {
          float* col = w.col(p.column_of(m, i, j));
          for (int r = 0; r < d; ++r) {
            int c = s * d + r;
            col[r] = c < n ? layer.weights.at(m, c, i, j) : 0.0f;
          }
        }
      }
    }
    out.subspaces.push_back(std::move(w));
  }
  return out;
}

Tensor4 unpartition_kernels(const SubspacePartition& p,
                            const std::vector<ColMatrix>& subspaces,
                            int true_channels) {
  if (int(subspaces.size()) != p.subspace_count)
    throw ShapeError("subspace matrix count does not match partition");
  Tensor4 w(p.kernels, true_channels, p.kernel_h, p.kernel_w);
  for (int s = 0; s < p.subspace_count; ++s) {
    const ColMatrix& ws = subspaces[s];
    if (ws.rows != p.subspace_dim || ws.cols != p.columns()) {
      std::ostringstream os;
      os << "subspace " << s << " is " << ws.rows << "x" << ws.cols
         << ", expected " << p.subspace_dim << "x" << p.columns();
      throw ShapeError(os.str());
    }
    for (int m = 0; m < p.kernels; ++m) {
      for (int i = 0; i < p.kernel_h; ++i) {
        for (int j = 0; j < p.kernel_w; ++j) {
          const float* col = ws.col(p.column_of(m, i, j));
          for (int r = 0; r < p.subspace_dim; ++r) {
            int c = s * p.subspace_dim + r;
            if (c < true_channels) w.at(m, c, i, j) = col[r];
          }
        }
      }
    }
  }
  return w;
}

}  // namespace pqaccel
