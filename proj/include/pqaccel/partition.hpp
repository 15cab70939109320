/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <vector>

#include "pqaccel/common.hpp"
#include "pqaccel/tensor.hpp"

namespace pqaccel {

/// Channel-axis subspace partition of a conv layer's kernel coefficients.
///
/// Sub-vectors are taken along the channel dimension per spatial tap:
/// subspace s covers channels [s*d, (s+1)*d). When d does not divide N the
/// channel axis is zero-padded and the pad count recorded; MAC accounting
/// always uses the true N. Within each subspace matrix, column
/// m * (k_h*k_w) + (i*k_w + j) holds the sub-vector of kernel m at spatial
/// tap (i, j).
struct SubspacePartition {
  int subspace_dim = 0;    // d
  int subspace_count = 0;  // S, with S*d = N + pad_channels
  int pad_channels = 0;
  int kernels = 0;  // M
  int kernel_h = 0;
  int kernel_w = 0;

  int columns() const { return kernels * kernel_h * kernel_w; }
  int column_of(int kernel, int tap_i, int tap_j) const {
    return kernel * (kernel_h * kernel_w) + tap_i * kernel_w + tap_j;
  }

  bool operator==(const SubspacePartition&) const = default;
};

struct PartitionedKernels {
  SubspacePartition partition;
  std::vector<ColMatrix> subspaces;  // S matrices, each d x (M*k_h*k_w)
};

/// Splits the layer's kernels into per-subspace sub-vector matrices.
/// d must satisfy 1 <= d <= N; d > N is a parameter error.
PartitionedKernels partition_kernels(const ConvLayer& layer, int d);

/// Inverse of partition_kernels; reproduces the original weight tensor
/// bit-exactly (zero-padded channels dropped).
Tensor4 unpartition_kernels(const SubspacePartition& partition,
                            const std::vector<ColMatrix>& subspaces,
                            int true_channels);

}  // namespace pqaccel
