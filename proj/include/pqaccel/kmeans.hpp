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
#include <optional>
#include <vector>

#include "pqaccel/common.hpp"

namespace pqaccel {

struct KmeansOptions {
  int max_iter = 100;
  /// Absolute improvement threshold; default is 1e-6 * initial objective.
  std::optional<double> tol;
  /// Explicit initial centroids (d x K); default is k-means++ seeding.
  std::optional<ColMatrix> init_centroids;
};

struct KmeansResult {
  ColMatrix centroids;               // d x K, codeword per column
  std::vector<int32_t> assignments;  // one per input column
  std::vector<double> objective_history;  // non-increasing, one per iteration

  double objective() const { return objective_history.back(); }
};

/// Lloyd iterations with k-means++ seeding. Assignment ties break to the
/// lowest centroid index; an emptied cluster is re-seeded from the column
/// with the largest current quantization error. Deterministic under seed.
KmeansResult kmeans(const ColMatrix& x, int k, uint32_t seed,
                    const KmeansOptions& options = {});

/// Conventional vector-quantization codebook for one subspace:
/// codewords are cluster centroids, each column mapped to exactly one.
struct VqCodebook {
  int dim = 0;
  int codewords = 0;  // K_vq
  ColMatrix centroids;               // dim x codewords
  std::vector<int32_t> assignments;  // one per quantized column

  bool operator==(const VqCodebook&) const = default;
};

VqCodebook vq_quantize(const ColMatrix& w, int k_vq, uint32_t seed);

/// Explicit codeword-per-column reconstruction of the quantized matrix.
ColMatrix vq_reconstruction(const VqCodebook& cb);

/// Squared Frobenius reconstruction error of the codebook on matrix w.
double vq_error_sq(const VqCodebook& cb, const ColMatrix& w);

}  // namespace pqaccel
