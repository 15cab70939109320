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

/// Structured codebook: dictionary of unit-norm atoms D, sparse coefficient
/// matrix with exactly rho nonzeros per codeword column, and a per-column
/// codeword assignment. Codeword j is dict * lambda_j.
///
/// Lambda is stored slot-padded: every column owns exactly rho (index, value)
/// slots; columns that hit a zero residual early keep their trailing slots as
/// (0, 0.0) and record the true count in lambda_nnz.
struct DlCodebook {
  int dim = 0;        // d
  int atoms = 0;      // L_dl, atoms < codewords
  int codewords = 0;  // K_dl
  int rho = 0;
  ColMatrix dict;  // dim x atoms, unit-norm columns
  std::vector<int32_t> lambda_idx;  // codewords * rho
  std::vector<float> lambda_val;    // codewords * rho
  std::vector<uint8_t> lambda_nnz;  // per codeword, <= rho
  std::vector<int32_t> assignments;

  const int32_t* lambda_indices(int j) const { return lambda_idx.data() + size_t(j) * rho; }
  const float* lambda_values(int j) const { return lambda_val.data() + size_t(j) * rho; }

  bool operator==(const DlCodebook&) const = default;
};

struct OmpResult {
  std::vector<int32_t> support;
  std::vector<double> coeffs;  // least-squares solution on the support
  bool zero_residual = false;  // residual vanished before rho atoms
  bool rank_deficient = false; // support solved via pseudo-inverse
  /// Selection stopped early: the residual (the input itself when the
  /// support is empty) is orthogonal to every unselected atom.
  bool degenerate = false;
};

/// Orthogonal matching pursuit of x onto the unit-norm dictionary.
/// Greedy atom selection (ties -> lowest index), exact least squares on the
/// selected support, residual kept orthogonal to it.
OmpResult omp(const ColMatrix& dict, const float* x, int rho);

struct DlOptions {
  int iters = 30;
  double rel_tol = 1e-6;  // early exit on relative objective improvement
  /// Explicit initial dictionary (dim x atoms); default is normalized
  /// k-means centroids of the input columns.
  std::optional<ColMatrix> init_dict;
};

struct DlLearnResult {
  DlCodebook codebook;
  std::vector<double> objective_history;  // squared Frobenius, per iteration
  /// Objective after each alternating sub-step (3 per iteration:
  /// assignment, codeword update, dictionary update). Non-increasing.
  std::vector<double> sub_step_history;
  double initial_objective = 0.0;
  bool any_rank_deficient = false;  // some OMP call fell back to pseudo-inverse
};

/// Alternating minimization: nearest-codeword assignment, per-codeword OMP
/// refresh against the mean of its members, then a least-squares dictionary
/// update with atom re-normalization. Every sub-step is guarded so the
/// shared objective never increases. Deterministic under seed.
DlLearnResult dl_learn(const ColMatrix& w, int atoms, int codewords, int rho,
                       uint32_t seed, const DlOptions& options = {});

/// Explicit D * Lambda * Gamma product.
ColMatrix dl_reconstruction(const DlCodebook& cb);

/// The codeword matrix D * Lambda (dim x codewords).
ColMatrix dl_codeword_matrix(const DlCodebook& cb);

double dl_error_sq(const DlCodebook& cb, const ColMatrix& w);

}  // namespace pqaccel
