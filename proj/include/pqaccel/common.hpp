/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqaccel {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/layer dimension mismatches. Messages name both offending shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid hyperparameters (K out of range, bad sparsity level, ...).
struct ParamError : Error {
  using Error::Error;
};

/// Bad input data: non-finite values, malformed or truncated files.
struct DataError : Error {
  using Error::Error;
};

/// Bad configuration: unknown layers/groups, malformed config files.
struct ConfigError : Error {
  using Error::Error;
};

/// A requested acceleration budget that no codebook size can meet.
struct InfeasibleError : Error {
  using Error::Error;
};

/// Matrix whose columns are the unit of access (each column contiguous).
/// Used for sub-vector matrices, codebooks and dictionaries.
struct ColMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;  // data[c * rows + r]

  ColMatrix() = default;
  ColMatrix(int r, int c) : rows(r), cols(c), data(size_t(r) * size_t(c), 0.0f) {}

  float* col(int c) { return data.data() + size_t(c) * rows; }
  const float* col(int c) const { return data.data() + size_t(c) * rows; }

  float& at(int r, int c) { return data[size_t(c) * rows + r]; }
  float at(int r, int c) const { return data[size_t(c) * rows + r]; }

  bool operator==(const ColMatrix&) const = default;
};

}  // namespace pqaccel
