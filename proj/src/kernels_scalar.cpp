/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/kernels.hpp"

namespace pqaccel::kernels {

namespace {

float dot_scalar(const float* a, const float* b, size_t n) {
  float acc = 0.0f;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

float sqdist_scalar(const float* a, const float* b, size_t n) {
  float acc = 0.0f;
  for (size_t i = 0; i < n; ++i) {
    float d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_strided_scalar(float alpha, const float* x, size_t stride, float* y,
                         size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i * stride];
}

void gather_accum_scalar(float* acc, const float* table, const int32_t* idx,
                         size_t n) {
  for (size_t i = 0; i < n; ++i) acc[i] += table[idx[i]];
}

}  // namespace

const KernelSet& scalar() {
  static const KernelSet set{"scalar",      dot_scalar,
                             sqdist_scalar, axpy_scalar,
                             axpy_strided_scalar, gather_accum_scalar};
  return set;
}

}  // namespace pqaccel::kernels
