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

namespace pqaccel::kernels {

// Data-parallel inner loops used by the convolution, clustering and
// table-lookup paths. Every entry has a scalar reference implementation
// and (on x86-64) an AVX2+FMA variant; the active set is chosen once at
// runtime from CPUID, overridable via PQACCEL_KERNEL={auto,scalar,avx2}.

using DotFn = float (*)(const float* a, const float* b, size_t n);
using SqdistFn = float (*)(const float* a, const float* b, size_t n);
using AxpyFn = void (*)(float alpha, const float* x, float* y, size_t n);
// y[i] += alpha * x[i * stride]
using AxpyStridedFn = void (*)(float alpha, const float* x, size_t stride,
                               float* y, size_t n);
// acc[i] += table[idx[i]]
using GatherAccumFn = void (*)(float* acc, const float* table,
                               const int32_t* idx, size_t n);

struct KernelSet {
  const char* name;
  DotFn dot;
  SqdistFn sqdist;
  AxpyFn axpy;
  AxpyStridedFn axpy_strided;
  GatherAccumFn gather_accum;
};

const KernelSet& scalar();

/// True when this build has an AVX2 variant and the CPU supports it.
bool avx2_available();
/// AVX2 kernel set; only valid to call the members when avx2_available().
const KernelSet& avx2();

/// The set selected for this process (CPUID + PQACCEL_KERNEL override).
const KernelSet& active();

}  // namespace pqaccel::kernels
