/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/kernels.hpp"

// This translation unit is compiled with -mavx2 -mfma; nothing here may be
// called unless avx2_available() reported true.

#if defined(__x86_64__) || defined(_M_X64)
#define PQACCEL_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define PQACCEL_HAVE_AVX2_TU 0
#endif

namespace pqaccel::kernels {

#if PQACCEL_HAVE_AVX2_TU

namespace {

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
  return _mm_cvtss_f32(s);
}

float dot_avx2(const float* a, const float* b, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 va = _mm256_loadu_ps(a + i);
    __m256 vb = _mm256_loadu_ps(b + i);
    acc = _mm256_fmadd_ps(va, vb, acc);
  }
  float sum = hsum256(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

float sqdist_avx2(const float* a, const float* b, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    acc = _mm256_fmadd_ps(d, d, acc);
  }
  float sum = hsum256(acc);
  for (; i < n; ++i) {
    float d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy_avx2(float alpha, const float* x, float* y, size_t n) {
  __m256 va = _mm256_set1_ps(alpha);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_strided_avx2(float alpha, const float* x, size_t stride, float* y,
                       size_t n) {
  __m256 va = _mm256_set1_ps(alpha);
  const __m256i lanes = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256i vstride = _mm256_set1_epi32(int(stride));
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256i base = _mm256_set1_epi32(int(i * stride));
    __m256i offs = _mm256_add_epi32(base, _mm256_mullo_epi32(lanes, vstride));
    __m256 vx = _mm256_i32gather_ps(x, offs, 4);
    __m256 vy = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, vx, vy));
  }
  for (; i < n; ++i) y[i] += alpha * x[i * stride];
}

void gather_accum_avx2(float* acc, const float* table, const int32_t* idx,
                       size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256i vi = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(idx + i));
    __m256 vt = _mm256_i32gather_ps(table, vi, 4);
    _mm256_storeu_ps(acc + i, _mm256_add_ps(_mm256_loadu_ps(acc + i), vt));
  }
  for (; i < n; ++i) acc[i] += table[idx[i]];
}

}  // namespace

const KernelSet& avx2() {
  static const KernelSet set{"avx2",      dot_avx2,
                             sqdist_avx2, axpy_avx2,
                             axpy_strided_avx2, gather_accum_avx2};
  return set;
}

#else

const KernelSet& avx2() { return scalar(); }

#endif  // PQACCEL_HAVE_AVX2_TU

}  // namespace pqaccel::kernels
