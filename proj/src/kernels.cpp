/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace pqaccel::kernels {

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelSet& select() {
  const char* req = std::getenv("PQACCEL_KERNEL");
  if (req != nullptr) {
    if (std::strcmp(req, "scalar") == 0) return scalar();
    if (std::strcmp(req, "avx2") == 0 && avx2_available()) return avx2();
    // "auto" or anything unrecognized falls through to detection
  }
  return avx2_available() ? avx2() : scalar();
}

}  // namespace

const KernelSet& active() {
  static const KernelSet& chosen = select();
  return chosen;
}

}  // namespace pqaccel::kernels
