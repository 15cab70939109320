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
#include <functional>

namespace pqaccel {

/// Worker count for data-parallel loops: PQACCEL_THREADS when set (min 1),
/// otherwise 1.
int worker_count();

/// Runs fn(begin, end) over [0, n) in contiguous chunks, one per worker.
/// Callers must only write disjoint outputs per index, so results are
/// identical for any worker count.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

}  // namespace pqaccel
