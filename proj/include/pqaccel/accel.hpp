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
#include <string>
#include <vector>

#include "pqaccel/quantize.hpp"
#include "pqaccel/tensor.hpp"

namespace pqaccel {

struct InputGeometry {
  int height = 0;
  int width = 0;
};

/// Whether a table lookup-accumulate is charged as one MAC-equivalent
/// (the default) or as free. Table precomputation is always charged, once
/// per input position, so strided layers pay the input-grid cost.
enum class LookupCounting { counted, free };

/// Instrumentation for the reference accelerated execution; one unit per
/// multiply-accumulate in table building and per lookup-accumulate in
/// output assembly. Bias adds are never counted.
struct MacCounter {
  uint64_t multiply_accumulates = 0;
  uint64_t lookup_accumulates = 0;

  uint64_t total(LookupCounting lc) const {
    return multiply_accumulates +
           (lc == LookupCounting::counted ? lookup_accumulates : 0);
  }
};

/// Forward pass through precomputed input-codeword dot-product tables.
/// VQ: per input position and subspace, the K codeword dot products are
/// computed once, then each output accumulates one table value per
/// (kernel, tap, subspace) assignment. DL: atom dot products first, then
/// codeword tables via rho-sparse combinations, then the same lookups.
/// Passing a counter forces the sequential reference path.
Tensor4 accelerated_forward(const QuantizedLayer& q, const Tensor4& input,
                            MacCounter* counter = nullptr);

/// Dense cost: out_positions * M * k_h * k_w * N (true N, pad channels
/// excluded). Returns 0 for geometry with no output positions.
uint64_t mac_count_dense(const ConvLayer& layer, InputGeometry g);

/// Table-based cost. VQ: P_in*S*K*d + lookups. DL: P_in*S*(L*d + K*rho)
/// + lookups, where lookups = P_out*M*k_h*k_w*S and P_in = in_h*in_w.
uint64_t mac_count_quantized(const QuantizedLayer& q, InputGeometry g,
                             LookupCounting lc = LookupCounting::counted);

struct BudgetSolution {
  QuantScheme scheme;
  double achieved_ratio = 0.0;
  uint64_t dense_macs = 0;
  uint64_t accelerated_macs = 0;
};

/// Largest codebook meeting the target acceleration ratio. VQ maximizes
/// K_vq directly; DL maximizes K_dl over a geometric L grid and
/// rho in {2,3,4} (ties: smaller L, then smaller rho). Throws
/// InfeasibleError when even the smallest codebook is too slow.
BudgetSolution solve_budget(double target_alpha, const ConvLayer& layer,
                            InputGeometry g, int subspace_dim, SchemeKind kind,
                            LookupCounting lc = LookupCounting::counted,
                            uint32_t seed = 0);

struct MacReport {
  struct Entry {
    std::string name;
    std::string group;
    uint64_t original_macs = 0;
    uint64_t accelerated_macs = 0;
    bool quantized = false;
    double ratio = 0.0;  // original / accelerated
    std::vector<std::string> notes;
  };
  struct Group {
    std::string name;
    uint64_t original_macs = 0;
    uint64_t accelerated_macs = 0;
    double share = 0.0;          // of total original MACs
    double reduction_pct = 0.0;  // 100 * (1 - accelerated/original)
  };
  std::vector<Entry> layers;
  std::vector<Group> groups;
  uint64_t total_original = 0;
  uint64_t total_accelerated = 0;
  double total_reduction_pct = 0.0;
};

/// Aggregates per-layer entries into group and total roll-ups. group_names
/// selects the groups to report (empty = every group present, sorted);
/// naming an absent group is a config error.
MacReport make_mac_report(std::vector<MacReport::Entry> entries,
                          const std::vector<std::string>& group_names);

/// Stable, 4-decimal serializations consumed by the CLI.
std::string mac_report_to_json(const MacReport& r);
std::string mac_report_to_text(const MacReport& r);

/// Re-reads the per-layer entries of a serialized report (arithmetic
/// re-aggregation path).
std::vector<MacReport::Entry> mac_entries_from_json(const std::string& text);

}  // namespace pqaccel
