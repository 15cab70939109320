/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/accel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pqaccel/conv.hpp"
#include "pqaccel/kernels.hpp"
#include "pqaccel/parallel.hpp"

namespace pqaccel {

namespace {

void check_codebooks(const QuantizedLayer& q) {
  const size_t want = size_t(q.partition.subspace_count);
  const size_t have = q.kind == SchemeKind::vq ? q.vq.size() : q.dl.size();
  if (have != want) {
    std::ostringstream os;
    os << "quantized layer '" << q.name << "' has " << have
       << " codebooks for " << want << " subspaces";
    throw ShapeError(os.str());
  }
}

void check_accel_input(const QuantizedLayer& q, const Tensor4& input) {
  check_codebooks(q);
  if (input.channels != q.channels) {
    std::ostringstream os;
    os << "input shape " << input.shape_str() << " has " << input.channels
       << " channels but quantized layer '" << q.name << "' expects "
       << q.channels;
    throw ShapeError(os.str());
  }
}

OutputGeometry accel_output_geometry(const QuantizedLayer& q, int in_h, int in_w) {
  ConvLayer probe;
  probe.name = q.name;
  probe.weights = Tensor4(q.kernels, q.channels, q.kernel_h, q.kernel_w);
  probe.bias.assign(size_t(q.kernels), 0.0f);
  probe.stride = q.stride;
  probe.padding = q.padding;
  return output_geometry(probe, in_h, in_w);
}

}  // namespace

Tensor4 accelerated_forward(const QuantizedLayer& q, const Tensor4& input,
                            MacCounter* counter) {
  check_accel_input(q, input);
  const OutputGeometry g = accel_output_geometry(q, input.height, input.width);
  const auto& kern = kernels::active();

  const int d = q.partition.subspace_dim;
  const int s_count = q.partition.subspace_count;
  const int padded_ch = s_count * d;
  const int kh = q.kernel_h, kw = q.kernel_w;
  const int m_count = q.kernels;
  const int taps = kh * kw;
  const int in_h = input.height, in_w = input.width;
  const int pad = q.padding, stride = q.stride;
  const int tab_h = in_h + 2 * pad, tab_w = in_w + 2 * pad;

  // per-subspace codeword counts (uniform in practice; kept general)
  std::vector<int> k_of(s_count);
  for (int s = 0; s < s_count; ++s)
    k_of[s] = q.kind == SchemeKind::vq ? q.vq[s].codewords : q.dl[s].codewords;

  // assignments regrouped tap-major so output assembly gathers over
  // contiguous kernel indices
  std::vector<std::vector<int32_t>> tap_assign(s_count);
  for (int s = 0; s < s_count; ++s) {
    const std::vector<int32_t>& a =
        q.kind == SchemeKind::vq ? q.vq[s].assignments : q.dl[s].assignments;
    tap_assign[s].resize(size_t(taps) * m_count);
    for (int m = 0; m < m_count; ++m)
      for (int t = 0; t < taps; ++t)
        tap_assign[s][size_t(t) * m_count + m] = a[q.partition.column_of(m, t / kw, t % kw)];
  }

  const bool sequential = counter != nullptr;
  Tensor4 out(input.count, m_count, g.height, g.width);

  // position-major sub-vectors (channels contiguous, zero pad channels)
  std::vector<float> sub(size_t(in_h) * in_w * padded_ch);
  std::vector<std::vector<float>> tables(s_count);
  for (int s = 0; s < s_count; ++s)
    tables[s].resize(size_t(tab_h) * tab_w * k_of[s]);

  for (int n = 0; n < input.count; ++n) {
    std::fill(sub.begin(), sub.end(), 0.0f);
    for (int c = 0; c < q.channels; ++c) {
      const float* plane = input.ptr(n, c, 0, 0);
      for (int y = 0; y < in_h; ++y)
        for (int x = 0; x < in_w; ++x)
          sub[(size_t(y) * in_w + x) * padded_ch + c] = plane[size_t(y) * in_w + x];
    }

    // dot-product tables, once per input position
    for (int s = 0; s < s_count; ++s) {
      std::vector<float>& tab = tables[s];
      std::fill(tab.begin(), tab.end(), 0.0f);
      const int k_count = k_of[s];
      auto fill_rows = [&](size_t y0, size_t y1) {
        for (size_t y = y0; y < y1; ++y) {
          for (int x = 0; x < in_w; ++x) {
            const float* vec = sub.data() + (y * in_w + x) * padded_ch + size_t(s) * d;
            float* row =
                tab.data() + ((y + pad) * tab_w + (x + pad)) * size_t(k_count);
            if (q.kind == SchemeKind::vq) {
              const VqCodebook& cb = q.vq[s];
              for (int k = 0; k < k_count; ++k)
                row[k] = kern.dot(cb.centroids.col(k), vec, size_t(d));
            } else {
              const DlCodebook& cb = q.dl[s];
              float atom_dots[256];
              std::vector<float> atom_dots_heap;
              float* adots = atom_dots;
              if (cb.atoms > 256) {
                atom_dots_heap.resize(size_t(cb.atoms));
                adots = atom_dots_heap.data();
              }
              for (int l = 0; l < cb.atoms; ++l)
                adots[l] = kern.dot(cb.dict.col(l), vec, size_t(d));
              for (int k = 0; k < k_count; ++k) {
                float acc = 0.0f;
                const int32_t* idx = cb.lambda_indices(k);
                const float* val = cb.lambda_values(k);
                for (int r = 0; r < cb.rho; ++r) acc += val[r] * adots[idx[r]];
                row[k] = acc;
              }
            }
          }
        }
      };
      if (sequential)
        fill_rows(0, size_t(in_h));
      else
        parallel_for(size_t(in_h), fill_rows);
      if (counter != nullptr) {
        const uint64_t p_in = uint64_t(in_h) * in_w;
        if (q.kind == SchemeKind::vq) {
          counter->multiply_accumulates += p_in * uint64_t(k_count) * d;
        } else {
          counter->multiply_accumulates +=
              p_in * (uint64_t(q.dl[s].atoms) * d + uint64_t(k_count) * q.dl[s].rho);
        }
      }
    }

    // lookup-accumulate assembly
    auto assemble_rows = [&](size_t oy0, size_t oy1) {
      std::vector<float> acc(size_t(m_count), 0.0f);
      for (size_t oy = oy0; oy < oy1; ++oy) {
        for (int ox = 0; ox < g.width; ++ox) {
          std::copy(q.bias.begin(), q.bias.end(), acc.begin());
          for (int t = 0; t < taps; ++t) {
            const int ty = int(oy) * stride + t / kw;
            const int tx = ox * stride + t % kw;
            for (int s = 0; s < s_count; ++s) {
              const float* row =
                  tables[s].data() + (size_t(ty) * tab_w + tx) * k_of[s];
              kern.gather_accum(acc.data(), row,
                                tap_assign[s].data() + size_t(t) * m_count,
                                size_t(m_count));
            }
          }
          for (int m = 0; m < m_count; ++m) out.at(n, m, int(oy), ox) = acc[m];
        }
      }
    };
    if (sequential) {
      assemble_rows(0, size_t(g.height));
      counter->lookup_accumulates +=
          uint64_t(g.positions()) * m_count * taps * s_count;
    } else {
      parallel_for(size_t(g.height), assemble_rows);
    }
  }
  return out;
}

uint64_t mac_count_dense(const ConvLayer& layer, InputGeometry g) {
  layer.validate();
  const long out_h =
      (long(g.height) + 2 * layer.padding - layer.kernel_h()) / layer.stride + 1;
  const long out_w =
      (long(g.width) + 2 * layer.padding - layer.kernel_w()) / layer.stride + 1;
  if (out_h < 1 || out_w < 1 ||
      g.height + 2 * layer.padding < layer.kernel_h() ||
      g.width + 2 * layer.padding < layer.kernel_w())
    return 0;
  return uint64_t(out_h) * out_w * layer.kernel_count() * layer.kernel_h() *
         layer.kernel_w() * layer.channel_count();
}

uint64_t mac_count_quantized(const QuantizedLayer& q, InputGeometry g,
                             LookupCounting lc) {
  check_codebooks(q);
  const long out_h = (long(g.height) + 2 * q.padding - q.kernel_h) / q.stride + 1;
  const long out_w = (long(g.width) + 2 * q.padding - q.kernel_w) / q.stride + 1;
  if (out_h < 1 || out_w < 1 || g.height + 2 * q.padding < q.kernel_h ||
      g.width + 2 * q.padding < q.kernel_w)
    return 0;
  const uint64_t p_in = uint64_t(g.height) * g.width;
  const uint64_t p_out = uint64_t(out_h) * out_w;
  const int d = q.partition.subspace_dim;

  uint64_t tables = 0;
  for (int s = 0; s < q.partition.subspace_count; ++s) {
    if (q.kind == SchemeKind::vq) {
      tables += p_in * uint64_t(q.vq[s].codewords) * d;
    } else {
      tables += p_in * (uint64_t(q.dl[s].atoms) * d +
                        uint64_t(q.dl[s].codewords) * q.dl[s].rho);
    }
  }
  uint64_t lookups = p_out * uint64_t(q.kernels) * q.kernel_h * q.kernel_w *
                     q.partition.subspace_count;
  return tables + (lc == LookupCounting::counted ? lookups : 0);
}

namespace {

struct CostModel {
  uint64_t dense = 0;
  uint64_t p_in = 0;
  uint64_t lookups = 0;  // per the counting convention (0 when free)
  int s_count = 0;
  int d = 0;
  int n_cols = 0;

  uint64_t vq_cost(int k) const {
    return p_in * uint64_t(s_count) * uint64_t(k) * d + lookups;
  }
  uint64_t dl_cost(int l, int k, int rho) const {
    return p_in * uint64_t(s_count) * (uint64_t(l) * d + uint64_t(k) * rho) +
           lookups;
  }
};

CostModel cost_model(const ConvLayer& layer, InputGeometry g, int d,
                     LookupCounting lc) {
  CostModel cm;
  cm.dense = mac_count_dense(layer, g);
  if (cm.dense == 0)
    throw InfeasibleError("layer '" + layer.name +
                          "' has no output positions; nothing to accelerate");
  if (d < 1 || d > layer.channel_count())
    throw ParamError("solve_budget: subspace_dim out of range");
  const long out_h =
      (long(g.height) + 2 * layer.padding - layer.kernel_h()) / layer.stride + 1;
  const long out_w =
      (long(g.width) + 2 * layer.padding - layer.kernel_w()) / layer.stride + 1;
  cm.p_in = uint64_t(g.height) * g.width;
  cm.s_count = (layer.channel_count() + d - 1) / d;
  cm.d = d;
  cm.n_cols = layer.kernel_count() * layer.kernel_h() * layer.kernel_w();
  const uint64_t lookups = uint64_t(out_h) * out_w * layer.kernel_count() *
                           layer.kernel_h() * layer.kernel_w() * cm.s_count;
  cm.lookups = lc == LookupCounting::counted ? lookups : 0;
  return cm;
}

}  // namespace

BudgetSolution solve_budget(double target_alpha, const ConvLayer& layer,
                            InputGeometry g, int subspace_dim, SchemeKind kind,
                            LookupCounting lc, uint32_t seed) {
  if (!(target_alpha > 1.0))
    throw ParamError("solve_budget: target_alpha must be > 1");
  const CostModel cm = cost_model(layer, g, subspace_dim, lc);
  const double budget = double(cm.dense) / target_alpha;

  BudgetSolution sol;
  sol.dense_macs = cm.dense;
  sol.scheme.kind = kind;
  sol.scheme.subspace_dim = subspace_dim;
  sol.scheme.seed = seed;

  if (kind == SchemeKind::vq) {
    int best_k = 0;
    for (int k = cm.n_cols; k >= 1; --k) {
      if (double(cm.vq_cost(k)) <= budget) {
        best_k = k;
        break;
      }
    }
    if (best_k < 1) {
      std::ostringstream os;
      os << "target ratio " << target_alpha << " infeasible for layer '"
         << layer.name << "' with d=" << subspace_dim << " (even k_vq=1 costs "
         << cm.vq_cost(1) << " of " << cm.dense << " dense MACs)";
      throw InfeasibleError(os.str());
    }
    sol.scheme.k_vq = best_k;
    sol.accelerated_macs = cm.vq_cost(best_k);
  } else {
    static const int l_grid[] = {2, 3, 4, 8, 16, 32, 64, 128};
    static const int rho_grid[] = {2, 3, 4};
    int best_k = 0, best_l = 0, best_rho = 0;
    for (int l : l_grid) {
      for (int rho : rho_grid) {
        if (rho > std::min(subspace_dim, l)) continue;
        // largest k with cost <= budget, honoring l < k <= n_cols
        double avail = budget - double(cm.dl_cost(l, 0, rho));
        if (avail < 0) continue;
        int k = int(avail / (double(cm.p_in) * cm.s_count * rho));
        k = std::min(k, cm.n_cols);
        while (k > l && double(cm.dl_cost(l, k, rho)) > budget) --k;
        if (k <= l) continue;
        if (k > best_k || (k == best_k && (l < best_l || (l == best_l && rho < best_rho)))) {
          best_k = k;
          best_l = l;
          best_rho = rho;
        }
      }
    }
    if (best_k == 0) {
      std::ostringstream os;
      os << "target ratio " << target_alpha << " infeasible for layer '"
         << layer.name << "' with d=" << subspace_dim
         << " under the DL grid (L in {2..128}, rho in {2,3,4})";
      throw InfeasibleError(os.str());
    }
    sol.scheme.k_dl = best_k;
    sol.scheme.l_dl = best_l;
    sol.scheme.rho = best_rho;
    sol.accelerated_macs = cm.dl_cost(best_l, best_k, best_rho);
  }
  sol.achieved_ratio = double(cm.dense) / double(sol.accelerated_macs);
  return sol;
}

MacReport make_mac_report(std::vector<MacReport::Entry> entries,
                          const std::vector<std::string>& group_names) {
  MacReport r;
  std::map<std::string, MacReport::Group> groups;
  for (auto& e : entries) {
    if (e.accelerated_macs == 0 && e.original_macs > 0) {
      e.notes.push_back("accelerated count clamped to 1");
      e.accelerated_macs = 1;
    }
    if (e.original_macs == 0) e.notes.push_back("no output positions");
    e.ratio = e.accelerated_macs > 0
                  ? double(e.original_macs) / double(e.accelerated_macs)
                  : 0.0;
    auto& grp = groups[e.group];
    grp.name = e.group;
    grp.original_macs += e.original_macs;
    grp.accelerated_macs += e.accelerated_macs;
    r.total_original += e.original_macs;
    r.total_accelerated += e.accelerated_macs;
  }
  std::vector<std::string> wanted = group_names;
  if (wanted.empty())
    for (const auto& [name, grp] : groups) wanted.push_back(name);
  for (const auto& name : wanted) {
    auto it = groups.find(name);
    if (it == groups.end())
      throw ConfigError("unknown layer group '" + name + "' in report request");
    MacReport::Group grp = it->second;
    grp.share = r.total_original > 0
                    ? double(grp.original_macs) / double(r.total_original)
                    : 0.0;
    grp.reduction_pct =
        grp.original_macs > 0
            ? 100.0 * (1.0 - double(grp.accelerated_macs) / double(grp.original_macs))
            : 0.0;
    r.groups.push_back(std::move(grp));
  }
  r.total_reduction_pct =
      r.total_original > 0
          ? 100.0 * (1.0 - double(r.total_accelerated) / double(r.total_original))
          : 0.0;
  r.layers = std::move(entries);
  return r;
}

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

std::string mac_report_to_json(const MacReport& r) {
  nlohmann::ordered_json j;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& e : r.layers) {
    nlohmann::ordered_json le;
    le["name"] = e.name;
    le["group"] = e.group;
    le["original_macs"] = e.original_macs;
    le["accelerated_macs"] = e.accelerated_macs;
    le["quantized"] = e.quantized;
    le["ratio"] = round4(e.ratio);
    if (!e.notes.empty()) le["notes"] = e.notes;
    j["layers"].push_back(std::move(le));
  }
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& grp : r.groups) {
    nlohmann::ordered_json gj;
    gj["name"] = grp.name;
    gj["original_macs"] = grp.original_macs;
    gj["accelerated_macs"] = grp.accelerated_macs;
    gj["share"] = round4(grp.share);
    gj["reduction_pct"] = round4(grp.reduction_pct);
    j["groups"].push_back(std::move(gj));
  }
  j["total_original_macs"] = r.total_original;
  j["total_accelerated_macs"] = r.total_accelerated;
  j["total_reduction_pct"] = round4(r.total_reduction_pct);
  return j.dump(2) + "\n";
}

std::string mac_report_to_text(const MacReport& r) {
  std::ostringstream os;
  os << "layer                          group            original     accelerated  ratio\n";
  char buf[256];
  for (const auto& e : r.layers) {
    std::snprintf(buf, sizeof(buf), "%-30s %-16s %-12llu %-12llu %.4f\n",
                  e.name.c_str(), e.group.c_str(),
                  (unsigned long long)e.original_macs,
                  (unsigned long long)e.accelerated_macs, e.ratio);
    os << buf;
    for (const auto& note : e.notes) os << "  note: " << note << "\n";
  }
  for (const auto& grp : r.groups) {
    std::snprintf(buf, sizeof(buf),
                  "group %-24s share %.4f reduction %.4f%%\n", grp.name.c_str(),
                  grp.share, grp.reduction_pct);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "total reduction %.4f%% (%llu -> %llu MACs)\n",
                r.total_reduction_pct, (unsigned long long)r.total_original,
                (unsigned long long)r.total_accelerated);
  os << buf;
  return os.str();
}

std::vector<MacReport::Entry> mac_entries_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report JSON parse error: ") + e.what());
  }
  if (!j.contains("layers") || !j["layers"].is_array())
    throw DataError("report JSON is missing the layers array");
  std::vector<MacReport::Entry> entries;
  for (const auto& le : j["layers"]) {
    MacReport::Entry e;
    e.name = le.at("name").get<std::string>();
    e.group = le.value("group", std::string("default"));
    e.original_macs = le.at("original_macs").get<uint64_t>();
    e.accelerated_macs = le.at("accelerated_macs").get<uint64_t>();
    e.quantized = le.value("quantized", e.original_macs != e.accelerated_macs);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace pqaccel
