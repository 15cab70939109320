/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "pqaccel/accel.hpp"
#include "pqaccel/conv.hpp"
#include "pqaccel/metrics.hpp"
#include "pqaccel/model_io.hpp"
#include "pqaccel/pipeline.hpp"
#include "pqaccel/quantize.hpp"

namespace {

using namespace pqaccel;
using nlohmann::ordered_json;

double round4(double v) { return std::round(v * 1e4) / 1e4; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void write_or_print(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw DataError("cannot write '" + out_path + "'");
  f << text;
}

// ---------------------------------------------------------------------------
// quantize

struct QuantizeArgs {
  std::string model_dir, out_dir, layers, scheme = "vq";
  double alpha = 0.0;
  int d = 4, k = 0, l = 0, rho = 2;
  uint32_t seed = 0;
  int count_lookups = 1;
  bool json = false;
};

int run_quantize(const QuantizeArgs& a) {
  Model model = load_model(a.model_dir);
  const LookupCounting lc =
      a.count_lookups ? LookupCounting::counted : LookupCounting::free;

  std::vector<std::string> names = split_list(a.layers);
  if (names.empty())
    for (const auto& d : model.layers)
      if (d.target) names.push_back(d.layer.name);
  if (names.empty())
    throw ConfigError("no layers selected: pass --layers or set target=1 in the manifest");

  std::set<std::string> selected(names.begin(), names.end());
  for (const auto& n : selected)
    if (model.find(n) == nullptr)
      throw ConfigError("--layers names unknown layer '" + n + "'");

  QuantizedModel out;
  for (const auto& desc : model.layers) {
    QuantizedModel::Entry e;
    e.desc = desc;
    if (selected.count(desc.layer.name)) {
      QuantScheme scheme;
      if (a.alpha > 0.0) {
        BudgetSolution sol =
            solve_budget(a.alpha, desc.layer, {desc.in_h, desc.in_w}, a.d,
                         scheme_kind_from(a.scheme), lc, a.seed);
        scheme = sol.scheme;
      } else {
        scheme.kind = scheme_kind_from(a.scheme);
        scheme.subspace_dim = a.d;
        scheme.seed = a.seed;
        if (scheme.kind == SchemeKind::vq) {
          if (a.k < 1) throw ConfigError("--scheme vq needs --alpha or --k");
          scheme.k_vq = a.k;
        } else {
          if (a.k < 1 || a.l < 1)
            throw ConfigError("--scheme dl needs --alpha or --k, --l [, --rho]");
          scheme.k_dl = a.k;
          scheme.l_dl = a.l;
          scheme.rho = a.rho;
        }
      }
      e.quantized = quantize_layer(desc.layer, scheme);
      e.desc.layer.weights = Tensor4();  // codebooks replace the dense blob
      e.desc.layer.bias.clear();
      for (const auto& w : e.quantized->warnings)
        std::cerr << "warning: layer " << desc.layer.name << ": " << w << "\n";
    }
    out.entries.push_back(std::move(e));
  }
  save_quantized_model(out, a.out_dir);
  MacReport report = acceleration_report(out, {}, lc);
  std::cout << (a.json ? mac_report_to_json(report) : mac_report_to_text(report));
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string model_dir, quantized_dir, from_report, groups;
  int count_lookups = 1;
  bool json = false;
};

int run_report(const ReportArgs& a) {
  const LookupCounting lc =
      a.count_lookups ? LookupCounting::counted : LookupCounting::free;
  MacReport report;
  if (!a.from_report.empty()) {
    std::ifstream f(a.from_report);
    if (!f) throw DataError("cannot open report '" + a.from_report + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    report = make_mac_report(mac_entries_from_json(ss.str()), split_list(a.groups));
  } else if (!a.quantized_dir.empty()) {
    report = acceleration_report(load_quantized_model(a.quantized_dir),
                                 split_list(a.groups), lc);
  } else if (!a.model_dir.empty()) {
    report = acceleration_report(load_model(a.model_dir), split_list(a.groups));
  } else {
    throw ConfigError("report needs --model, --quantized or --from-report");
  }
  std::cout << (a.json ? mac_report_to_json(report) : mac_report_to_text(report));
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string pred_dir, gt_dir, tags_path;
  double thr = 0.5, low_thr = 0.1;
  bool json = false;
};

int run_eval(const EvalArgs& a) {
  std::vector<ImageDetections> images = load_eval_set(a.pred_dir, a.gt_dir);
  std::vector<ManualTag> tags;
  if (!a.tags_path.empty()) tags = load_manual_tags(a.tags_path);

  std::vector<MatchResult> matches;
  int tp = 0, fp = 0, fn = 0;
  for (const auto& img : images) {
    matches.push_back(match_detections(img.predictions, img.ground_truth, a.thr));
    tp += matches.back().tp;
    fp += matches.back().fp;
    fn += matches.back().fn;
  }
  PrMapResult pr = precision_recall_map(images, a.thr);
  ErrorBreakdown errors = classify_errors(images, matches, tags, a.thr, a.low_thr);

  if (a.json) {
    ordered_json j;
    j["images"] = images.size();
    j["tp"] = tp;
    j["fp"] = fp;
    j["fn"] = fn;
    j["precision"] = round4(pr.precision);
    j["precision_defaulted"] = pr.precision_defaulted;
    j["recall"] = round4(pr.recall);
    ordered_json ap;
    for (const auto& [cls, v] : pr.ap) ap[cls] = round4(v);
    j["ap"] = std::move(ap);
    j["map"] = round4(pr.map);
    ordered_json errs;
    for (int c = 0; c < kCategoryCount; ++c) {
      std::string key(1, error_category_letter(c));
      errs[key] = errors.counts[c];
    }
    j["errors"] = std::move(errs);
    ordered_json scenes;
    scenes["clear"] = ordered_json::array();
    scenes["messy"] = ordered_json::array();
    for (int c = 0; c < kCategoryCount; ++c) {
      scenes["clear"].push_back(errors.clear_counts[c]);
      scenes["messy"].push_back(errors.messy_counts[c]);
    }
    j["errors_by_scene"] = std::move(scenes);
    j["located_share"] = round4(errors.located_share());
    for (const auto& w : pr.warnings) j["warnings"].push_back(w);
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("images %zu  tp %d  fp %d  fn %d\n", images.size(), tp, fp, fn);
    std::printf("precision %.4f%s  recall %.4f  mAP %.4f\n", pr.precision,
                pr.precision_defaulted ? " (no predictions)" : "", pr.recall, pr.map);
    for (const auto& [cls, v] : pr.ap) std::printf("AP %-12s %.4f\n", cls.c_str(), v);
    std::printf("errors:");
    for (int c = 0; c < kCategoryCount; ++c)
      std::printf(" %c=%d", error_category_letter(c), errors.counts[c]);
    std::printf("\nlocated-but-annotation-issue share: %.4f\n", errors.located_share());
    for (const auto& w : pr.warnings) std::printf("warning: %s\n", w.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string config_path, out_path;
  bool json = false;
};

int run_pipeline(const PipelineArgs& a) {
  PipelineConfig cfg = load_pipeline_config(a.config_path);
  ToyModel model = make_toy_model(cfg.channels, cfg.hidden, cfg.classes,
                                  cfg.height, cfg.width, cfg.hidden_layers,
                                  cfg.model_seed);
  ToyDataset train = make_toy_dataset(cfg.train_count, cfg.classes, cfg.channels,
                                      cfg.height, cfg.width, cfg.data_seed);
  ToyDataset eval_set =
      make_toy_dataset(cfg.eval_count, cfg.classes, cfg.channels, cfg.height,
                       cfg.width, cfg.data_seed + 1);
  if (cfg.augment) {
    Rng rng(Rng::derive(cfg.data_seed, 99));
    for (auto& s : train.samples)
      s = augment_sample(s, rng, std::max(1, cfg.width / 4));
  }

  FinetuneHook ft = [&](ToyModel& m, const std::set<std::string>& frozen, int stage) {
    FinetuneStats st = toy_finetune(m, frozen, train, cfg.schedule.finetune,
                                    uint32_t(Rng::derive(cfg.schedule.seed, 1000 + stage)));
    for (const auto& w : st.warnings) std::cerr << "warning: " << w << "\n";
  };
  EvalHook ev = [&](const ToyModel& m) { return toy_accuracy(m, eval_set); };

  std::vector<StageResult> results =
      progressive_accelerate(model, cfg.schedule, ft, ev);

  ordered_json j = ordered_json::array();
  for (const auto& r : results) {
    ordered_json js;
    js["stage"] = r.stage;
    js["metric"] = round4(r.metric);
    js["total_original_macs"] = r.macs.total_original;
    js["total_accelerated_macs"] = r.macs.total_accelerated;
    js["total_reduction_pct"] = round4(r.macs.total_reduction_pct);
    js["quantized_layers"] = r.quantized_layers;
    j.push_back(std::move(js));
  }
  if (a.json || !a.out_path.empty()) {
    write_or_print(j.dump(2) + "\n", a.out_path);
    if (!a.out_path.empty() && !a.json) {
      for (const auto& r : results)
        std::printf("stage %d: accuracy %.4f, accelerated MACs %llu (-%0.2f%%)\n",
                    r.stage, r.metric,
                    (unsigned long long)r.macs.total_accelerated,
                    r.macs.total_reduction_pct);
    }
  } else {
    for (const auto& r : results)
      std::printf("stage %d: accuracy %.4f, accelerated MACs %llu (-%0.2f%%)\n",
                  r.stage, r.metric, (unsigned long long)r.macs.total_accelerated,
                  r.macs.total_reduction_pct);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
  std::string model_dir, layers, alphas = "8,10,12,20";
  int d = 0;
  uint32_t seed = 0;
  int count_lookups = 1;
  bool json = false;
};

int run_compare(const CompareArgs& a) {
  Model model = load_model(a.model_dir);
  const LookupCounting lc =
      a.count_lookups ? LookupCounting::counted : LookupCounting::free;
  std::vector<std::string> names = split_list(a.layers);
  if (names.empty())
    for (const auto& d : model.layers)
      if (d.target) names.push_back(d.layer.name);
  if (names.empty()) throw ConfigError("compare: no layers selected");

  ordered_json rows = ordered_json::array();
  if (!a.json)
    std::printf("%-14s %-6s %-3s %-22s %-12s %-22s %-12s %s\n", "layer", "alpha",
                "d", "vq (k / macs)", "vq err", "dl (l,k,rho / macs)", "dl err",
                "dl<=vq");
  for (const auto& name : names) {
    const LayerDesc* desc = model.find(name);
    if (desc == nullptr) throw ConfigError("compare: unknown layer '" + name + "'");
    const int d = a.d > 0 ? a.d : std::min(32, desc->layer.channel_count());
    for (const auto& alpha_str : split_list(a.alphas)) {
      const double alpha = std::stod(alpha_str);
      InputGeometry g{desc->in_h, desc->in_w};
      BudgetSolution vq_sol =
          solve_budget(alpha, desc->layer, g, d, SchemeKind::vq, lc, a.seed);
      BudgetSolution dl_sol =
          solve_budget(alpha, desc->layer, g, d, SchemeKind::dl, lc, a.seed);
      QuantizedLayer vq_q = quantize_layer(desc->layer, vq_sol.scheme);
      QuantizedLayer dl_q = quantize_layer(desc->layer, dl_sol.scheme);
      double norm_sq = 0.0;
      for (float v : desc->layer.weights.data) norm_sq += double(v) * v;
      const double vq_err = std::sqrt(vq_q.error_sq() / std::max(1e-300, norm_sq));
      const double dl_err = std::sqrt(dl_q.error_sq() / std::max(1e-300, norm_sq));

      if (a.json) {
        ordered_json row;
        row["layer"] = name;
        row["alpha"] = alpha;
        row["d"] = d;
        row["vq_k"] = vq_sol.scheme.k_vq;
        row["vq_macs"] = vq_sol.accelerated_macs;
        row["vq_rel_error"] = round4(vq_err);
        row["dl_l"] = dl_sol.scheme.l_dl;
        row["dl_k"] = dl_sol.scheme.k_dl;
        row["dl_rho"] = dl_sol.scheme.rho;
        row["dl_macs"] = dl_sol.accelerated_macs;
        row["dl_rel_error"] = round4(dl_err);
        row["dl_wins"] = dl_err <= vq_err;
        rows.push_back(std::move(row));
      } else {
        char vq_desc[64], dl_desc[64];
        std::snprintf(vq_desc, sizeof(vq_desc), "k=%d / %llu", vq_sol.scheme.k_vq,
                      (unsigned long long)vq_sol.accelerated_macs);
        std::snprintf(dl_desc, sizeof(dl_desc), "l=%d,k=%d,rho=%d / %llu",
                      dl_sol.scheme.l_dl, dl_sol.scheme.k_dl, dl_sol.scheme.rho,
                      (unsigned long long)dl_sol.accelerated_macs);
        std::printf("%-14s %-6.5g %-3d %-22s %-12.4f %-22s %-12.4f %s\n",
                    name.c_str(), alpha, d, vq_desc, vq_err, dl_desc, dl_err,
                    dl_err <= vq_err ? "yes" : "no");
      }
    }
  }
  if (a.json) std::cout << rows.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weight-sharing acceleration toolkit for convolutional layers"};
  app.require_subcommand(1);

  QuantizeArgs qa;
  auto* q = app.add_subcommand("quantize", "quantize layers of a model");
  q->add_option("--model", qa.model_dir, "model directory")->required();
  q->add_option("--out", qa.out_dir, "output directory")->required();
  q->add_option("--layers", qa.layers, "comma-separated layer names (default: targets)");
  q->add_option("--scheme", qa.scheme, "vq or dl")->check(CLI::IsMember({"vq", "dl"}));
  q->add_option("--alpha", qa.alpha, "target acceleration ratio");
  q->add_option("--d", qa.d, "subspace dimension");
  q->add_option("--k", qa.k, "codebook size (k_vq or k_dl)");
  q->add_option("--l", qa.l, "dictionary size (dl)");
  q->add_option("--rho", qa.rho, "sparsity level (dl)");
  q->add_option("--seed", qa.seed, "rng seed");
  q->add_option("--count-lookups", qa.count_lookups, "charge lookups as 1 MAC (1) or free (0)")
      ->check(CLI::IsMember({0, 1}));
  q->add_flag("--json", qa.json, "machine-readable output");

  ReportArgs ra;
  auto* r = app.add_subcommand("report", "MAC accounting and acceleration roll-ups");
  r->add_option("--model", ra.model_dir, "model directory");
  r->add_option("--quantized", ra.quantized_dir, "quantized model directory");
  r->add_option("--from-report", ra.from_report, "re-aggregate a serialized report");
  r->add_option("--groups", ra.groups, "comma-separated group names to roll up");
  r->add_option("--count-lookups", ra.count_lookups, "charge lookups as 1 MAC (1) or free (0)")
      ->check(CLI::IsMember({0, 1}));
  r->add_flag("--json", ra.json, "machine-readable output");

  EvalArgs ea;
  auto* e = app.add_subcommand("eval", "detection metrics and error taxonomy");
  e->add_option("--pred", ea.pred_dir, "prediction directory")->required();
  e->add_option("--gt", ea.gt_dir, "ground-truth directory")->required();
  e->add_option("--tags", ea.tags_path, "manual tag sidecar file");
  e->add_option("--thr", ea.thr, "IOU threshold");
  e->add_option("--low-thr", ea.low_thr, "ghost/mislocalized band boundary");
  e->add_flag("--json", ea.json, "machine-readable output");

  PipelineArgs pa;
  auto* p = app.add_subcommand("pipeline", "progressive acceleration on a toy model");
  p->add_option("--config", pa.config_path, "pipeline config (JSON)")->required();
  p->add_option("--out", pa.out_path, "write stage results JSON here");
  p->add_flag("--json", pa.json, "machine-readable output");

  CompareArgs ca;
  auto* c = app.add_subcommand("compare", "VQ-vs-DL error/MAC sweep");
  c->add_option("--model", ca.model_dir, "model directory")->required();
  c->add_option("--layers", ca.layers, "comma-separated layer names (default: targets)");
  c->add_option("--alphas", ca.alphas, "comma-separated target ratios");
  c->add_option("--d", ca.d, "subspace dimension (default min(32, N))");
  c->add_option("--seed", ca.seed, "rng seed");
  c->add_option("--count-lookups", ca.count_lookups, "charge lookups as 1 MAC (1) or free (0)")
      ->check(CLI::IsMember({0, 1}));
  c->add_flag("--json", ca.json, "machine-readable output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*q) return run_quantize(qa);
    if (*r) return run_report(ra);
    if (*e) return run_eval(ea);
    if (*p) return run_pipeline(pa);
    if (*c) return run_compare(ca);
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const ParamError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const InfeasibleError& ex) {
    std::cerr << "infeasible budget: " << ex.what() << "\n";
    return 4;
  } catch (const DataError& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return 3;
  } catch (const ShapeError& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
