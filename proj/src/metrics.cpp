/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace pqaccel {

void Box::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max)) {
    std::ostringstream os;
    os << "degenerate box [" << x_min << "," << y_min << "," << x_max << ","
       << y_max << "] for class '" << cls << "'";
    throw DataError(os.str());
  }
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max) || !std::isfinite(confidence))
    throw DataError("non-finite box coordinates for class '" + cls + "'");
}

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

MatchResult match_detections(const std::vector<Box>& preds,
                             const std::vector<Box>& gts, double thr) {
  if (!(thr > 0.0 && thr < 1.0))
    throw ParamError("match_detections: threshold must lie in (0, 1)");

  MatchResult res;
  res.predictions.resize(preds.size());

  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[a].confidence > preds[b].confidence;
  });

  std::vector<char> gt_matched(gts.size(), 0);
  for (int pi : order) {
    const Box& p = preds[pi];
    MatchOutcome& out = res.predictions[pi];
    // closest ground truth over all classes, for the taxonomy
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      double v = iou(p, gts[gi]);
      if (v > out.best_iou) {
        out.best_iou = v;
        out.best_gt = int(gi);
      }
    }
    if (out.best_gt >= 0) out.best_class_match = gts[out.best_gt].cls == p.cls;

    // greedy class-aware match against unmatched ground truth
    int pick = -1;
    double pick_iou = 0.0;
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_matched[gi] || gts[gi].cls != p.cls) continue;
      double v = iou(p, gts[gi]);
      if (v > pick_iou) {
        pick_iou = v;
        pick = int(gi);
      }
    }
    if (pick >= 0 && pick_iou > thr) {
      out.true_positive = true;
      out.matched_gt = pick;
      gt_matched[pick] = 1;
      ++res.tp;
    } else {
      ++res.fp;
    }
  }
  for (size_t gi = 0; gi < gts.size(); ++gi)
    if (!gt_matched[gi]) {
      res.unmatched_gt.push_back(int(gi));
      ++res.fn;
    }
  return res;
}

namespace {

/// Area under the all-point interpolated PR curve from a confidence-sorted
/// TP/FP sequence.
double average_precision(const std::vector<char>& tp_sorted, int gt_count) {
  if (gt_count == 0) return 0.0;
  const int n = int(tp_sorted.size());
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (int i = 0; i < n; ++i) {
    tp += tp_sorted[i];
    precision[i] = double(tp) / double(i + 1);
    recall[i] = double(tp) / double(gt_count);
  }
  // precision envelope from the right
  for (int i = n - 2; i >= 0; --i)
    precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (int i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

}  // namespace

PrMapResult precision_recall_map(const std::vector<ImageDetections>& images,
                                 double iou_thr) {
  PrMapResult res;

  std::set<std::string> classes;
  std::map<std::string, int> gt_counts;
  for (const auto& img : images) {
    for (const auto& g : img.ground_truth) {
      classes.insert(g.cls);
      ++gt_counts[g.cls];
    }
    for (const auto& p : img.predictions) classes.insert(p.cls);
  }

  int tp_all = 0, pred_all = 0, gt_all = 0;
  for (const auto& cls : classes) {
    // class-filtered per-image matching, then a global confidence sort
    struct Scored {
      double confidence;
      int image;
      int line;
      char tp;
    };
    std::vector<Scored> scored;
    for (int ii = 0; ii < int(images.size()); ++ii) {
      std::vector<Box> preds, gts;
      std::vector<int> pred_lines;
      for (int pi = 0; pi < int(images[ii].predictions.size()); ++pi)
        if (images[ii].predictions[pi].cls == cls) {
          preds.push_back(images[ii].predictions[pi]);
          pred_lines.push_back(pi);
        }
      for (const auto& g : images[ii].ground_truth)
        if (g.cls == cls) gts.push_back(g);
      MatchResult m = match_detections(preds, gts, iou_thr);
      for (int pi = 0; pi < int(preds.size()); ++pi)
        scored.push_back({preds[pi].confidence, ii, pred_lines[pi],
                          char(m.predictions[pi].true_positive)});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) {
                       return a.confidence > b.confidence;  // stable: input order on ties
                     });
    std::vector<char> tps(scored.size());
    int tp_cls = 0;
    for (size_t i = 0; i < scored.size(); ++i) {
      tps[i] = scored[i].tp;
      tp_cls += scored[i].tp;
    }
    const int gt_count = gt_counts.count(cls) ? gt_counts[cls] : 0;
    tp_all += tp_cls;
    pred_all += int(scored.size());
    gt_all += gt_count;
    if (gt_count == 0) {
      res.warnings.push_back("class '" + cls +
                             "' has no ground truth; AP undefined, excluded from mAP");
      continue;
    }
    res.ap[cls] = average_precision(tps, gt_count);
  }

  if (!res.ap.empty()) {
    double sum = 0.0;
    for (const auto& [cls, ap] : res.ap) sum += ap;
    res.map = sum / double(res.ap.size());
  }
  if (pred_all == 0) {
    res.precision = 1.0;  // empty-prediction convention
    res.precision_defaulted = true;
  } else {
    res.precision = double(tp_all) / double(pred_all);
  }
  res.recall = gt_all > 0 ? double(tp_all) / double(gt_all) : 0.0;
  return res;
}

char error_category_letter(int category) { return char('A' + category); }

double ErrorBreakdown::located_share() const {
  const int t = total();
  if (t == 0) return 0.0;
  return double(counts[kLocatedUnlabeled] + counts[kMislocalized] +
                counts[kDuplicate]) /
         double(t);
}

ErrorBreakdown classify_errors(const std::vector<ImageDetections>& images,
                               const std::vector<MatchResult>& matches,
                               const std::vector<ManualTag>& tags, double thr,
                               double low_thr) {
  if (images.size() != matches.size())
    throw ParamError("classify_errors: images and match results differ in length");
  if (!(low_thr > 0.0 && low_thr < thr))
    throw ParamError("classify_errors: low threshold must lie in (0, thr)");

  std::map<std::string, int> image_index;
  for (int i = 0; i < int(images.size()); ++i) image_index[images[i].image_id] = i;

  // per-box automatic categories, then manual overrides
  std::vector<std::vector<int>> pred_cat(images.size());
  std::vector<std::vector<int>> gt_cat(images.size());
  std::vector<bool> messy(images.size(), false);
  ErrorBreakdown out;

  for (size_t ii = 0; ii < images.size(); ++ii) {
    const MatchResult& m = matches[ii];
    if (m.predictions.size() != images[ii].predictions.size())
      throw ParamError("classify_errors: match result does not fit image '" +
                       images[ii].image_id + "'");
    pred_cat[ii].assign(m.predictions.size(), -1);
    gt_cat[ii].assign(images[ii].ground_truth.size(), -1);
    for (size_t pi = 0; pi < m.predictions.size(); ++pi) {
      const MatchOutcome& o = m.predictions[pi];
      if (o.true_positive) continue;
      int cat;
      if (o.best_iou > thr)
        cat = o.best_class_match ? kDuplicate : kWrongClass;
      else if (o.best_iou < low_thr)
        cat = kGhost;
      else
        cat = kMislocalized;
      pred_cat[ii][pi] = cat;
    }
    for (int gi : m.unmatched_gt) gt_cat[ii][gi] = kMissed;
  }

  for (const auto& tag : tags) {
    auto it = image_index.find(tag.image_id);
    if (it == image_index.end())
      throw DataError("manual tag names unknown image '" + tag.image_id + "'");
    const int ii = it->second;
    if (tag.kind == ManualTag::kScene) {
      if (tag.value == "messy")
        messy[ii] = true;
      else if (tag.value == "clear")
        messy[ii] = false;
      else
        throw DataError("scene tag for '" + tag.image_id +
                        "' must be clear or messy, got '" + tag.value + "'");
      continue;
    }
    if (tag.kind == ManualTag::kPred) {
      if (tag.value != "A")
        throw DataError("prediction tags may only assign category A");
      if (tag.index < 0 || tag.index >= int(pred_cat[ii].size()))
        throw DataError("manual tag prediction index out of range for image '" +
                        tag.image_id + "'");
      const int cur = pred_cat[ii][tag.index];
      if (cur == -1)
        throw DataError("manual tag targets a true positive (image '" +
                        tag.image_id + "', prediction " +
                        std::to_string(tag.index) + ")");
      if (cur != kGhost)
        throw DataError(
            "category A may only override a ghost detection (image '" +
            tag.image_id + "', prediction " + std::to_string(tag.index) + ")");
      pred_cat[ii][tag.index] = kLocatedUnlabeled;
    } else {
      if (tag.value != "E")
        throw DataError("ground-truth tags may only assign category E");
      if (tag.index < 0 || tag.index >= int(gt_cat[ii].size()))
        throw DataError("manual tag ground-truth index out of range for image '" +
                        tag.image_id + "'");
      if (gt_cat[ii][tag.index] != kMissed)
        throw DataError("category E may only override a missed object (image '" +
                        tag.image_id + "', ground truth " +
                        std::to_string(tag.index) + ")");
      gt_cat[ii][tag.index] = kMissedOccluded;
    }
  }

  for (size_t ii = 0; ii < images.size(); ++ii) {
    auto& scene = messy[ii] ? out.messy_counts : out.clear_counts;
    for (int cat : pred_cat[ii]) {
      if (cat < 0) continue;
      ++out.counts[cat];
      ++scene[cat];
      if (cat == kLocatedUnlabeled) ++out.manual_counts[cat];
    }
    for (int cat : gt_cat[ii]) {
      if (cat < 0) continue;
      ++out.counts[cat];
      ++scene[cat];
      if (cat == kMissedOccluded) ++out.manual_counts[cat];
    }
  }
  return out;
}

std::vector<Box> parse_detection_text(const std::string& text,
                                      const std::string& context) {
  std::vector<Box> boxes;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Box b;
    if (!(ls >> b.cls >> b.x_min >> b.y_min >> b.x_max >> b.y_max)) {
      std::ostringstream os;
      os << context << ":" << line_no
         << ": expected `class x_min y_min x_max y_max [confidence]`";
      throw DataError(os.str());
    }
    if (!(ls >> b.confidence)) b.confidence = 1.0;
    try {
      b.validate();
    } catch (const DataError& e) {
      std::ostringstream os;
      os << context << ":" << line_no << ": " << e.what();
      throw DataError(os.str());
    }
    boxes.push_back(std::move(b));
  }
  return boxes;
}

std::map<std::string, std::vector<Box>> load_detection_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw DataError("detection directory '" + dir + "' does not exist");
  std::map<std::string, std::vector<Box>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream f(entry.path());
    std::stringstream ss;
    ss << f.rdbuf();
    out[entry.path().stem().string()] =
        parse_detection_text(ss.str(), entry.path().string());
  }
  return out;
}

std::vector<ManualTag> load_manual_tags(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manual tags file '" + path + "'");
  std::vector<ManualTag> tags;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManualTag t;
    std::string kind;
    if (!(ls >> t.image_id >> kind))
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected `image_id pred|gt index A|E` or `image_id scene clear|messy`");
    if (kind == "scene") {
      if (!(ls >> t.value))
        throw DataError(path + ":" + std::to_string(line_no) + ": missing scene value");
      t.kind = ManualTag::kScene;
    } else if (kind == "pred" || kind == "gt") {
      if (!(ls >> t.index >> t.value))
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": expected `image_id pred|gt index A|E`");
      t.kind = kind == "pred" ? ManualTag::kPred : ManualTag::kGt;
    } else {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": unknown tag kind '" + kind + "'");
    }
    tags.push_back(std::move(t));
  }
  return tags;
}

std::vector<ImageDetections> load_eval_set(const std::string& pred_dir,
                                           const std::string& gt_dir) {
  auto preds = load_detection_dir(pred_dir);
  auto gts = load_detection_dir(gt_dir);
  std::set<std::string> ids;
  for (const auto& [id, boxes] : preds) ids.insert(id);
  for (const auto& [id, boxes] : gts) ids.insert(id);
  std::vector<ImageDetections> images;
  for (const auto& id : ids) {
    ImageDetections img;
    img.image_id = id;
    if (auto it = preds.find(id); it != preds.end()) img.predictions = it->second;
    if (auto it = gts.find(id); it != gts.end()) img.ground_truth = it->second;
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace pqaccel
