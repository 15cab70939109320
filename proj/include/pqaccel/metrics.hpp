/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "pqaccel/common.hpp"

namespace pqaccel {

/// Axis-aligned box in pixel coordinates; confidence is meaningful for
/// predictions only.
struct Box {
  std::string cls;
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  double confidence = 1.0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  void validate() const;  // x_min < x_max, y_min < y_max

  bool operator==(const Box&) const = default;
};

/// Intersection over union. Symmetric, in [0, 1]; 1 iff identical,
/// 0 iff disjoint.
double iou(const Box& a, const Box& b);

struct ImageDetections {
  std::string image_id;
  std::vector<Box> predictions;
  std::vector<Box> ground_truth;
};

/// Per-prediction matching outcome. best_* fields describe the closest
/// ground-truth box over all classes, used by the error taxonomy.
struct MatchOutcome {
  bool true_positive = false;
  int matched_gt = -1;
  double best_iou = 0.0;
  int best_gt = -1;
  bool best_class_match = false;
};

struct MatchResult {
  std::vector<MatchOutcome> predictions;  // input order
  std::vector<int> unmatched_gt;
  int tp = 0, fp = 0, fn = 0;
};

/// Greedy matching in descending confidence (ties keep input order). A
/// prediction takes the highest-IOU unmatched ground truth of its own
/// class; a true positive requires IOU > thr and class equality. Each
/// ground truth is matched at most once.
MatchResult match_detections(const std::vector<Box>& preds,
                             const std::vector<Box>& gts, double thr = 0.5);

struct PrMapResult {
  std::map<std::string, double> ap;  // per class with >= 1 ground truth
  double map = 0.0;
  double precision = 1.0;  // micro, over all predictions
  double recall = 0.0;     // micro, over all ground truth
  bool precision_defaulted = false;  // no predictions: reported as 1
  std::vector<std::string> warnings;  // e.g. classes excluded for zero GT
};

/// Per-class average precision as the area under the all-point
/// interpolated precision-recall curve; mAP is the unweighted class mean.
/// Confidence ties break by input order (image order, then line order).
PrMapResult precision_recall_map(const std::vector<ImageDetections>& images,
                                 double iou_thr = 0.5);

// Error taxonomy. Categories:
//   A located but unlabeled   (manual override of D)
//   B mislocalized            (best IOU in [low, thr])
//   C duplicate               (best IOU > thr on an already-matched GT)
//   D ghost                   (best IOU < low against every GT)
//   E missed, occluded        (manual override of F)
//   F missed
//   G wrong class             (best IOU > thr, class mismatch)
enum ErrorCategory : int {
  kLocatedUnlabeled = 0,  // A
  kMislocalized,          // B
  kDuplicate,             // C
  kGhost,                 // D
  kMissedOccluded,        // E
  kMissed,                // F
  kWrongClass,            // G
  kCategoryCount
};

char error_category_letter(int category);

struct ManualTag {
  std::string image_id;
  enum Kind { kPred, kGt, kScene } kind = kPred;
  int index = 0;            // box index for kPred/kGt
  std::string value;        // "A"/"E" for boxes, "clear"/"messy" for scenes
};

struct ErrorBreakdown {
  std::array<int, kCategoryCount> counts{};
  std::array<int, kCategoryCount> manual_counts{};  // subset set via tags
  std::array<int, kCategoryCount> clear_counts{};
  std::array<int, kCategoryCount> messy_counts{};

  int total() const {
    int t = 0;
    for (int c : counts) t += c;
    return t;
  }
  /// Share of errors that located a real object but the annotation or the
  /// box placement was the issue: (A + B + C) / total.
  double located_share() const;
};

/// Applies the automatic rules above to per-image match results; manual
/// tags may relabel ghosts as A and misses as E, and tag scenes
/// clear/messy (untagged images count as clear). A tag naming a true
/// positive, or conflicting with a different automatic category, is a
/// validation error. low_thr is the ghost/mislocalized band boundary.
ErrorBreakdown classify_errors(const std::vector<ImageDetections>& images,
                               const std::vector<MatchResult>& matches,
                               const std::vector<ManualTag>& tags = {},
                               double thr = 0.5, double low_thr = 0.1);

// KITTI-style text ingestion: `class x_min y_min x_max y_max [confidence]`,
// one object per line, one file per image (image id = file stem).
std::vector<Box> parse_detection_text(const std::string& text,
                                      const std::string& context);
std::map<std::string, std::vector<Box>> load_detection_dir(const std::string& dir);
std::vector<ManualTag> load_manual_tags(const std::string& path);

/// Joins prediction and ground-truth directories on image id (union).
std::vector<ImageDetections> load_eval_set(const std::string& pred_dir,
                                           const std::string& gt_dir);

}  // namespace pqaccel
