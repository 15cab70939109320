#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pqaccel/metrics.hpp"

using namespace pqaccel;

namespace {

Box box(const std::string& cls, double x0, double y0, double x1, double y1,
        double conf = 1.0) {
  return Box{cls, x0, y0, x1, y1, conf};
}

Box random_box(Rng& rng) {
  const double x0 = rng.uniform() * 80.0;
  const double y0 = rng.uniform() * 80.0;
  return box(rng.uniform() < 0.5 ? "car" : "ped", x0, y0,
             x0 + 2.0 + rng.uniform() * 30.0, y0 + 2.0 + rng.uniform() * 30.0,
             rng.uniform());
}

}  // namespace

TEST_CASE("iou basics") {
  Box a = box("car", 0, 0, 10, 10);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, box("car", 20, 20, 30, 30)) == 0.0);
  // 5x5 overlap over 100 + 100 - 25
  CHECK(iou(a, box("car", 5, 5, 15, 15)) == doctest::Approx(25.0 / 175.0).epsilon(1e-9));
}

TEST_CASE("iou is symmetric and bounded on random boxes") {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    Box a = random_box(rng), b = random_box(rng);
    const double ab = iou(a, b), ba = iou(b, a);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("box validation") {
  CHECK_THROWS_AS(box("car", 5, 0, 5, 10).validate(), DataError);
  CHECK_THROWS_AS(box("car", 0, 9, 10, 2).validate(), DataError);
  CHECK_NOTHROW(box("car", 0, 0, 1, 1).validate());
}

TEST_CASE("one exact prediction is a clean true positive") {
  auto m = match_detections({box("car", 0, 0, 10, 10, 0.9)},
                            {box("car", 0, 0, 10, 10)});
  CHECK(m.tp == 1);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
  CHECK(m.predictions[0].matched_gt == 0);
}

TEST_CASE("duplicate predictions: one TP plus one duplicate FP") {
  std::vector<Box> preds = {box("car", 0, 0, 10, 10, 0.9),
                            box("car", 0, 0, 10, 10, 0.8)};
  std::vector<Box> gts = {box("car", 0, 0, 10, 10)};
  auto m = match_detections(preds, gts);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.predictions[0].true_positive);
  CHECK(!m.predictions[1].true_positive);

  ErrorBreakdown e = classify_errors({{"img", preds, gts}}, {m});
  CHECK(e.counts[kDuplicate] == 1);
  CHECK(e.total() == 1);
}

TEST_CASE("hand-built scene matches the exhaustive assignment oracle") {
  std::vector<Box> gts = {box("car", 0, 0, 20, 20), box("car", 30, 0, 50, 20),
                          box("ped", 60, 0, 70, 20), box("car", 0, 40, 20, 60)};
  std::vector<Box> preds = {
      box("car", 1, 1, 21, 21, 0.95),   // good hit on gt0
      box("car", 2, 2, 22, 22, 0.90),   // duplicate of gt0
      box("ped", 31, 1, 51, 21, 0.85),  // wrong class over gt1
      box("ped", 60, 1, 70, 21, 0.80),  // good hit on gt2
      box("car", 70, 70, 90, 90, 0.75)  // ghost
  };
  auto m = match_detections(preds, gts);
  CHECK(m.tp == oracles::best_assignment_tp(preds, gts, 0.5));
  CHECK(m.tp == 2);
  CHECK(m.fp == 3);
  CHECK(m.fn == 2);
}

TEST_CASE("greedy matching agrees with brute force on random small scenes") {
  Rng rng(17);
  int agree = 0;
  const int scenes = 100;
  for (int s = 0; s < scenes; ++s) {
    std::vector<Box> preds, gts;
    const int np = 1 + int(rng.uniform_index(5));
    const int ng = 1 + int(rng.uniform_index(5));
    for (int i = 0; i < np; ++i) preds.push_back(random_box(rng));
    for (int i = 0; i < ng; ++i) gts.push_back(random_box(rng));
    auto m = match_detections(preds, gts);
    const int best = oracles::best_assignment_tp(preds, gts, 0.5);
    CHECK(m.tp <= best);  // greedy can never exceed the optimum
    agree += m.tp == best;
  }
  CHECK(agree >= 95);
}

TEST_CASE("TP+FP covers predictions and TP+FN covers ground truth") {
  Rng rng(23);
  for (int s = 0; s < 50; ++s) {
    std::vector<Box> preds, gts;
    const int np = int(rng.uniform_index(6));
    const int ng = int(rng.uniform_index(6));
    for (int i = 0; i < np; ++i) preds.push_back(random_box(rng));
    for (int i = 0; i < ng; ++i) gts.push_back(random_box(rng));
    auto m = match_detections(preds, gts);
    CHECK(m.tp + m.fp == np);
    CHECK(m.tp + m.fn == ng);
  }
}

TEST_CASE("AP staircase fixture: frozen value 34/45") {
  // 3 ground truths, 5 predictions with confidences .9/.8/.7/.6/.5 and
  // TP pattern T,F,T,F,T
  std::vector<ImageDetections> images(1);
  images[0].image_id = "fixture";
  images[0].ground_truth = {box("car", 0, 0, 10, 10),
                            box("car", 100, 100, 110, 110),
                            box("car", 200, 200, 210, 210)};
  images[0].predictions = {
      box("car", 0, 0, 10, 10, 0.9),        // T
      box("car", 500, 500, 510, 510, 0.8),  // F
      box("car", 100, 100, 110, 110, 0.7),  // T
      box("car", 600, 600, 610, 610, 0.6),  // F
      box("car", 200, 200, 210, 210, 0.5),  // T
  };
  PrMapResult pr = precision_recall_map(images);
  // staircase: (1/3)*1 + (1/3)*(2/3) + (1/3)*(3/5) = 34/45
  CHECK(pr.ap.at("car") == doctest::Approx(34.0 / 45.0).epsilon(1e-12));
  CHECK(pr.map == doctest::Approx(34.0 / 45.0).epsilon(1e-12));
  CHECK(pr.recall == doctest::Approx(1.0));
  CHECK(pr.precision == doctest::Approx(0.6));
}

TEST_CASE("perfect detector scores ones") {
  std::vector<ImageDetections> images(2);
  for (int i = 0; i < 2; ++i) {
    images[i].image_id = "img" + std::to_string(i);
    images[i].ground_truth = {box("car", 0, 0, 10, 10), box("ped", 20, 20, 30, 40)};
    images[i].predictions = {box("car", 0, 0, 10, 10, 0.9),
                             box("ped", 20, 20, 30, 40, 0.8)};
  }
  PrMapResult pr = precision_recall_map(images);
  CHECK(pr.precision == 1.0);
  CHECK(pr.recall == 1.0);
  CHECK(pr.map == 1.0);
}

TEST_CASE("zero detections: recall 0, mAP 0, precision defaulted to 1") {
  std::vector<ImageDetections> images(1);
  images[0].image_id = "empty";
  images[0].ground_truth = {box("car", 0, 0, 10, 10)};
  PrMapResult pr = precision_recall_map(images);
  CHECK(pr.recall == 0.0);
  CHECK(pr.map == 0.0);
  CHECK(pr.precision == 1.0);
  CHECK(pr.precision_defaulted);
}

TEST_CASE("classes without ground truth are excluded with a warning") {
  std::vector<ImageDetections> images(1);
  images[0].image_id = "img";
  images[0].ground_truth = {box("car", 0, 0, 10, 10)};
  images[0].predictions = {box("car", 0, 0, 10, 10, 0.9),
                           box("bike", 50, 50, 60, 60, 0.8)};
  PrMapResult pr = precision_recall_map(images);
  CHECK(pr.ap.count("bike") == 0);
  CHECK(pr.ap.count("car") == 1);
  CHECK(pr.map == doctest::Approx(1.0));
  REQUIRE(pr.warnings.size() == 1);
  CHECK(pr.warnings[0].find("bike") != std::string::npos);
}

TEST_CASE("adding a high-confidence correct detection never lowers AP") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ImageDetections> images(1);
    images[0].image_id = "t";
    const int ng = 2 + int(rng.uniform_index(3));
    for (int i = 0; i < ng; ++i)
      images[0].ground_truth.push_back(
          box("car", i * 100.0, 0, i * 100.0 + 10, 10));
    for (int i = 1; i < ng; ++i)  // leave gt0 undetected for now
      if (rng.uniform() < 0.7)
        images[0].predictions.push_back(
            box("car", i * 100.0, 0, i * 100.0 + 10, 10, 0.1 + 0.5 * rng.uniform()));
    if (rng.uniform() < 0.5)
      images[0].predictions.push_back(box("car", 5000, 0, 5010, 10, 0.3));

    const double before = precision_recall_map(images).map;
    images[0].predictions.push_back(box("car", 0, 0, 10, 10, 0.99));
    const double after = precision_recall_map(images).map;
    CHECK(after >= before - 1e-12);
  }
}

TEST_CASE("error taxonomy: band rules") {
  std::vector<Box> gts = {box("car", 0, 0, 10, 10)};

  // IOU ~0.33, correct class -> mislocalized (B)
  {
    std::vector<Box> preds = {box("car", 5, 0, 15, 10, 0.9)};
    auto m = match_detections(preds, gts);
    ErrorBreakdown e = classify_errors({{"img", preds, gts}}, {m});
    CHECK(e.counts[kMislocalized] == 1);
    CHECK(e.counts[kMissed] == 1);  // the gt stayed unmatched
  }
  // IOU below 0.1 everywhere -> ghost (D)
  {
    std::vector<Box> preds = {box("car", 50, 50, 60, 60, 0.9)};
    auto m = match_detections(preds, gts);
    ErrorBreakdown e = classify_errors({{"img", preds, gts}}, {m});
    CHECK(e.counts[kGhost] == 1);
  }
  // IOU above 0.5 with the wrong class -> G
  {
    std::vector<Box> preds = {box("ped", 0, 0, 10, 10, 0.9)};
    auto m = match_detections(preds, gts);
    ErrorBreakdown e = classify_errors({{"img", preds, gts}}, {m});
    CHECK(e.counts[kWrongClass] == 1);
  }
}

TEST_CASE("error taxonomy partitions FP and FN counts") {
  Rng rng(31);
  for (int s = 0; s < 40; ++s) {
    std::vector<Box> preds, gts;
    const int np = int(rng.uniform_index(6));
    const int ng = int(rng.uniform_index(6));
    for (int i = 0; i < np; ++i) preds.push_back(random_box(rng));
    for (int i = 0; i < ng; ++i) gts.push_back(random_box(rng));
    auto m = match_detections(preds, gts);
    ErrorBreakdown e = classify_errors({{"img", preds, gts}}, {m});
    CHECK(e.counts[kMislocalized] + e.counts[kDuplicate] + e.counts[kGhost] +
              e.counts[kWrongClass] + e.counts[kLocatedUnlabeled] ==
          m.fp);
    CHECK(e.counts[kMissed] + e.counts[kMissedOccluded] == m.fn);
  }
}

TEST_CASE("manual tags relabel ghosts and misses; conflicts are rejected") {
  std::vector<Box> gts = {box("car", 0, 0, 10, 10), box("car", 100, 0, 110, 10)};
  std::vector<Box> preds = {box("car", 0, 0, 10, 10, 0.9),     // TP
                            box("car", 50, 50, 60, 60, 0.8)};  // ghost
  auto m = match_detections(preds, gts);
  std::vector<ImageDetections> images = {{"img", preds, gts}};

  std::vector<ManualTag> tags = {{"img", ManualTag::kPred, 1, "A"},
                                 {"img", ManualTag::kGt, 1, "E"},
                                 {"img", ManualTag::kScene, 0, "messy"}};
  ErrorBreakdown e = classify_errors(images, {m}, tags);
  CHECK(e.counts[kLocatedUnlabeled] == 1);
  CHECK(e.counts[kGhost] == 0);
  CHECK(e.counts[kMissedOccluded] == 1);
  CHECK(e.counts[kMissed] == 0);
  CHECK(e.manual_counts[kLocatedUnlabeled] == 1);
  CHECK(e.manual_counts[kMissedOccluded] == 1);
  CHECK(e.messy_counts[kLocatedUnlabeled] == 1);
  CHECK(e.clear_counts[kLocatedUnlabeled] == 0);
  CHECK(e.located_share() == doctest::Approx(0.5));  // A=1 of 2 errors

  // tagging the true positive is a validation error
  std::vector<ManualTag> bad = {{"img", ManualTag::kPred, 0, "A"}};
  CHECK_THROWS_AS(classify_errors(images, {m}, bad), DataError);
  // tagging a matched gt as occluded-missed is too
  std::vector<ManualTag> bad2 = {{"img", ManualTag::kGt, 0, "E"}};
  CHECK_THROWS_AS(classify_errors(images, {m}, bad2), DataError);
}

TEST_CASE("kitti-style parsing and directory loading") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "pqaccel_metrics_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  {
    std::ofstream(dir / "gt" / "000001.txt")
        << "car 0 0 10 10\nped 20 20 30 40\n";
    std::ofstream(dir / "pred" / "000001.txt")
        << "car 0 0 10 10 0.9\n# comment line\nped 20 20 30 40 0.8\n";
    std::ofstream(dir / "gt" / "000002.txt") << "car 5 5 25 25\n";
    std::ofstream(dir / "pred" / "000002.txt") << "";
  }
  auto images = load_eval_set((dir / "pred").string(), (dir / "gt").string());
  REQUIRE(images.size() == 2);
  CHECK(images[0].image_id == "000001");
  CHECK(images[0].predictions.size() == 2);
  CHECK(images[0].predictions[0].confidence == 0.9);
  CHECK(images[0].ground_truth[1].cls == "ped");
  CHECK(images[1].predictions.empty());

  CHECK_THROWS_WITH_AS(parse_detection_text("car 0 0 10\n", "bad.txt"),
                       doctest::Contains("bad.txt:1"), DataError);
  CHECK_THROWS_AS(parse_detection_text("car 10 0 0 10\n", "inv.txt"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("manual tag file parsing") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "pqaccel_tags_test.txt";
  std::ofstream(path) << "img1 pred 2 A\nimg1 gt 0 E\nimg2 scene messy\n";
  auto tags = load_manual_tags(path.string());
  REQUIRE(tags.size() == 3);
  CHECK(tags[0].kind == ManualTag::kPred);
  CHECK(tags[0].index == 2);
  CHECK(tags[0].value == "A");
  CHECK(tags[2].kind == ManualTag::kScene);
  CHECK(tags[2].value == "messy");
  fs::remove(path);
}
