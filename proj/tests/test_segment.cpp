// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "datagen.hpp"
#include "errors.hpp"
#include "segment.hpp"
#include "trainmon.hpp"

using namespace seqembed;
namespace fs = std::filesystem;

namespace {

SeqModelParams toy_model(Index input_dim, Index hidden_dim, std::uint64_t seed) {
  SeqModelConfig config;
  config.input_dim = input_dim;
  config.hidden_dim = hidden_dim;
  config.encoder_steps = 4;
  config.decoder_steps = 4;
  config.seed = seed;
  return init_params(config);
}

Matrix tile_rows(const Matrix& block, Index reps) {
  Matrix out(block.rows() * reps, block.cols());
  for (Index r = 0; r < reps; ++r) out.middleRows(r * block.rows(), block.rows()) = block;
  return out;
}

// Window-mean scan fixture with two well-separated feature rays.
ScanResult ray_scan() {
  ScanResult scan;
  scan.frames = 12;
  const RowVec a{{10.0, 0.0}};
  const RowVec b{{0.0, 10.0}};
  const Index starts[4] = {0, 2, 4, 6};
  for (int i = 0; i < 4; ++i) {
    WindowFeatures wf;
    wf.start = starts[i];
    wf.features = i < 2 ? a : b;
    scan.windows.push_back(std::move(wf));
  }
  return scan;
}

PODBasis basis_of(const ScanResult& scan, Index rows_per) {
  Matrix stacked(static_cast<Index>(scan.windows.size()) * rows_per,
                 scan.windows.front().features.cols());
  for (std::size_t i = 0; i < scan.windows.size(); ++i)
    stacked.middleRows(static_cast<Index>(i) * rows_per, rows_per) =
        scan.windows[i].features;
  return pod(stacked);
}

bool same_pattern(const std::vector<std::int64_t>& a, std::size_t a_from,
                  const std::vector<std::int64_t>& b, std::size_t b_from,
                  std::size_t len) {
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = i + 1; j < len; ++j)
      if ((a[a_from + i] == a[a_from + j]) != (b[b_from + i] == b[b_from + j]))
        return false;
  return true;
}

}  // namespace

TEST_CASE("window starts follow the documented arithmetic") {
  const SeqModelParams model = toy_model(2, 4, 41);
  ScanConfig cfg;
  cfg.t_e = 50;
  cfg.t_d = 50;
  cfg.stride = 10;
  const Matrix seq = Matrix::Random(200, 2);
  const ScanResult scan = scan_windows(seq, model, cfg);
  REQUIRE(scan.windows.size() == 11);
  CHECK(scan.frames == 200);
  for (std::size_t i = 0; i < scan.windows.size(); ++i)
    CHECK(scan.windows[i].start == static_cast<Index>(10 * i));

  cfg.stride = 200;
  CHECK(scan_windows(seq, model, cfg).windows.size() == 1);
}

TEST_CASE("shrinking the stride never loses windows") {
  const SeqModelParams model = toy_model(2, 4, 42);
  const Matrix seq = Matrix::Random(90, 2);
  ScanConfig cfg;
  cfg.t_e = 10;
  cfg.t_d = 10;
  std::size_t prev = 0;
  for (const Index stride : {20, 10, 5, 2, 1}) {
    cfg.stride = stride;
    const std::size_t count = scan_windows(seq, model, cfg).windows.size();
    CHECK(count >= prev);
    prev = count;
  }
}

TEST_CASE("scan rejects bad geometry and mismatched input") {
  const SeqModelParams model = toy_model(2, 4, 43);
  ScanConfig cfg;
  cfg.t_e = 10;
  cfg.t_d = 10;
  CHECK_THROWS_AS(scan_windows(Matrix::Random(15, 2), model, cfg), InvalidInput);
  CHECK_THROWS_AS(scan_windows(Matrix::Random(50, 3), model, cfg), InvalidInput);
  cfg.stride = 0;
  CHECK_THROWS_AS(scan_windows(Matrix::Random(50, 2), model, cfg), InvalidInput);
  cfg.stride = 1;
  cfg.t_d = 0;
  CHECK_THROWS_AS(scan_windows(Matrix::Random(50, 2), model, cfg), InvalidInput);
}

TEST_CASE("a constant input yields indistinguishable window features") {
  const SeqModelParams model = toy_model(2, 6, 44);
  ScanConfig cfg;
  cfg.t_e = 8;
  cfg.t_d = 8;
  cfg.stride = 4;
  const Matrix seq = Matrix::Ones(48, 2) * 0.3;
  const ScanResult scan = scan_windows(seq, model, cfg);
  REQUIRE(scan.windows.size() >= 3);
  for (std::size_t i = 1; i < scan.windows.size(); ++i)
    CHECK((scan.windows[i].features - scan.windows[0].features).norm() <= 1e-8);

  // All-rows mode carries every decoder state.
  cfg.feature_mode = FeatureMode::all_rows;
  const ScanResult rows = scan_windows(seq, model, cfg);
  CHECK(rows.windows[0].features.rows() == 8);
  CHECK(rows.windows[0].features.cols() == 6);
}

TEST_CASE("identical windows collapse to one populated cluster plus artifacts") {
  const SeqModelParams model = toy_model(2, 6, 45);
  ScanConfig cfg;
  cfg.t_e = 8;
  cfg.t_d = 8;
  cfg.stride = 4;
  cfg.k = 3;
  const Matrix seq = Matrix::Ones(56, 2) * 0.5;
  const ScanResult scan = scan_windows(seq, model, cfg);
  const PODBasis basis = basis_of(scan, 1);
  const SegmentResult result = label_frames(scan, cfg, basis, 0);

  std::vector<Index> sizes(3, 0);
  for (const std::int64_t label : result.window_labels)
    ++sizes[static_cast<std::size_t>(label)];
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes[0] == 1);
  CHECK(sizes[1] == 1);
  CHECK(sizes[2] == static_cast<Index>(scan.windows.size()) - 2);
  CHECK(result.singleton_clusters == 2);
}

TEST_CASE("frame votes, ties and uncovered frames match a hand computation") {
  const ScanResult scan = ray_scan();
  ScanConfig cfg;
  cfg.t_e = 2;
  cfg.t_d = 3;
  cfg.stride = 2;
  cfg.k = 2;
  const PODBasis basis = basis_of(scan, 1);
  const SegmentResult result = label_frames(scan, cfg, basis, 0);

  // Spans: w0 [2,5) w1 [4,7) -> ray a; w2 [6,9) w3 [8,11) -> ray b. Frame 6
  // is a one-one tie resolved toward w1; frames 0-1 lead, frame 11 trails.
  const std::vector<std::int64_t> expected{0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  CHECK(result.frame_labels == expected);
  CHECK(result.window_labels == std::vector<std::int64_t>{0, 0, 1, 1});
  CHECK(result.boundaries == std::vector<Index>{7});
  CHECK(result.singleton_clusters == 0);
}

TEST_CASE("all-rows mode labels windows by their row majority") {
  ScanResult scan;
  scan.frames = 10;
  const RowVec a{{10.0, 0.0}};
  const RowVec b{{0.0, 10.0}};
  const auto window = [&](Index start, const RowVec& r0, const RowVec& r1,
                          const RowVec& r2) {
    WindowFeatures wf;
    wf.start = start;
    wf.features.resize(3, 2);
    wf.features.row(0) = r0;
    wf.features.row(1) = r1;
    wf.features.row(2) = r2;
    scan.windows.push_back(std::move(wf));
  };
  window(0, a, a, b);
  window(3, b, b, a);
  window(6, b, b, b);

  ScanConfig cfg;
  cfg.t_e = 1;
  cfg.t_d = 3;
  cfg.stride = 3;
  cfg.k = 2;
  cfg.feature_mode = FeatureMode::all_rows;
  const PODBasis basis = basis_of(scan, 3);
  const SegmentResult result = label_frames(scan, cfg, basis, 0);
  CHECK(result.window_labels == std::vector<std::int64_t>{0, 1, 1});
  // Spans [1,4) [4,7) [7,10); frame 0 inherits the first window.
  const std::vector<std::int64_t> expected{0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  CHECK(result.frame_labels == expected);
  CHECK(result.boundaries == std::vector<Index>{4});
}

TEST_CASE("label_frames validates its inputs") {
  const ScanResult scan = ray_scan();
  const PODBasis basis = basis_of(scan, 1);
  ScanConfig cfg;
  cfg.t_e = 2;
  cfg.t_d = 3;
  cfg.stride = 2;
  cfg.k = 1;
  CHECK_THROWS_AS(label_frames(scan, cfg, basis, 0), InvalidInput);
  cfg.k = 5;  // more clusters than windows
  CHECK_THROWS_AS(label_frames(scan, cfg, basis, 0), InvalidInput);
  cfg.k = 2;
  CHECK_THROWS_AS(label_frames(scan, cfg, basis, -1), InvalidInput);
  cfg.feature_mode = FeatureMode::all_rows;  // 1-row features, 3 expected
  CHECK_THROWS_AS(label_frames(scan, cfg, basis, 0), InvalidInput);
}

TEST_CASE("a sequence concatenated with itself repeats its interior labels") {
  const SeqModelParams model = toy_model(2, 8, 46);
  ConicSpec circle;
  circle.steps_per_period = 100;
  ConicSpec ellipse;
  ellipse.radius_a = 2.0;
  ellipse.steps_per_period = 100;
  Matrix half(200, 2);
  half.topRows(100) = gen_conic(circle);
  half.bottomRows(100) = gen_conic(ellipse);
  Matrix both(400, 2);
  both.topRows(200) = half;
  both.bottomRows(200) = half;

  ScanConfig cfg;
  cfg.t_e = 20;
  cfg.t_d = 20;
  cfg.stride = 10;
  cfg.k = 2;
  const ScanResult scan = scan_windows(both, model, cfg);
  const PODBasis basis = basis_of(scan, 1);
  const SegmentResult result = label_frames(scan, cfg, basis, 3);
  REQUIRE(result.frame_labels.size() == 400);
  CHECK(same_pattern(result.frame_labels, 60, result.frame_labels, 260, 90));
}

TEST_CASE("a trained model splits two concatenated patterns near the truth") {
  // The patterns repeat every 20 rows. Window means are phase sensitive, so
  // the scan must advance by whole periods: t_e = t_d = stride = 20 keeps
  // every window phase aligned and tiles the frame range with decoder spans.
  TrainConfig config;
  config.model.input_dim = 2;
  config.model.hidden_dim = 16;
  config.model.encoder_steps = 20;
  config.model.decoder_steps = 20;
  config.model.seed = 314;
  config.iterations = 1000;
  const SequenceBatch batch = gen_multiclass_corpus(2, 20, 47);
  SequenceBatch tiled;
  tiled.labels = batch.labels;
  for (const Matrix& seq : batch.sequences) tiled.sequences.push_back(tile_rows(seq, 2));
  const TrainHistory history = train(config, tiled);

  Matrix both(240, 2);
  both.topRows(120) = tile_rows(batch.sequences[0], 6);
  both.bottomRows(120) = tile_rows(batch.sequences[1], 6);
  std::vector<std::int64_t> truth(240, 0);
  std::fill(truth.begin() + 120, truth.end(), 1);

  ScanConfig cfg;
  cfg.t_e = 20;
  cfg.t_d = 20;
  cfg.stride = 20;
  cfg.k = 2;
  const ScanResult scan = scan_windows(both, history.params, cfg);
  const PODBasis basis = basis_of(scan, 1);
  const SegmentResult result = label_frames(scan, cfg, basis, 3);
  const SegmentationScore score = evaluate_segmentation(result, truth);

  CHECK(score.matched_accuracy >= 0.9);
  REQUIRE(score.boundary_errors.size() == 1);
  CHECK(score.boundary_errors[0] <= cfg.t_d);
}

TEST_CASE("segmentation scoring matches hand-built cases") {
  SegmentResult perfect;
  perfect.frame_labels.assign(20, 0);
  std::fill(perfect.frame_labels.begin() + 10, perfect.frame_labels.end(), 1);
  perfect.boundaries = {10};
  std::vector<std::int64_t> truth = perfect.frame_labels;
  SegmentationScore score = evaluate_segmentation(perfect, truth);
  CHECK(score.matched_accuracy == 1.0);
  CHECK(score.ari == 1.0);
  CHECK(score.boundary_errors == std::vector<Index>{0});

  SegmentResult shifted;
  shifted.frame_labels.assign(20, 0);
  std::fill(shifted.frame_labels.begin() + 12, shifted.frame_labels.end(), 1);
  shifted.boundaries = {12};
  score = evaluate_segmentation(shifted, truth);
  CHECK(score.matched_accuracy == doctest::Approx(0.9));
  CHECK(score.boundary_errors == std::vector<Index>{2});

  SegmentResult flat;
  flat.frame_labels.assign(20, 0);
  score = evaluate_segmentation(flat, truth);
  CHECK(score.boundary_errors == std::vector<Index>{20});

  CHECK_THROWS_AS(evaluate_segmentation(perfect, std::vector<std::int64_t>(5, 0)),
                  InvalidInput);
}

TEST_CASE("segmentation exports follow the documented layout") {
  const ScanResult scan = ray_scan();
  ScanConfig cfg;
  cfg.t_e = 2;
  cfg.t_d = 3;
  cfg.stride = 2;
  cfg.k = 2;
  const PODBasis basis = basis_of(scan, 1);
  const SegmentResult result = label_frames(scan, cfg, basis, 0);

  const auto csv = (fs::temp_directory_path() / "segment_test.csv").string();
  std::vector<std::int64_t> truth(12, 0);
  std::fill(truth.begin() + 7, truth.end(), 1);
  write_segmentation_csv(csv, result, truth);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "frame,pred_label,truth_label");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(in, line))
    if (!line.empty()) {
      ++rows;
      last = line;
    }
  CHECK(rows == 12);
  CHECK(last == "11,1,1");
  fs::remove(csv);

  const SegmentationScore score = evaluate_segmentation(result, truth);
  const auto doc =
      nlohmann::json::parse(segmentation_summary_json(result, cfg, score));
  CHECK(doc["k"] == 2);
  CHECK(doc["stride"] == 2);
  CHECK(doc["accuracy"] == 1.0);
  CHECK(doc["boundaries"].size() == 1);
  const auto bare = nlohmann::json::parse(segmentation_summary_json(result, cfg, {}));
  CHECK(bare["accuracy"].is_null());
}

TEST_CASE("feature mode names round trip") {
  CHECK(feature_mode_from_name(feature_mode_name(FeatureMode::window_mean)) ==
        FeatureMode::window_mean);
  CHECK(feature_mode_from_name(feature_mode_name(FeatureMode::all_rows)) ==
        FeatureMode::all_rows);
  CHECK_THROWS_AS(feature_mode_from_name("other"), InvalidInput);
}
