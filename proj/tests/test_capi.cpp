// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqembed.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fresh scratch directory per test case, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("seqembed_capi_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const {
    return rel.empty() ? path.string() : (path / rel).string();
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json capture_manifest(char* text) {
  REQUIRE(text != nullptr);
  json doc = json::parse(text);
  se_free_string(text);
  return doc;
}

}  // namespace

TEST_CASE("version and status names are stable strings") {
  CHECK(std::strlen(se_version()) > 0);
  CHECK(std::string(se_status_name(SE_OK)) == "ok");
  CHECK(std::string(se_status_name(SE_ERR_INVALID_INPUT)) == "invalid_input");
  CHECK(std::string(se_status_name(SE_ERR_NUMERICAL)) == "numerical_failure");
  CHECK(std::string(se_status_name(SE_ERR_TRAINING)) == "training_failure");
}

TEST_CASE("null arguments fail with invalid_input and a message") {
  CHECK(se_run_command(nullptr, "{}", nullptr) == SE_ERR_INVALID_INPUT);
  CHECK(std::strlen(se_last_error()) > 0);
  CHECK(se_model_load(nullptr, nullptr) == SE_ERR_INVALID_INPUT);
  CHECK(se_ari(nullptr, nullptr, 0, nullptr) == SE_ERR_INVALID_INPUT);
  double out = 0.0;
  std::int64_t labels[2] = {0, 0};
  CHECK(se_kmeans(nullptr, 2, 2, 2, 0, labels, &out) == SE_ERR_INVALID_INPUT);
}

TEST_CASE("ari and matched accuracy agree with hand values") {
  const std::int64_t a[6] = {0, 0, 0, 1, 1, 1};
  const std::int64_t b[6] = {1, 1, 1, 0, 0, 0};
  double value = 0.0;
  REQUIRE(se_ari(a, b, 6, &value) == SE_OK);
  CHECK(value == doctest::Approx(1.0));
  CHECK(std::strlen(se_last_error()) == 0);

  const std::int64_t c[6] = {0, 0, 1, 1, 0, 1};
  REQUIRE(se_matched_accuracy(c, a, 6, &value) == SE_OK);
  CHECK(value == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("kmeans and agglomerative recover separated planar blobs") {
  // Two tight blobs around (0,0) and (10,10).
  const double pts[12] = {0.0, 0.1, 0.1,  0.0,  -0.1, 0.0,
                          10.0, 9.9, 9.9, 10.0, 10.1, 10.0};
  std::int64_t labels[6] = {0};
  double inertia = -1.0;
  REQUIRE(se_kmeans(pts, 6, 2, 2, 7, labels, &inertia) == SE_OK);
  CHECK(inertia >= 0.0);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[1] == labels[2]);
  CHECK(labels[3] == labels[4]);
  CHECK(labels[4] == labels[5]);
  CHECK(labels[0] != labels[3]);

  // Cosine linkage splits the two rays regardless of magnitude.
  const double rays[8] = {5.0, 0.0, 9.0, 0.1, 0.0, 3.0, 0.1, 7.0};
  std::int64_t ray_labels[4] = {0};
  REQUIRE(se_agglomerative_cosine(rays, 4, 2, 2, ray_labels) == SE_OK);
  CHECK(ray_labels[0] == ray_labels[1]);
  CHECK(ray_labels[2] == ray_labels[3]);
  CHECK(ray_labels[0] != ray_labels[2]);

  CHECK(se_kmeans(pts, 6, 2, 0, 7, labels, &inertia) == SE_ERR_INVALID_INPUT);
}

TEST_CASE("batch handles round trip through a directory") {
  TempDir dir("batch");
  se_batch* batch = nullptr;
  REQUIRE(se_batch_gen_multiclass(3, 20, 11, &batch) == SE_OK);
  std::int64_t count = 0;
  REQUIRE(se_batch_size(batch, &count) == SE_OK);
  CHECK(count == 3);
  REQUIRE(se_batch_save_dir(batch, dir.str("corpus").c_str()) == SE_OK);
  se_batch_free(batch);

  se_batch* loaded = nullptr;
  REQUIRE(se_batch_load_dir(dir.str("corpus").c_str(), &loaded) == SE_OK);
  REQUIRE(se_batch_size(loaded, &count) == SE_OK);
  CHECK(count == 3);
  se_batch_free(loaded);

  CHECK(se_batch_load_dir(dir.str("missing").c_str(), &loaded) == SE_ERR_INGESTION);
  CHECK(se_batch_gen_multiclass(1, 20, 0, &batch) == SE_ERR_INVALID_INPUT);
}

TEST_CASE("training through the C API yields a working checkpoint") {
  TempDir dir("train");
  se_batch* batch = nullptr;
  REQUIRE(se_batch_gen_multiclass(2, 24, 5, &batch) == SE_OK);

  se_train_options options{};
  options.hidden_dim = 6;
  options.encoder_steps = 8;
  options.decoder_steps = 8;
  options.iterations = 40;
  options.seed = 9;
  se_model* model = nullptr;
  double final_loss = -1.0;
  REQUIRE(se_train(&options, batch, &model, &final_loss) == SE_OK);
  CHECK(final_loss >= 0.0);

  char* info_text = nullptr;
  REQUIRE(se_model_info(model, &info_text) == SE_OK);
  json info = json::parse(info_text);
  se_free_string(info_text);
  CHECK(info["input_dim"] == 2);
  CHECK(info["hidden_dim"] == 6);
  CHECK(info["step"] == 40);

  REQUIRE(se_model_save(model, dir.str("model.json").c_str()) == SE_OK);
  se_model_free(model);

  se_model* loaded = nullptr;
  REQUIRE(se_model_load(dir.str("model.json").c_str(), &loaded) == SE_OK);
  REQUIRE(se_model_info(loaded, &info_text) == SE_OK);
  json info2 = json::parse(info_text);
  se_free_string(info_text);
  CHECK(info2 == info);
  se_model_free(loaded);
  se_batch_free(batch);

  CHECK(se_model_load(dir.str("absent.json").c_str(), &loaded) == SE_ERR_IO);

  // Divergence surfaces as a training failure, not a crash.
  REQUIRE(se_batch_gen_multiclass(2, 24, 5, &batch) == SE_OK);
  options.learning_rate = 1e155;
  options.iterations = 5;
  CHECK(se_train(&options, batch, &model, nullptr) == SE_ERR_TRAINING);
  se_batch_free(batch);
}

TEST_CASE("run_command executes gen and rejects bad input") {
  TempDir dir("gen");
  const json cfg{{"schema_version", 1},
                 {"preset", "multiclass"},
                 {"classes", 3},
                 {"rows", 16},
                 {"seed", 21},
                 {"out", dir.str("corpus")}};
  char* text = nullptr;
  REQUIRE(se_run_command("gen", cfg.dump().c_str(), &text) == SE_OK);
  const json manifest = capture_manifest(text);
  CHECK(manifest["command"] == "gen");
  CHECK(manifest["seed"] == 21);
  CHECK(manifest["outputs"].size() == 3);
  for (const auto& rel : manifest["outputs"])
    CHECK(fs::exists(dir.path / "corpus" / rel.get<std::string>()));
  CHECK(fs::exists(dir.path / "corpus" / "manifest.json"));

  CHECK(se_run_command("unknown", cfg.dump().c_str(), nullptr) ==
        SE_ERR_INVALID_INPUT);
  CHECK(se_run_command("gen", "not json", nullptr) == SE_ERR_INVALID_INPUT);
  json extra = cfg;
  extra["bogus"] = 1;
  CHECK(se_run_command("gen", extra.dump().c_str(), nullptr) == SE_ERR_INVALID_INPUT);
  CHECK(std::string(se_last_error()).find("bogus") != std::string::npos);
  json wrong = cfg;
  wrong["schema_version"] = 99;
  CHECK(se_run_command("gen", wrong.dump().c_str(), nullptr) == SE_ERR_INVALID_INPUT);
}

TEST_CASE("rerun reproduces a gen run byte for byte") {
  TempDir dir("rerun");
  const json cfg{{"schema_version", 1}, {"preset", "multiclass"}, {"classes", 2},
                 {"rows", 12},          {"seed", 33},             {"out", dir.str("a")}};
  REQUIRE(se_run_command("gen", cfg.dump().c_str(), nullptr) == SE_OK);

  char* text = nullptr;
  REQUIRE(se_rerun(dir.str("a/manifest.json").c_str(), dir.str("b").c_str(), &text) ==
          SE_OK);
  const json manifest = capture_manifest(text);
  CHECK(manifest["command"] == "gen");
  for (const auto& rel : manifest["outputs"]) {
    const std::string name = rel.get<std::string>();
    CHECK(read_file(dir.str("a/" + name)) == read_file(dir.str("b/" + name)));
  }

  CHECK(se_rerun(dir.str("absent.json").c_str(), dir.str("c").c_str(), nullptr) ==
        SE_ERR_INGESTION);
}
