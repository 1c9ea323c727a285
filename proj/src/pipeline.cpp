// SPDX-License-Identifier: Apache-2.0
#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <utility>

#include "clusterlab.hpp"
#include "csvio.hpp"
#include "datagen.hpp"
#include "embedding.hpp"
#include "errors.hpp"
#include "segment.hpp"
#include "seqmodel.hpp"
#include "trainmon.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace seqembed {
namespace {

// ---- config document plumbing -------------------------------------------

void require_object(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw InvalidInput(where + ": expected a JSON object");
}

// Unknown keys are schema errors so config drift fails loudly instead of
// being silently ignored.
void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) throw InvalidInput(where + ": unknown key '" + item.key() + "'");
  }
}

void require_version(const json& cfg, const std::string& where) {
  if (!cfg.contains("schema_version"))
    throw InvalidInput(where + ": missing schema_version");
  const json& v = cfg.at("schema_version");
  if (!v.is_number_integer() || v.get<std::int64_t>() != kConfigSchemaVersion)
    throw InvalidInput(where + ": unsupported schema_version, expected " +
                       std::to_string(kConfigSchemaVersion));
}

std::string req_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key))
    throw InvalidInput(where + ": missing required key '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_string() || v.get<std::string>().empty())
    throw InvalidInput(where + ": '" + key + "' must be a non-empty string");
  return v.get<std::string>();
}

std::string opt_string(const json& obj, const char* key, const std::string& def,
                       const std::string& where) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_string()) throw InvalidInput(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t opt_int(const json& obj, const char* key, std::int64_t def,
                     const std::string& where) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw InvalidInput(where + ": '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::int64_t req_int(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key))
    throw InvalidInput(where + ": missing required key '" + key + "'");
  return opt_int(obj, key, 0, where);
}

double opt_double(const json& obj, const char* key, double def, const std::string& where) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number()) throw InvalidInput(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

bool opt_bool(const json& obj, const char* key, bool def, const std::string& where) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw InvalidInput(where + ": '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::uint64_t opt_seed(const json& obj, const std::string& where) {
  if (!obj.contains("seed")) return 0;
  const json& v = obj.at("seed");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw InvalidInput(where + ": 'seed' must be a non-negative integer");
}

std::vector<double> opt_double_array(const json& obj, const char* key,
                                     std::vector<double> def, const std::string& where) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_array()) throw InvalidInput(where + ": '" + key + "' must be an array");
  std::vector<double> out;
  for (const json& item : v) {
    if (!item.is_number())
      throw InvalidInput(where + ": '" + key + "' must hold numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

std::vector<Index> opt_index_array(const json& obj, const char* key,
                                   std::vector<Index> def, const std::string& where) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_array()) throw InvalidInput(where + ": '" + key + "' must be an array");
  std::vector<Index> out;
  for (const json& item : v) {
    if (!item.is_number_integer())
      throw InvalidInput(where + ": '" + key + "' must hold integers");
    out.push_back(static_cast<Index>(item.get<std::int64_t>()));
  }
  return out;
}

// ---- manifest -------------------------------------------------------------

struct InputRecord {
  std::string path;
  std::string digest;
};

json make_manifest(const std::string& command, json resolved, std::uint64_t seed,
                   const std::vector<InputRecord>& inputs,
                   const std::vector<std::string>& outputs, double duration_seconds) {
  json doc;
  doc["schema_version"] = kConfigSchemaVersion;
  doc["kind"] = "run_manifest";
  doc["command"] = command;
  doc["config"] = std::move(resolved);
  doc["seed"] = seed;
  doc["inputs"] = json::array();
  for (const InputRecord& in : inputs)
    doc["inputs"].push_back({{"path", in.path}, {"digest", in.digest}});
  doc["outputs"] = outputs;
  doc["tool_version"] = kToolVersion;
  doc["duration_seconds"] = duration_seconds;
  return doc;
}

// Outputs are listed relative to the run directory; every one must exist by
// the time the manifest lands.
void finish_run(const std::string& out_dir, json& manifest) {
  for (const json& rel : manifest.at("outputs")) {
    const fs::path p = fs::path(out_dir) / rel.get<std::string>();
    if (!fs::exists(p))
      throw InvalidState("run produced no file at " + p.string());
  }
  write_lines_atomic((fs::path(out_dir) / "manifest.json").string(),
                     {manifest.dump(2)});
}

std::vector<std::string> sorted_csv_files(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw IngestionError("not a directory: " + dir, dir, 0);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(f.string());
  return out;
}

std::vector<InputRecord> digest_all(const std::vector<std::string>& paths) {
  std::vector<InputRecord> out;
  for (const std::string& p : paths) out.push_back({p, file_digest(p)});
  return out;
}

Matrix tile_rows(const Matrix& block, Index reps) {
  Matrix out(block.rows() * reps, block.cols());
  for (Index r = 0; r < reps; ++r)
    out.middleRows(r * block.rows(), block.rows()) = block;
  return out;
}

json parse_json_file(const std::string& path, const std::string& where) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(where + ": cannot open " + path, path, 0);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded())
    throw IngestionError(where + ": malformed JSON in " + path, path, 0);
  return doc;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---- gen -------------------------------------------------------------------

json run_gen(const json& cfg) {
  const auto start = Clock::now();
  const std::string where = "gen config";
  require_object(cfg, where);
  require_version(cfg, where);
  check_keys(cfg, where,
             {"schema_version", "preset", "classes", "rows", "periods", "tiles",
              "one_hot", "concat", "seed", "out"});
  const std::string out_dir = req_string(cfg, "out", where);
  const std::uint64_t seed = opt_seed(cfg, where);
  const std::string preset = opt_string(cfg, "preset", "circle-ellipse", where);

  json resolved = cfg;
  resolved["preset"] = preset;
  resolved["seed"] = seed;

  SequenceBatch base;
  if (preset == "circle-ellipse") {
    const Index rows = static_cast<Index>(opt_int(cfg, "rows", 100, where));
    const double periods = opt_double(cfg, "periods", 2.0, where);
    resolved["rows"] = rows;
    resolved["periods"] = periods;
    ConicSpec circle;
    circle.steps_per_period = rows;
    circle.periods = periods;
    ConicSpec ellipse = circle;
    ellipse.radius_a = 2.0;
    base.sequences = {gen_conic(circle), gen_conic(ellipse)};
    base.labels = std::vector<std::int64_t>{0, 1};
    base.feature_names = std::vector<std::string>{"x", "y"};
  } else if (preset == "multiclass") {
    const Index classes = static_cast<Index>(opt_int(cfg, "classes", 5, where));
    const Index rows = static_cast<Index>(opt_int(cfg, "rows", 20, where));
    resolved["classes"] = classes;
    resolved["rows"] = rows;
    base = gen_multiclass_corpus(classes, rows, seed);
  } else {
    throw InvalidInput(where + ": unknown preset '" + preset + "'");
  }

  const Index tiles = static_cast<Index>(opt_int(cfg, "tiles", 1, where));
  if (tiles < 1) throw InvalidInput(where + ": 'tiles' must be at least 1");
  resolved["tiles"] = tiles;
  SequenceBatch corpus = base;
  if (tiles > 1)
    for (Matrix& seq : corpus.sequences) seq = tile_rows(seq, tiles);

  const bool one_hot = opt_bool(cfg, "one_hot", false, where);
  resolved["one_hot"] = one_hot;
  if (one_hot) {
    const Index classes = static_cast<Index>(corpus.sequences.size());
    corpus = one_hot_augment(corpus, classes);
  }

  save_csv_dir(corpus, out_dir);
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    std::string idx = std::to_string(i);
    std::string name =
        "seq" + std::string(idx.size() < 3 ? 3 - idx.size() : 0, '0') + idx;
    if (corpus.labels) name += "_" + std::to_string((*corpus.labels)[i]);
    outputs.push_back(name + ".csv");
  }

  if (cfg.contains("concat")) {
    const json& cc = cfg.at("concat");
    require_object(cc, where + ".concat");
    check_keys(cc, where + ".concat", {"tiles", "order"});
    const Index ctiles = static_cast<Index>(opt_int(cc, "tiles", 12, where));
    if (ctiles < 1) throw InvalidInput(where + ": 'concat.tiles' must be at least 1");
    std::vector<Index> order;
    for (Index i = 0; i < static_cast<Index>(base.sequences.size()); ++i)
      order.push_back(i);
    order = opt_index_array(cc, "order", order, where + ".concat");
    resolved["concat"] = {{"tiles", ctiles}, {"order", order}};

    SequenceBatch long_batch = base;
    for (Matrix& seq : long_batch.sequences) seq = tile_rows(seq, ctiles);
    const ConcatResult concat = concat_labeled(long_batch, order);
    write_numeric_csv((fs::path(out_dir) / "concat.csv").string(), concat.frames,
                      base.feature_names);
    std::vector<std::string> lines{"frame,label"};
    for (std::size_t f = 0; f < concat.frame_labels.size(); ++f)
      lines.push_back(std::to_string(f) + "," + std::to_string(concat.frame_labels[f]));
    write_lines_atomic((fs::path(out_dir) / "concat_truth.csv").string(), lines);
    outputs.push_back("concat.csv");
    outputs.push_back("concat_truth.csv");
  }

  json manifest = make_manifest("gen", std::move(resolved), seed, {}, outputs,
                                seconds_since(start));
  finish_run(out_dir, manifest);
  return manifest;
}

// ---- train -----------------------------------------------------------------

SeqModelConfig parse_model_config(const json& cfg, const std::string& where,
                                  json& resolved) {
  if (!cfg.contains("model"))
    throw InvalidInput(where + ": missing required key 'model'");
  const json& m = cfg.at("model");
  require_object(m, where + ".model");
  check_keys(m, where + ".model",
             {"hidden_dim", "encoder_steps", "decoder_steps", "share_params",
              "project_first_decoder_input", "learning_rate", "grad_clip_norm"});
  SeqModelConfig out;
  out.hidden_dim = static_cast<Index>(req_int(m, "hidden_dim", where + ".model"));
  out.encoder_steps = static_cast<Index>(req_int(m, "encoder_steps", where + ".model"));
  out.decoder_steps = static_cast<Index>(req_int(m, "decoder_steps", where + ".model"));
  out.share_params = opt_bool(m, "share_params", false, where + ".model");
  out.project_first_decoder_input =
      opt_bool(m, "project_first_decoder_input", false, where + ".model");
  out.learning_rate = opt_double(m, "learning_rate", 0.01, where + ".model");
  if (m.contains("grad_clip_norm") && !m.at("grad_clip_norm").is_null())
    out.grad_clip_norm = opt_double(m, "grad_clip_norm", 0.0, where + ".model");
  resolved["model"] = {
      {"hidden_dim", out.hidden_dim},
      {"encoder_steps", out.encoder_steps},
      {"decoder_steps", out.decoder_steps},
      {"share_params", out.share_params},
      {"project_first_decoder_input", out.project_first_decoder_input},
      {"learning_rate", out.learning_rate},
      {"grad_clip_norm",
       out.grad_clip_norm ? json(*out.grad_clip_norm) : json(nullptr)}};
  return out;
}

json run_train(const json& cfg) {
  const auto start = Clock::now();
  const std::string where = "train config";
  require_object(cfg, where);
  require_version(cfg, where);
  check_keys(cfg, where,
             {"schema_version", "data", "out", "seed", "model", "iterations",
              "batch_size", "snapshot_iters", "validation_fraction", "sve_levels",
              "cluster_dims", "one_hot"});
  const std::string out_dir = req_string(cfg, "out", where);
  const std::string data_dir = req_string(cfg, "data", where);
  const std::uint64_t seed = opt_seed(cfg, where);

  json resolved = cfg;
  resolved["seed"] = seed;

  TrainConfig tc;
  tc.model = parse_model_config(cfg, where, resolved);
  tc.model.seed = seed;
  tc.iterations = static_cast<Index>(req_int(cfg, "iterations", where));
  tc.batch_size = static_cast<Index>(opt_int(cfg, "batch_size", 0, where));
  tc.snapshot_iters = opt_index_array(cfg, "snapshot_iters", {}, where);
  tc.validation_fraction = opt_double(cfg, "validation_fraction", 0.0, where);
  tc.sve_levels = opt_double_array(cfg, "sve_levels", {0.90, 0.99}, where);
  tc.cluster_dims = opt_index_array(cfg, "cluster_dims", {3, 0}, where);
  const bool one_hot = opt_bool(cfg, "one_hot", false, where);
  resolved["iterations"] = tc.iterations;
  resolved["batch_size"] = tc.batch_size;
  resolved["snapshot_iters"] = tc.snapshot_iters;
  resolved["validation_fraction"] = tc.validation_fraction;
  resolved["sve_levels"] = tc.sve_levels;
  resolved["cluster_dims"] = tc.cluster_dims;
  resolved["one_hot"] = one_hot;

  const std::vector<std::string> data_files = sorted_csv_files(data_dir);
  SequenceBatch batch = load_csv_dir(data_dir);
  if (one_hot) {
    if (!batch.labels)
      throw InvalidInput(where + ": one_hot requires labeled data files");
    std::int64_t max_label = 0;
    for (const std::int64_t l : *batch.labels) max_label = std::max(max_label, l);
    batch = one_hot_augment(batch, static_cast<Index>(max_label) + 1);
  }
  tc.model.input_dim = batch.sequences.front().cols();

  const TrainHistory history = train(tc, batch);
  fs::create_directories(out_dir);
  save_checkpoint(history.params, (fs::path(out_dir) / "model.json").string());
  write_history(out_dir, history);

  std::vector<std::string> outputs{"model.json", "losses.csv", "mode_counts.csv",
                                   "history.json"};
  for (const EmbeddingSnapshot& snap : history.snapshots) {
    char name[48];
    std::snprintf(name, sizeof name, "snapshots/snapshot_%06lld.csv",
                  static_cast<long long>(snap.iteration));
    outputs.push_back(name);
  }

  json manifest = make_manifest("train", std::move(resolved), seed,
                                digest_all(data_files), outputs, seconds_since(start));
  finish_run(out_dir, manifest);
  return manifest;
}

// ---- embed -----------------------------------------------------------------

json run_embed(const json& cfg) {
  const auto start = Clock::now();
  const std::string where = "embed config";
  require_object(cfg, where);
  require_version(cfg, where);
  check_keys(cfg, where,
             {"schema_version", "model", "data", "out", "seed", "sve_levels",
              "cluster_dims"});
  const std::string out_dir = req_string(cfg, "out", where);
  const std::string model_path = req_string(cfg, "model", where);
  const std::string data_dir = req_string(cfg, "data", where);
  const std::uint64_t seed = opt_seed(cfg, where);
  const std::vector<double> sve_levels =
      opt_double_array(cfg, "sve_levels", {0.90, 0.99}, where);
  const std::vector<Index> cluster_dims =
      opt_index_array(cfg, "cluster_dims", {3, 0}, where);

  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["sve_levels"] = sve_levels;
  resolved["cluster_dims"] = cluster_dims;

  const std::vector<std::string> data_files = sorted_csv_files(data_dir);
  const SeqModelParams params = load_checkpoint(model_path);
  const SequenceBatch batch = load_csv_dir(data_dir);
  const EmbeddingSnapshot snap = snapshot(params, batch, sve_levels, cluster_dims);

  write_trajectory_csv((fs::path(out_dir) / "trajectories.csv").string(),
                       snap.trajectories);
  json summary;
  summary["schema_version"] = kConfigSchemaVersion;
  summary["kind"] = "embedding";
  summary["iteration"] = snap.iteration;
  summary["train_loss"] = snap.train_loss;
  summary["sigma"] =
      std::vector<double>(snap.basis.sigma.begin(), snap.basis.sigma.end());
  summary["ari"] = json::array();
  for (const AriEntry& a : snap.aris)
    summary["ari"].push_back({{"kind", trajectory_kind_name(a.kind)},
                              {"dim", a.dim},
                              {"value", a.value}});
  summary["mode_counts"] = json::array();
  for (const ModeCountEntry& m : snap.mode_counts)
    summary["mode_counts"].push_back({{"kind", trajectory_kind_name(m.kind)},
                                      {"sve_level", m.sve_level},
                                      {"type", m.type},
                                      {"count", m.count}});
  write_lines_atomic((fs::path(out_dir) / "embedding.json").string(),
                     {summary.dump(2)});

  std::vector<std::string> inputs = data_files;
  inputs.insert(inputs.begin(), model_path);
  json manifest =
      make_manifest("embed", std::move(resolved), seed, digest_all(inputs),
                    {"trajectories.csv", "embedding.json"}, seconds_since(start));
  finish_run(out_dir, manifest);
  return manifest;
}

// ---- cluster ---------------------------------------------------------------

json run_cluster(const json& cfg) {
  const auto start = Clock::now();
  const std::string where = "cluster config";
  require_object(cfg, where);
  require_version(cfg, where);
  check_keys(cfg, where,
             {"schema_version", "input", "out", "seed", "k", "method", "kind", "dims"});
  const std::string out_dir = req_string(cfg, "out", where);
  const std::string input = req_string(cfg, "input", where);
  const std::uint64_t seed = opt_seed(cfg, where);
  const Index k = static_cast<Index>(req_int(cfg, "k", where));
  const std::string method = opt_string(cfg, "method", "kmeans++", where);
  const std::string kind_name = opt_string(cfg, "kind", "decoder", where);
  const Index dims = static_cast<Index>(opt_int(cfg, "dims", 0, where));
  const TrajectoryKind kind = trajectory_kind_from_name(kind_name);

  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["method"] = method;
  resolved["kind"] = kind_name;
  resolved["dims"] = dims;

  const std::vector<Trajectory> all = read_trajectory_csv(input);
  std::vector<const Trajectory*> picked;
  for (const Trajectory& t : all)
    if (t.kind == kind) picked.push_back(&t);
  if (picked.empty())
    throw InvalidInput(where + ": no trajectories of kind '" + kind_name + "' in " +
                       input);

  Index rows = 0;
  for (const Trajectory* t : picked) rows += t->points.rows();
  const Index cols = picked.front()->points.cols();
  if (dims < 0 || dims > cols)
    throw InvalidInput(where + ": 'dims' must lie in [0, " + std::to_string(cols) + "]");
  const Index width = dims == 0 ? cols : dims;

  PointSet ps;
  ps.points.resize(rows, width);
  std::vector<std::int64_t> truth;
  bool all_labeled = true;
  Index at = 0;
  for (const Trajectory* t : picked) {
    ps.points.middleRows(at, t->points.rows()) = t->points.leftCols(width);
    at += t->points.rows();
    if (t->type_label)
      truth.insert(truth.end(), static_cast<std::size_t>(t->points.rows()),
                   *t->type_label);
    else
      all_labeled = false;
  }
  if (all_labeled) ps.truth = truth;

  ClusterResult result;
  if (method == "kmeans++")
    result = kmeans_pp(ps, k, seed);
  else if (method == "agglomerative-single-cosine")
    result = agglomerative_cosine(ps, k);
  else
    throw InvalidInput(where + ": unknown method '" + method + "'");

  write_cluster_csv((fs::path(out_dir) / "clusters.csv").string(), result, ps.truth);
  write_lines_atomic((fs::path(out_dir) / "summary.json").string(),
                     {cluster_summary_json(result, ps.truth)});

  json manifest =
      make_manifest("cluster", std::move(resolved), seed, digest_all({input}),
                    {"clusters.csv", "summary.json"}, seconds_since(start));
  finish_run(out_dir, manifest);
  return manifest;
}

// ---- segment ---------------------------------------------------------------

std::vector<std::int64_t> read_truth_csv(const std::string& path) {
  const CsvTable table = read_numeric_csv(path);
  // Single-column files are bare labels; otherwise the last column is the
  // label and leading columns (e.g. the frame index) are ignored.
  const Index col = table.values.cols() - 1;
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(table.values.rows()));
  for (Index r = 0; r < table.values.rows(); ++r)
    out.push_back(static_cast<std::int64_t>(std::llround(table.values(r, col))));
  return out;
}

json run_segment(const json& cfg) {
  const auto start = Clock::now();
  const std::string where = "segment config";
  require_object(cfg, where);
  require_version(cfg, where);
  check_keys(cfg, where,
             {"schema_version", "model", "input", "truth", "out", "seed", "k",
              "t_e", "t_d", "stride", "dims", "feature_mode"});
  const std::string out_dir = req_string(cfg, "out", where);
  const std::string model_path = req_string(cfg, "model", where);
  const std::string input = req_string(cfg, "input", where);
  const std::string truth_path = opt_string(cfg, "truth", "", where);
  const std::uint64_t seed = opt_seed(cfg, where);

  const SeqModelParams params = load_checkpoint(model_path);
  ScanConfig sc;
  sc.k = static_cast<Index>(req_int(cfg, "k", where));
  // Zero or absent geometry falls back to the model's own horizons; the
  // stride falls back to t_d so decoder spans tile the frame range without
  // overlap.
  sc.t_e = static_cast<Index>(opt_int(cfg, "t_e", 0, where));
  if (sc.t_e == 0) sc.t_e = params.config.encoder_steps;
  sc.t_d = static_cast<Index>(opt_int(cfg, "t_d", 0, where));
  if (sc.t_d == 0) sc.t_d = params.config.decoder_steps;
  sc.stride = static_cast<Index>(opt_int(cfg, "stride", 0, where));
  if (sc.stride == 0) sc.stride = sc.t_d;
  sc.feature_mode =
      feature_mode_from_name(opt_string(cfg, "feature_mode", "window-mean", where));
  const Index dims = static_cast<Index>(opt_int(cfg, "dims", 3, where));

  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["k"] = sc.k;
  resolved["t_e"] = sc.t_e;
  resolved["t_d"] = sc.t_d;
  resolved["stride"] = sc.stride;
  resolved["dims"] = dims;
  resolved["feature_mode"] = feature_mode_name(sc.feature_mode);
  if (truth_path.empty()) resolved.erase("truth");

  const CsvTable table = read_numeric_csv(input);
  const ScanResult scan = scan_windows(table.values, params, sc);

  Index feat_rows = 0;
  for (const WindowFeatures& wf : scan.windows) feat_rows += wf.features.rows();
  Matrix stacked(feat_rows, scan.windows.front().features.cols());
  Index at = 0;
  for (const WindowFeatures& wf : scan.windows) {
    stacked.middleRows(at, wf.features.rows()) = wf.features;
    at += wf.features.rows();
  }
  const PODBasis basis = pod(stacked);
  const SegmentResult result = label_frames(scan, sc, basis, dims);

  std::optional<std::vector<std::int64_t>> truth;
  std::optional<SegmentationScore> score;
  if (!truth_path.empty()) {
    truth = read_truth_csv(truth_path);
    score = evaluate_segmentation(result, *truth);
  }

  write_segmentation_csv((fs::path(out_dir) / "frames.csv").string(), result, truth);
  write_lines_atomic((fs::path(out_dir) / "summary.json").string(),
                     {segmentation_summary_json(result, sc, score)});

  std::vector<std::string> inputs{model_path, input};
  if (!truth_path.empty()) inputs.push_back(truth_path);
  json manifest =
      make_manifest("segment", std::move(resolved), seed, digest_all(inputs),
                    {"frames.csv", "summary.json"}, seconds_since(start));
  finish_run(out_dir, manifest);
  return manifest;
}

// ---- report ----------------------------------------------------------------

json run_report(const json& cfg) {
  const auto start = Clock::now();
  const std::string where = "report config";
  require_object(cfg, where);
  require_version(cfg, where);
  check_keys(cfg, where, {"schema_version", "history", "out", "seed"});
  const std::string out_dir = req_string(cfg, "out", where);
  const std::string history_path = req_string(cfg, "history", where);
  const std::uint64_t seed = opt_seed(cfg, where);

  json resolved = cfg;
  resolved["seed"] = seed;

  const json doc = parse_json_file(history_path, where);
  if (!doc.is_object() || doc.value("kind", "") != "train_history")
    throw IngestionError(where + ": not a train history document", history_path, 0);

  // Rebuild just enough of the history for the diagnostics; trajectories and
  // bases stay on disk.
  TrainHistory history;
  std::vector<std::string> traj_files;
  try {
    for (const json& entry : doc.at("snapshots")) {
      EmbeddingSnapshot snap;
      snap.iteration = entry.at("iteration").get<Index>();
      snap.train_loss = entry.at("train_loss").get<double>();
      if (!entry.at("val_loss").is_null())
        snap.val_loss = entry.at("val_loss").get<double>();
      traj_files.push_back(entry.at("trajectory_file").get<std::string>());
      for (const json& a : entry.at("ari"))
        snap.aris.push_back({trajectory_kind_from_name(a.at("kind").get<std::string>()),
                             a.at("dim").get<Index>(), a.at("value").get<double>()});
      for (const json& m : entry.at("mode_counts"))
        snap.mode_counts.push_back(
            {trajectory_kind_from_name(m.at("kind").get<std::string>()),
             m.at("sve_level").get<double>(), m.at("type").get<std::int64_t>(),
             m.at("count").get<Index>()});
      history.snapshots.push_back(std::move(snap));
    }
  } catch (const json::exception& e) {
    throw IngestionError(where + ": malformed history document: " + e.what(),
                         history_path, 0);
  }

  std::vector<std::string> lines{"iteration,train_loss,val_loss,kind,dim,ari"};
  for (const EmbeddingSnapshot& snap : history.snapshots)
    for (const AriEntry& a : snap.aris) {
      std::string line = std::to_string(snap.iteration) + "," +
                         format_double(snap.train_loss) + ",";
      if (snap.val_loss) line += format_double(*snap.val_loss);
      line += std::string(",") + trajectory_kind_name(a.kind) + "," +
              std::to_string(a.dim) + "," + format_double(a.value);
      lines.push_back(std::move(line));
    }
  write_lines_atomic((fs::path(out_dir) / "loss_ari.csv").string(), lines);

  lines = {"kind,sve_level,type,iteration,count"};
  for (const EmbeddingSnapshot& snap : history.snapshots)
    for (const ModeCountEntry& m : snap.mode_counts)
      lines.push_back(std::string(trajectory_kind_name(m.kind)) + "," +
                      format_double(m.sve_level) + "," + std::to_string(m.type) + "," +
                      std::to_string(snap.iteration) + "," + std::to_string(m.count));
  write_lines_atomic((fs::path(out_dir) / "mode_counts.csv").string(), lines);

  json report;
  report["schema_version"] = kConfigSchemaVersion;
  report["kind"] = "report";
  report["snapshot_iterations"] = json::array();
  for (const EmbeddingSnapshot& snap : history.snapshots)
    report["snapshot_iterations"].push_back(snap.iteration);
  report["trajectory_files"] = traj_files;

  // Pearson per clustering key; series without spread have no correlation
  // and render as null.
  report["pearson"] = json::array();
  if (!history.snapshots.empty()) {
    for (const AriEntry& a : history.snapshots.front().aris) {
      json cell{{"kind", trajectory_kind_name(a.kind)}, {"dim", a.dim}};
      try {
        cell["value"] = loss_ari_correlation(history, a.kind, a.dim);
      } catch (const Error&) {
        cell["value"] = nullptr;
      }
      report["pearson"].push_back(std::move(cell));
    }
  }
  try {
    const OptimalIteration opt = detect_optimal_iteration(history);
    report["optimal"] = {{"iter_ari_peak", opt.iter_ari_peak},
                         {"iter_val_min", opt.iter_val_min},
                         {"gap", opt.gap}};
  } catch (const Error&) {
    report["optimal"] = nullptr;
  }
  write_lines_atomic((fs::path(out_dir) / "report.json").string(), {report.dump(2)});

  json manifest = make_manifest("report", std::move(resolved), seed,
                                digest_all({history_path}),
                                {"loss_ari.csv", "mode_counts.csv", "report.json"},
                                seconds_since(start));
  finish_run(out_dir, manifest);
  return manifest;
}

}  // namespace

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char out[32];
  std::snprintf(out, sizeof out, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return out;
}

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> commands{"gen",     "train",  "embed",
                                                 "cluster", "segment", "report"};
  return commands;
}

nlohmann::json run_command(const std::string& command, const nlohmann::json& config) {
  if (command == "gen") return run_gen(config);
  if (command == "train") return run_train(config);
  if (command == "embed") return run_embed(config);
  if (command == "cluster") return run_cluster(config);
  if (command == "segment") return run_segment(config);
  if (command == "report") return run_report(config);
  throw InvalidInput("unknown command '" + command + "'");
}

nlohmann::json rerun_manifest(const std::string& manifest_path,
                              const std::string& out_dir) {
  if (out_dir.empty()) throw InvalidInput("rerun: empty output directory");
  const json doc = parse_json_file(manifest_path, "rerun");
  if (!doc.is_object() || doc.value("kind", "") != "run_manifest")
    throw IngestionError("rerun: not a run manifest", manifest_path, 0);
  require_version(doc, "rerun manifest");
  const std::string command = doc.value("command", "");
  json config = doc.at("config");
  require_object(config, "rerun manifest config");

  // Inputs must be byte-identical to the recorded run or the replay cannot
  // stand in for it.
  for (const json& in : doc.at("inputs")) {
    const std::string path = in.at("path").get<std::string>();
    const std::string want = in.at("digest").get<std::string>();
    const std::string got = file_digest(path);
    if (got != want)
      throw IngestionError("rerun: input changed since the recorded run: " + path,
                           path, 0);
  }

  config["out"] = out_dir;
  return run_command(command, config);
}

}  // namespace seqembed
