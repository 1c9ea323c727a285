// SPDX-License-Identifier: Apache-2.0
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "seqembed.h"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code_for(se_status status) {
  switch (status) {
    case SE_OK: return 0;
    case SE_ERR_INVALID_INPUT:
    case SE_ERR_INVALID_STATE: return kExitUsage;
    case SE_ERR_INGESTION:
    case SE_ERR_IO: return kExitData;
    default: return kExitNumerical;
  }
}

// All failures surface as one machine-parsable JSON line on stderr.
void print_error(const std::string& code_name, const std::string& message) {
  const json doc{{"error", {{"code", code_name}, {"message", message}}}};
  std::fprintf(stderr, "%s\n", doc.dump().c_str());
}

struct CliFailure {
  int code;
  std::string name;
  std::string message;
};

json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{kExitData, "ingestion", "cannot open config file: " + path};
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded())
    throw CliFailure{kExitUsage, "invalid_input", "malformed JSON config: " + path};
  if (!doc.is_object())
    throw CliFailure{kExitUsage, "invalid_input",
                     "config must be a JSON object: " + path};
  return doc;
}

// Seed precedence: --seed flag > config file value > SEQEMBED_SEED > 0.
void resolve_seed(json& cfg, const CLI::Option* seed_opt, std::uint64_t seed_flag) {
  if (seed_opt->count() > 0) {
    cfg["seed"] = seed_flag;
    return;
  }
  if (cfg.contains("seed")) return;
  const char* env = std::getenv("SEQEMBED_SEED");
  if (!env || !*env) return;
  errno = 0;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0')
    throw CliFailure{kExitUsage, "invalid_input",
                     std::string("SEQEMBED_SEED is not a non-negative integer: ") + env};
  cfg["seed"] = static_cast<std::uint64_t>(parsed);
}

// Subcommands without a --config start from a bare versioned document.
json base_config(const CLI::Option* config_opt, const std::string& config_path) {
  if (config_opt->count() > 0) return load_config_file(config_path);
  return json{{"schema_version", 1}};
}

int run(const std::string& command, const json& cfg) {
  char* manifest_text = nullptr;
  const se_status status =
      se_run_command(command.c_str(), cfg.dump().c_str(), &manifest_text);
  if (status != SE_OK) {
    print_error(se_status_name(status), se_last_error());
    return exit_code_for(status);
  }
  const json manifest = json::parse(manifest_text);
  se_free_string(manifest_text);
  std::printf("%s: %zu output file(s) + manifest.json under %s\n", command.c_str(),
              manifest.at("outputs").size(),
              manifest.at("config").at("out").get<std::string>().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence embedding toolkit: GRU seq2seq training, POD state "
               "embeddings, clustering diagnostics and temporal segmentation"};
  app.set_version_flag("--version", se_version());
  app.require_subcommand(1);

  // Shared option storage; CLI11 writes into these and the ->count() of each
  // option says whether the user passed it.
  std::string config_path, out_dir, data_dir, model_path, input_path, truth_path;
  std::string preset, method, kind, feature_mode, history_path, manifest_path;
  std::uint64_t seed = 0;
  std::int64_t classes = 0, rows = 0, tiles = 0, concat_tiles = 0, iterations = 0;
  std::int64_t k = 0, dims = 0, t_e = 0, t_d = 0, stride = 0;
  double periods = 0.0;
  bool one_hot = false;
  std::vector<std::int64_t> concat_order;

  const auto add_common = [&](CLI::App* sub, bool with_config = true) {
    CLI::Option* c = nullptr;
    if (with_config)
      c = sub->add_option("--config", config_path, "JSON config file");
    CLI::Option* s = sub->add_option("--seed", seed, "top-level RNG seed");
    sub->add_option("--out", out_dir, "output directory")->required();
    return std::make_pair(c, s);
  };

  CLI::App* gen = app.add_subcommand("gen", "write a synthetic corpus");
  const auto [gen_cfg, gen_seed] = add_common(gen);
  const CLI::Option* gen_preset =
      gen->add_option("--preset", preset, "circle-ellipse or multiclass");
  const CLI::Option* gen_classes = gen->add_option("--classes", classes, "class count");
  const CLI::Option* gen_rows = gen->add_option("--rows", rows, "rows per sequence");
  const CLI::Option* gen_periods =
      gen->add_option("--periods", periods, "conic periods over the rows");
  const CLI::Option* gen_tiles =
      gen->add_option("--tiles", tiles, "tile each sequence this many times");
  const CLI::Option* gen_one_hot =
      gen->add_flag("--one-hot", one_hot, "append one-hot class columns");
  const CLI::Option* gen_concat_tiles = gen->add_option(
      "--concat-tiles", concat_tiles, "also write a tiled concatenation");
  const CLI::Option* gen_concat_order =
      gen->add_option("--concat-order", concat_order, "concatenation class order");

  CLI::App* train = app.add_subcommand("train", "train a model with monitoring");
  const auto [train_cfg, train_seed] = add_common(train);
  const CLI::Option* train_data =
      train->add_option("--data", data_dir, "directory of sequence CSVs");
  const CLI::Option* train_iters =
      train->add_option("--iterations", iterations, "ADAM iterations");
  const CLI::Option* train_one_hot =
      train->add_flag("--one-hot", one_hot, "append one-hot class columns");

  CLI::App* embed = app.add_subcommand("embed", "export embedding trajectories");
  const auto [embed_cfg, embed_seed] = add_common(embed);
  const CLI::Option* embed_model =
      embed->add_option("--model", model_path, "model checkpoint");
  const CLI::Option* embed_data =
      embed->add_option("--data", data_dir, "directory of sequence CSVs");

  CLI::App* cluster = app.add_subcommand("cluster", "cluster trajectory rows");
  const auto [cluster_cfg, cluster_seed] = add_common(cluster);
  const CLI::Option* cluster_input =
      cluster->add_option("--input", input_path, "trajectory CSV");
  const CLI::Option* cluster_k = cluster->add_option("--k", k, "cluster count");
  const CLI::Option* cluster_method = cluster->add_option(
      "--method", method, "kmeans++ or agglomerative-single-cosine");
  const CLI::Option* cluster_kind =
      cluster->add_option("--kind", kind, "encoder, decoder or combined");
  const CLI::Option* cluster_dims =
      cluster->add_option("--dims", dims, "embedding columns, 0 for all");

  CLI::App* segment = app.add_subcommand("segment", "segment one long sequence");
  const auto [segment_cfg, segment_seed] = add_common(segment);
  const CLI::Option* segment_model =
      segment->add_option("--model", model_path, "model checkpoint");
  const CLI::Option* segment_input =
      segment->add_option("--input", input_path, "long sequence CSV");
  const CLI::Option* segment_truth =
      segment->add_option("--truth", truth_path, "per-frame truth labels CSV");
  const CLI::Option* segment_k = segment->add_option("--k", k, "cluster count");
  const CLI::Option* segment_te = segment->add_option("--t-e", t_e, "encoder window");
  const CLI::Option* segment_td = segment->add_option("--t-d", t_d, "decoder window");
  const CLI::Option* segment_stride =
      segment->add_option("--stride", stride, "window stride");
  const CLI::Option* segment_dims =
      segment->add_option("--dims", dims, "projection width, 0 for full rank");
  const CLI::Option* segment_mode = segment->add_option(
      "--feature-mode", feature_mode, "window-mean or all-rows");

  CLI::App* report = app.add_subcommand("report", "tabulate a training history");
  const auto [report_cfg, report_seed] = add_common(report);
  const CLI::Option* report_history =
      report->add_option("--history", history_path, "history.json from a train run");

  CLI::App* rerun = app.add_subcommand("rerun", "replay a recorded manifest");
  rerun->add_option("--manifest", manifest_path, "manifest.json of the original run")
      ->required();
  rerun->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("usage", e.what());
    return kExitUsage;
  }

  const auto set_str = [](json& cfg, const char* key, const CLI::Option* opt,
                          const std::string& value) {
    if (opt->count() > 0) cfg[key] = value;
  };
  const auto set_int = [](json& cfg, const char* key, const CLI::Option* opt,
                          std::int64_t value) {
    if (opt->count() > 0) cfg[key] = value;
  };

  try {
    if (*gen) {
      json cfg = base_config(gen_cfg, config_path);
      cfg["out"] = out_dir;
      resolve_seed(cfg, gen_seed, seed);
      set_str(cfg, "preset", gen_preset, preset);
      set_int(cfg, "classes", gen_classes, classes);
      set_int(cfg, "rows", gen_rows, rows);
      if (gen_periods->count() > 0) cfg["periods"] = periods;
      set_int(cfg, "tiles", gen_tiles, tiles);
      if (gen_one_hot->count() > 0) cfg["one_hot"] = true;
      if (gen_concat_tiles->count() > 0) cfg["concat"]["tiles"] = concat_tiles;
      if (gen_concat_order->count() > 0) cfg["concat"]["order"] = concat_order;
      return run("gen", cfg);
    }
    if (*train) {
      json cfg = base_config(train_cfg, config_path);
      cfg["out"] = out_dir;
      resolve_seed(cfg, train_seed, seed);
      set_str(cfg, "data", train_data, data_dir);
      set_int(cfg, "iterations", train_iters, iterations);
      if (train_one_hot->count() > 0) cfg["one_hot"] = true;
      return run("train", cfg);
    }
    if (*embed) {
      json cfg = base_config(embed_cfg, config_path);
      cfg["out"] = out_dir;
      resolve_seed(cfg, embed_seed, seed);
      set_str(cfg, "model", embed_model, model_path);
      set_str(cfg, "data", embed_data, data_dir);
      return run("embed", cfg);
    }
    if (*cluster) {
      json cfg = base_config(cluster_cfg, config_path);
      cfg["out"] = out_dir;
      resolve_seed(cfg, cluster_seed, seed);
      set_str(cfg, "input", cluster_input, input_path);
      set_int(cfg, "k", cluster_k, k);
      set_str(cfg, "method", cluster_method, method);
      set_str(cfg, "kind", cluster_kind, kind);
      set_int(cfg, "dims", cluster_dims, dims);
      return run("cluster", cfg);
    }
    if (*segment) {
      json cfg = base_config(segment_cfg, config_path);
      cfg["out"] = out_dir;
      resolve_seed(cfg, segment_seed, seed);
      set_str(cfg, "model", segment_model, model_path);
      set_str(cfg, "input", segment_input, input_path);
      set_str(cfg, "truth", segment_truth, truth_path);
      set_int(cfg, "k", segment_k, k);
      set_int(cfg, "t_e", segment_te, t_e);
      set_int(cfg, "t_d", segment_td, t_d);
      set_int(cfg, "stride", segment_stride, stride);
      set_int(cfg, "dims", segment_dims, dims);
      set_str(cfg, "feature_mode", segment_mode, feature_mode);
      return run("segment", cfg);
    }
    if (*report) {
      json cfg = base_config(report_cfg, config_path);
      cfg["out"] = out_dir;
      resolve_seed(cfg, report_seed, seed);
      set_str(cfg, "history", report_history, history_path);
      return run("report", cfg);
    }
    if (*rerun) {
      char* manifest_text = nullptr;
      const se_status status =
          se_rerun(manifest_path.c_str(), out_dir.c_str(), &manifest_text);
      if (status != SE_OK) {
        print_error(se_status_name(status), se_last_error());
        return exit_code_for(status);
      }
      const json manifest = json::parse(manifest_text);
      se_free_string(manifest_text);
      std::printf("rerun of %s: %zu output file(s) + manifest.json under %s\n",
                  manifest.at("command").get<std::string>().c_str(),
                  manifest.at("outputs").size(), out_dir.c_str());
      return 0;
    }
  } catch (const CliFailure& f) {
    print_error(f.name, f.message);
    return f.code;
  }
  print_error("usage", "no subcommand given");
  return kExitUsage;
}
