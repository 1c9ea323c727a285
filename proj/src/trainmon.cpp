// SPDX-License-Identifier: Apache-2.0
#include "trainmon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <utility>

#include "json.hpp"

#include "clusterlab.hpp"
#include "csvio.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace seqembed {

namespace fs = std::filesystem;

namespace {

ParamSet zero_like(const ParamSet& src, bool share_params) {
  ParamSet zero;
  const auto from = tensor_view(src, share_params);
  const auto to = tensor_view(zero, share_params);
  for (std::size_t i = 0; i < from.size(); ++i)
    *to[i].tensor = Matrix::Zero(from[i].tensor->rows(), from[i].tensor->cols());
  return zero;
}

void add_params(ParamSet& acc, const ParamSet& grads, bool share_params) {
  const auto a = tensor_view(acc, share_params);
  const auto g = tensor_view(grads, share_params);
  for (std::size_t i = 0; i < a.size(); ++i) *a[i].tensor += *g[i].tensor;
}

void scale_params(ParamSet& acc, double factor, bool share_params) {
  for (const auto& ref : tensor_view(acc, share_params)) *ref.tensor *= factor;
}

// (type label, sequence index) sorted by label; each label's first sequence
// stands in for the type. Unlabeled batches treat every sequence as a type.
std::vector<std::pair<std::int64_t, Index>> type_representatives(
    const SequenceBatch& batch) {
  std::vector<std::pair<std::int64_t, Index>> reps;
  if (batch.labels) {
    std::map<std::int64_t, Index> first;
    for (std::size_t i = 0; i < batch.sequences.size(); ++i)
      first.emplace((*batch.labels)[i], static_cast<Index>(i));
    reps.assign(first.begin(), first.end());
  } else {
    for (std::size_t i = 0; i < batch.sequences.size(); ++i)
      reps.emplace_back(static_cast<std::int64_t>(i), static_cast<Index>(i));
  }
  return reps;
}

bool constant_series(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

EmbeddingSnapshot snapshot(const SeqModelParams& params, const SequenceBatch& batch,
                           const std::vector<double>& sve_levels,
                           const std::vector<Index>& cluster_dims) {
  if (batch.sequences.empty()) throw InvalidInput("snapshot: empty batch");
  if (batch.labels && batch.labels->size() != batch.sequences.size())
    throw InvalidInput("snapshot: label count does not match sequence count");
  if (sve_levels.empty()) throw InvalidInput("snapshot: no energy levels");
  for (const double level : sve_levels)
    if (!(level > 0.0 && level <= 1.0))
      throw InvalidInput("snapshot: energy level outside (0, 1]");
  if (cluster_dims.empty()) throw InvalidInput("snapshot: no clustering widths");
  for (const Index dim : cluster_dims)
    if (dim < 0) throw InvalidInput("snapshot: negative clustering width");

  const auto reps = type_representatives(batch);
  const Index te = params.config.encoder_steps;
  const Index td = params.config.decoder_steps;
  const Index k = static_cast<Index>(reps.size());

  std::vector<StateBundle> bundles;
  bundles.reserve(reps.size());
  std::vector<Matrix> stacked;
  stacked.reserve(reps.size());
  double loss_sum = 0.0;
  for (const auto& [type, index] : reps) {
    const SeqPair pair = make_pair(batch.sequences[static_cast<std::size_t>(index)],
                                   te, td, 0);
    StateBundle bundle = forward(pair.X, params, td);
    loss_sum += mse_loss(pair.Y, bundle.Y_hat);
    stacked.push_back(assemble_state_matrix(bundle));
    bundles.push_back(std::move(bundle));
  }

  EmbeddingSnapshot snap;
  snap.iteration = params.step;
  snap.train_loss = loss_sum / static_cast<double>(k);
  snap.basis = pod(assemble_global(stacked));
  const Index full = snap.basis.sigma.size();

  for (std::size_t i = 0; i < reps.size(); ++i) {
    Trajectory enc = project(prepend_zero_row(bundles[i].E), snap.basis, full);
    enc.kind = TrajectoryKind::encoder;
    enc.type_label = reps[i].first;
    enc.iteration = params.step;
    snap.trajectories.push_back(std::move(enc));
    Trajectory dec = project(bundles[i].D, snap.basis, full);
    dec.kind = TrajectoryKind::decoder;
    dec.type_label = reps[i].first;
    dec.iteration = params.step;
    snap.trajectories.push_back(std::move(dec));
  }

  // Per-type spectra once per kind; counts emitted in (kind, level, type)
  // order.
  const TrajectoryKind kinds[3] = {TrajectoryKind::encoder, TrajectoryKind::decoder,
                                   TrajectoryKind::combined};
  std::vector<std::vector<Vector>> spectra(3);
  for (int kk = 0; kk < 3; ++kk) {
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const Matrix& source = kk == 0   ? bundles[i].E
                             : kk == 1 ? bundles[i].D
                                       : stacked[i];
      spectra[static_cast<std::size_t>(kk)].push_back(pod(source).sigma);
    }
  }
  for (int kk = 0; kk < 3; ++kk)
    for (const double level : sve_levels)
      for (std::size_t i = 0; i < reps.size(); ++i)
        snap.mode_counts.push_back(
            {kinds[kk], level, reps[i].first,
             mode_count(spectra[static_cast<std::size_t>(kk)][i], level)});

  // Cluster raw state rows of each side in the projected frame; the truth
  // label of a row is the type it came from. Attractors form closed loops,
  // so partitioning uses single-linkage cosine rather than centroid methods.
  Matrix enc_rows(k * te, params.config.hidden_dim);
  Matrix dec_rows(k * td, params.config.hidden_dim);
  std::vector<std::int64_t> enc_truth, dec_truth;
  for (Index i = 0; i < k; ++i) {
    enc_rows.middleRows(i * te, te) = bundles[static_cast<std::size_t>(i)].E;
    dec_rows.middleRows(i * td, td) = bundles[static_cast<std::size_t>(i)].D;
    enc_truth.insert(enc_truth.end(), static_cast<std::size_t>(te), i);
    dec_truth.insert(dec_truth.end(), static_cast<std::size_t>(td), i);
  }
  const TrajectoryKind sides[2] = {TrajectoryKind::encoder, TrajectoryKind::decoder};
  for (int side = 0; side < 2; ++side) {
    const Matrix& rows = side == 0 ? enc_rows : dec_rows;
    const std::vector<std::int64_t>& truth = side == 0 ? enc_truth : dec_truth;
    for (const Index dim : cluster_dims) {
      const Index width = (dim == 0 || dim > full) ? full : dim;
      PointSet ps;
      ps.points = project(rows, snap.basis, width).points;
      ps.truth = truth;
      const ClusterResult res = agglomerative_cosine(ps, k);
      snap.aris.push_back({sides[side], dim, ari(res.labels, truth)});
    }
  }
  return snap;
}

double snapshot_ari(const EmbeddingSnapshot& snap, TrajectoryKind kind, Index dim) {
  for (const AriEntry& entry : snap.aris)
    if (entry.kind == kind && entry.dim == dim) return entry.value;
  throw InvalidInput("snapshot_ari: no entry for the requested kind and width");
}

Index snapshot_mode_count(const EmbeddingSnapshot& snap, TrajectoryKind kind,
                          double sve_level, std::int64_t type) {
  for (const ModeCountEntry& entry : snap.mode_counts)
    if (entry.kind == kind && entry.sve_level == sve_level && entry.type == type)
      return entry.count;
  throw InvalidInput("snapshot_mode_count: no entry for the requested key");
}

TrainHistory train(const TrainConfig& config, const SequenceBatch& batch,
                   const std::optional<SequenceBatch>& validation) {
  if (config.iterations < 0) throw InvalidInput("train: negative iteration count");
  if (config.batch_size < 0) throw InvalidInput("train: negative batch size");
  if (config.validation_fraction < 0.0 || config.validation_fraction >= 1.0)
    throw InvalidInput("train: validation_fraction must be in [0, 1)");
  for (std::size_t i = 0; i < config.snapshot_iters.size(); ++i) {
    const Index at = config.snapshot_iters[i];
    if (at < 0 || at > config.iterations)
      throw InvalidInput("train: snapshot iteration outside [0, iterations]");
    if (i > 0 && config.snapshot_iters[i - 1] >= at)
      throw InvalidInput("train: snapshot iterations must be strictly ascending");
  }
  if (batch.sequences.empty()) throw InvalidInput("train: empty batch");
  if (batch.labels && batch.labels->size() != batch.sequences.size())
    throw InvalidInput("train: label count does not match sequence count");

  const Index window = config.model.encoder_steps + config.model.decoder_steps;
  const auto check_sequences = [&](const SequenceBatch& b, const char* what) {
    for (std::size_t i = 0; i < b.sequences.size(); ++i) {
      if (b.sequences[i].cols() != config.model.input_dim)
        throw InvalidInput(std::string("train: ") + what + " sequence " +
                           std::to_string(i) + " width does not match input_dim");
      if (b.sequences[i].rows() < window)
        throw InvalidInput(std::string("train: ") + what + " sequence " +
                           std::to_string(i) +
                           " is shorter than the encoder+decoder window");
    }
  };
  check_sequences(batch, "input");
  if (validation) {
    if (validation->sequences.empty())
      throw InvalidInput("train: empty validation batch");
    check_sequences(*validation, "validation");
  }

  const Index n = static_cast<Index>(batch.sequences.size());
  std::vector<Index> train_idx, val_idx;
  if (!validation && config.validation_fraction > 0.0) {
    if (n < 2)
      throw InvalidInput("train: held-out validation needs at least 2 sequences");
    Index n_val = static_cast<Index>(
        std::llround(config.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<Index>(n_val, 1, n - 1);
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    Rng split_rng = Rng(config.model.seed).fork(1);
    for (Index b = 0; b < n_val; ++b) {
      const Index j = b + split_rng.uniform_int(n - b);
      std::swap(pool[static_cast<std::size_t>(b)], pool[static_cast<std::size_t>(j)]);
    }
    val_idx.assign(pool.begin(), pool.begin() + n_val);
    std::sort(val_idx.begin(), val_idx.end());
    train_idx.assign(pool.begin() + n_val, pool.end());
    std::sort(train_idx.begin(), train_idx.end());
  } else {
    train_idx.resize(static_cast<std::size_t>(n));
    std::iota(train_idx.begin(), train_idx.end(), Index{0});
  }

  const Index te = config.model.encoder_steps;
  const Index td = config.model.decoder_steps;
  std::vector<SeqPair> val_pairs;
  if (validation) {
    for (const Matrix& seq : validation->sequences)
      val_pairs.push_back(make_pair(seq, te, td, 0));
  } else {
    for (const Index i : val_idx)
      val_pairs.push_back(make_pair(batch.sequences[static_cast<std::size_t>(i)],
                                    te, td, 0));
  }

  SequenceBatch train_batch;
  for (const Index i : train_idx)
    train_batch.sequences.push_back(batch.sequences[static_cast<std::size_t>(i)]);
  if (batch.labels) {
    train_batch.labels.emplace();
    for (const Index i : train_idx)
      train_batch.labels->push_back((*batch.labels)[static_cast<std::size_t>(i)]);
  }

  TrainHistory history;
  history.train_indices = train_idx;
  history.val_indices = val_idx;

  SeqModelParams params = init_params(config.model);
  Rng sample_rng = Rng(config.model.seed).fork(2);
  const bool share = config.model.share_params;

  const auto eval_loss = [&](const std::vector<SeqPair>& pairs) {
    double sum = 0.0;
    for (const SeqPair& pair : pairs)
      sum += mse_loss(pair.Y, forward(pair.X, params, td).Y_hat);
    return sum / static_cast<double>(pairs.size());
  };

  const auto push_snapshot = [&](std::optional<double> vloss) {
    EmbeddingSnapshot snap =
        snapshot(params, train_batch, config.sve_levels, config.cluster_dims);
    snap.val_loss = vloss;
    if (!history.snapshots.empty()) {
      const Vector& prev = history.snapshots.back().basis.sigma;
      const Vector& cur = snap.basis.sigma;
      const Index len = std::max(prev.size(), cur.size());
      snap.sigma_deltas.resize(len);
      for (Index i = 0; i < len; ++i) {
        const double a = i < prev.size() ? prev(i) : 0.0;
        const double b = i < cur.size() ? cur(i) : 0.0;
        snap.sigma_deltas(i) = std::abs(b - a);
      }
    }
    history.snapshots.push_back(std::move(snap));
  };

  std::size_t next_snap = 0;
  if (next_snap < config.snapshot_iters.size() && config.snapshot_iters[next_snap] == 0) {
    std::optional<double> vloss;
    if (!val_pairs.empty()) vloss = eval_loss(val_pairs);
    push_snapshot(vloss);
    ++next_snap;
  }

  for (Index iter = 1; iter <= config.iterations; ++iter) {
    std::vector<Index> selected;
    if (config.batch_size == 0 ||
        config.batch_size >= static_cast<Index>(train_idx.size())) {
      selected = train_idx;
    } else {
      std::vector<Index> pool = train_idx;
      for (Index b = 0; b < config.batch_size; ++b) {
        const Index j =
            b + sample_rng.uniform_int(static_cast<Index>(pool.size()) - b);
        std::swap(pool[static_cast<std::size_t>(b)], pool[static_cast<std::size_t>(j)]);
      }
      selected.assign(pool.begin(), pool.begin() + config.batch_size);
      std::sort(selected.begin(), selected.end());
    }

    ParamSet total = zero_like(params.value, share);
    double loss_sum = 0.0;
    for (const Index si : selected) {
      const Matrix& seq = batch.sequences[static_cast<std::size_t>(si)];
      const Index range = seq.rows() - window;
      const Index offset = range > 0 ? sample_rng.uniform_int(range + 1) : 0;
      const SeqPair pair = make_pair(seq, te, td, offset);
      const StateBundle bundle = forward(pair.X, params, td);
      loss_sum += mse_loss(pair.Y, bundle.Y_hat);
      add_params(total, backward(bundle, pair.X, pair.Y, params), share);
    }
    const double train_loss = loss_sum / static_cast<double>(selected.size());
    if (!std::isfinite(train_loss))
      throw TrainingFailure(
          "train: non-finite loss at iteration " + std::to_string(iter), iter - 1);
    scale_params(total, 1.0 / static_cast<double>(selected.size()), share);
    try {
      adam_update(params, total, config.model.learning_rate);
    } catch (const NumericalFailure& failure) {
      throw TrainingFailure(std::string("train: ") + failure.what() +
                                " at iteration " + std::to_string(iter),
                            iter - 1);
    }

    history.train_losses.push_back(train_loss);
    std::optional<double> vloss;
    if (!val_pairs.empty()) {
      vloss = eval_loss(val_pairs);
      history.val_losses.push_back(*vloss);
    }
    if (next_snap < config.snapshot_iters.size() &&
        config.snapshot_iters[next_snap] == iter) {
      push_snapshot(vloss);
      ++next_snap;
    }
  }

  history.params = std::move(params);
  return history;
}

std::vector<ModeCountSeries> mode_count_curve(const TrainHistory& history) {
  if (history.snapshots.empty())
    throw InvalidInput("mode_count_curve: no snapshots");
  std::vector<ModeCountSeries> series;
  for (const ModeCountEntry& key : history.snapshots.front().mode_counts) {
    ModeCountSeries s;
    s.kind = key.kind;
    s.sve_level = key.sve_level;
    s.type = key.type;
    for (const EmbeddingSnapshot& snap : history.snapshots) {
      s.iterations.push_back(snap.iteration);
      s.counts.push_back(snapshot_mode_count(snap, key.kind, key.sve_level, key.type));
    }
    series.push_back(std::move(s));
  }
  return series;
}

double loss_ari_correlation(const TrainHistory& history, TrajectoryKind kind,
                            Index dim) {
  if (history.snapshots.size() < 3)
    throw InvalidInput("loss_ari_correlation: need at least 3 snapshots");
  std::vector<double> losses, scores;
  for (const EmbeddingSnapshot& snap : history.snapshots) {
    losses.push_back(snap.train_loss);
    scores.push_back(snapshot_ari(snap, kind, dim));
  }
  if (constant_series(losses))
    throw InvalidInput("loss_ari_correlation: constant loss series");
  if (constant_series(scores))
    throw InvalidInput("loss_ari_correlation: constant ari series");
  const double count = static_cast<double>(losses.size());
  const double mean_l = std::accumulate(losses.begin(), losses.end(), 0.0) / count;
  const double mean_s = std::accumulate(scores.begin(), scores.end(), 0.0) / count;
  double cov = 0.0, var_l = 0.0, var_s = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double dl = losses[i] - mean_l;
    const double ds = scores[i] - mean_s;
    cov += dl * ds;
    var_l += dl * dl;
    var_s += ds * ds;
  }
  return cov / std::sqrt(var_l * var_s);
}

OptimalIteration detect_optimal_iteration(const TrainHistory& history) {
  const auto& snaps = history.snapshots;
  if (snaps.size() < 3)
    throw InvalidInput("detect_optimal_iteration: need at least 3 snapshots");
  for (const EmbeddingSnapshot& snap : snaps)
    if (!snap.val_loss)
      throw InvalidInput("detect_optimal_iteration: snapshots lack validation loss");

  // Track decoder separability at full rank when recorded, otherwise at the
  // widest recorded projection.
  bool have_full = false;
  Index widest = -1;
  for (const AriEntry& entry : snaps.front().aris) {
    if (entry.kind != TrajectoryKind::decoder) continue;
    if (entry.dim == 0) have_full = true;
    widest = std::max(widest, entry.dim);
  }
  if (!have_full && widest < 0)
    throw InvalidInput("detect_optimal_iteration: no decoder ari recorded");
  const Index dim = have_full ? 0 : widest;

  const std::size_t count = snaps.size();
  std::vector<double> smoothed(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(count - 1, i + 1);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += *snaps[j].val_loss;
    smoothed[i] = sum / static_cast<double>(hi - lo + 1);
  }

  std::size_t peak = 0, bottom = 0;
  for (std::size_t i = 1; i < count; ++i) {
    if (snapshot_ari(snaps[i], TrajectoryKind::decoder, dim) >
        snapshot_ari(snaps[peak], TrajectoryKind::decoder, dim))
      peak = i;
    if (smoothed[i] < smoothed[bottom]) bottom = i;
  }
  OptimalIteration out;
  out.iter_ari_peak = snaps[peak].iteration;
  out.iter_val_min = snaps[bottom].iteration;
  out.gap = std::abs(static_cast<Index>(peak) - static_cast<Index>(bottom));
  return out;
}

void write_history(const std::string& dir, const TrainHistory& history) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "snapshots", ec);
  if (ec) throw IoError("write_history: cannot create " + dir);

  std::vector<std::string> lines{"iteration,train_loss,val_loss"};
  const bool has_val = !history.val_losses.empty();
  for (std::size_t i = 0; i < history.train_losses.size(); ++i) {
    std::string line = std::to_string(i + 1);
    line += ',';
    line += format_double(history.train_losses[i]);
    line += ',';
    if (has_val) line += format_double(history.val_losses[i]);
    lines.push_back(std::move(line));
  }
  write_lines_atomic((fs::path(dir) / "losses.csv").string(), lines);

  lines = {"kind,sve_level,type,iteration,count"};
  for (const EmbeddingSnapshot& snap : history.snapshots) {
    for (const ModeCountEntry& entry : snap.mode_counts) {
      std::string line = trajectory_kind_name(entry.kind);
      line += ',';
      line += format_double(entry.sve_level);
      line += ',';
      line += std::to_string(entry.type);
      line += ',';
      line += std::to_string(snap.iteration);
      line += ',';
      line += std::to_string(entry.count);
      lines.push_back(std::move(line));
    }
  }
  write_lines_atomic((fs::path(dir) / "mode_counts.csv").string(), lines);

  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "train_history";
  doc["iterations"] = history.train_losses.size();
  doc["final_step"] = history.params.step;
  doc["train_indices"] = history.train_indices;
  doc["val_indices"] = history.val_indices;
  doc["snapshots"] = nlohmann::json::array();
  for (const EmbeddingSnapshot& snap : history.snapshots) {
    char name[40];
    std::snprintf(name, sizeof name, "snapshot_%06lld.csv",
                  static_cast<long long>(snap.iteration));
    write_trajectory_csv((fs::path(dir) / "snapshots" / name).string(),
                         snap.trajectories);

    nlohmann::json entry;
    entry["iteration"] = snap.iteration;
    entry["train_loss"] = snap.train_loss;
    entry["val_loss"] =
        snap.val_loss ? nlohmann::json(*snap.val_loss) : nlohmann::json(nullptr);
    entry["trajectory_file"] = std::string("snapshots/") + name;
    entry["sigma"] = std::vector<double>(snap.basis.sigma.begin(), snap.basis.sigma.end());
    entry["sigma_deltas"] =
        std::vector<double>(snap.sigma_deltas.begin(), snap.sigma_deltas.end());
    entry["ari"] = nlohmann::json::array();
    for (const AriEntry& a : snap.aris)
      entry["ari"].push_back({{"kind", trajectory_kind_name(a.kind)},
                              {"dim", a.dim},
                              {"value", a.value}});
    entry["mode_counts"] = nlohmann::json::array();
    for (const ModeCountEntry& m : snap.mode_counts)
      entry["mode_counts"].push_back({{"kind", trajectory_kind_name(m.kind)},
                                      {"sve_level", m.sve_level},
                                      {"type", m.type},
                                      {"count", m.count}});
    doc["snapshots"].push_back(std::move(entry));
  }
  write_lines_atomic((fs::path(dir) / "history.json").string(), {doc.dump(2)});
}

}  // namespace seqembed
