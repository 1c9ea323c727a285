// SPDX-License-Identifier: Apache-2.0
#include "seqmodel.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include "json.hpp"

#include "csvio.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace seqembed {

namespace {

using nlohmann::json;

Matrix logistic(const Matrix& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

void validate(const SeqModelConfig& c) {
  if (c.input_dim < 1 || c.hidden_dim < 1 || c.encoder_steps < 1 || c.decoder_steps < 1)
    throw InvalidInput("seqmodel: dimensions and step counts must be positive");
  if (!(c.learning_rate > 0.0))
    throw InvalidInput("seqmodel: learning_rate must be positive");
  if (c.grad_clip_norm && !(*c.grad_clip_norm > 0.0))
    throw InvalidInput("seqmodel: grad_clip_norm must be positive when set");
}

GruWeights zero_gates(Index m, Index n) {
  GruWeights w;
  w.Wz = Matrix::Zero(m, n);
  w.Uz = Matrix::Zero(n, n);
  w.bz = Matrix::Zero(1, n);
  w.Wr = Matrix::Zero(m, n);
  w.Ur = Matrix::Zero(n, n);
  w.br = Matrix::Zero(1, n);
  w.Wh = Matrix::Zero(m, n);
  w.Uh = Matrix::Zero(n, n);
  w.bh = Matrix::Zero(1, n);
  return w;
}

ParamSet zero_params(const SeqModelConfig& c) {
  ParamSet p;
  p.enc = zero_gates(c.input_dim, c.hidden_dim);
  p.dec = zero_gates(c.input_dim, c.hidden_dim);
  p.Wo = Matrix::Zero(c.hidden_dim, c.input_dim);
  p.bo = Matrix::Zero(1, c.input_dim);
  return p;
}

template <typename Set, typename Ref>
std::vector<Ref> list_tensors(Set& set, bool share_params) {
  std::vector<Ref> out;
  auto block = [&out](const char* prefix, auto& g) {
    const std::string p(prefix);
    out.push_back({p + ".Wz", &g.Wz});
    out.push_back({p + ".Uz", &g.Uz});
    out.push_back({p + ".bz", &g.bz});
    out.push_back({p + ".Wr", &g.Wr});
    out.push_back({p + ".Ur", &g.Ur});
    out.push_back({p + ".br", &g.br});
    out.push_back({p + ".Wh", &g.Wh});
    out.push_back({p + ".Uh", &g.Uh});
    out.push_back({p + ".bh", &g.bh});
  };
  block("enc", set.enc);
  if (!share_params) block("dec", set.dec);
  out.push_back({"out.Wo", &set.Wo});
  out.push_back({"out.bo", &set.bo});
  return out;
}

bool is_bias(const std::string& name) { return name.find(".b") != std::string::npos; }

// Backward pass of one GRU step. Accumulates weight gradients into g and
// returns the gradients flowing to the step input and the previous state.
void gru_step_backward(const GateCache& c, const GruWeights& w, const Matrix& dh,
                       GruWeights& g, Matrix& dx, Matrix& dh_prev) {
  const Matrix dz = dh.cwiseProduct(c.htilde - c.h_prev);
  const Matrix da =
      dh.cwiseProduct(c.z).cwiseProduct((1.0 - c.htilde.array().square()).matrix());
  const Matrix dzp =
      dz.cwiseProduct(c.z).cwiseProduct((1.0 - c.z.array()).matrix());
  const Matrix drh = da * w.Uh.transpose();
  const Matrix dr = drh.cwiseProduct(c.h_prev);
  const Matrix drp = dr.cwiseProduct(c.r).cwiseProduct((1.0 - c.r.array()).matrix());

  dh_prev = dh.cwiseProduct((1.0 - c.z.array()).matrix()) + drh.cwiseProduct(c.r) +
            dzp * w.Uz.transpose() + drp * w.Ur.transpose();
  dx = dzp * w.Wz.transpose() + drp * w.Wr.transpose() + da * w.Wh.transpose();

  g.Wz += c.x.transpose() * dzp;
  g.Uz += c.h_prev.transpose() * dzp;
  g.bz += dzp;
  g.Wr += c.x.transpose() * drp;
  g.Ur += c.h_prev.transpose() * drp;
  g.br += drp;
  g.Wh += c.x.transpose() * da;
  g.Uh += c.r.cwiseProduct(c.h_prev).transpose() * da;
  g.bh += da;
}

json tensor_to_json(const Matrix& t) {
  json data = json::array();
  for (Index r = 0; r < t.rows(); ++r)
    for (Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
  return json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::move(data)}};
}

void tensor_from_json(const json& j, const std::string& name, Matrix& t) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw InvalidInput("checkpoint: malformed tensor " + name);
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  if (rows != t.rows() || cols != t.cols())
    throw InvalidInput("checkpoint: shape mismatch for " + name);
  const auto& data = j.at("data");
  if (!data.is_array() || static_cast<Index>(data.size()) != rows * cols)
    throw InvalidInput("checkpoint: bad data length for " + name);
  Index k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) t(r, c) = data.at(k++).get<double>();
  if (!t.allFinite()) throw InvalidInput("checkpoint: non-finite entry in " + name);
}

json set_to_json(const ParamSet& set, bool share_params) {
  json out = json::object();
  for (const auto& ref : tensor_view(set, share_params))
    out[ref.name] = tensor_to_json(*ref.tensor);
  return out;
}

void set_from_json(const json& j, ParamSet& set, bool share_params) {
  auto refs = tensor_view(set, share_params);
  if (!j.is_object() || j.size() != refs.size())
    throw InvalidInput("checkpoint: unexpected tensor list");
  for (auto& ref : refs) {
    if (!j.contains(ref.name))
      throw InvalidInput("checkpoint: missing tensor " + ref.name);
    tensor_from_json(j.at(ref.name), ref.name, *ref.tensor);
  }
}

}  // namespace

std::vector<TensorRef> tensor_view(ParamSet& set, bool share_params) {
  return list_tensors<ParamSet, TensorRef>(set, share_params);
}

std::vector<ConstTensorRef> tensor_view(const ParamSet& set, bool share_params) {
  return list_tensors<const ParamSet, ConstTensorRef>(set, share_params);
}

SeqModelParams init_params(const SeqModelConfig& config) {
  validate(config);
  SeqModelParams p;
  p.config = config;
  p.value = zero_params(config);
  p.m = zero_params(config);
  p.v = zero_params(config);

  Rng rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  for (auto& ref : tensor_view(p.value, config.share_params)) {
    if (is_bias(ref.name)) continue;
    Matrix& t = *ref.tensor;
    for (Index r = 0; r < t.rows(); ++r)
      for (Index c = 0; c < t.cols(); ++c) t(r, c) = rng.uniform(-bound, bound);
  }
  return p;
}

Matrix gru_step(const Matrix& x, const Matrix& h_prev, const GruWeights& w,
                GateCache* cache) {
  const Matrix z = logistic(x * w.Wz + h_prev * w.Uz + w.bz);
  const Matrix r = logistic(x * w.Wr + h_prev * w.Ur + w.br);
  const Matrix htilde =
      (x * w.Wh + r.cwiseProduct(h_prev) * w.Uh + w.bh).array().tanh().matrix();
  Matrix h = (1.0 - z.array()).matrix().cwiseProduct(h_prev) + z.cwiseProduct(htilde);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = z;
    cache->r = r;
    cache->htilde = htilde;
  }
  return h;
}

StateBundle forward(const Matrix& X, const SeqModelParams& params, Index decoder_steps) {
  const SeqModelConfig& cfg = params.config;
  if (X.rows() < 1 || X.cols() != cfg.input_dim)
    throw InvalidInput("forward: input must have input_dim columns");
  if (!X.allFinite()) throw InvalidInput("forward: non-finite input");
  if (decoder_steps < 1) throw InvalidInput("forward: decoder_steps must be positive");

  const Index te = X.rows();
  StateBundle out;
  out.revision = params.revision;
  out.E.resize(te, cfg.hidden_dim);
  out.enc_cache.resize(static_cast<std::size_t>(te));
  const GruWeights& enc = params.encoder_gates();
  Matrix h = Matrix::Zero(1, cfg.hidden_dim);
  for (Index t = 0; t < te; ++t) {
    h = gru_step(X.row(t), h, enc, &out.enc_cache[static_cast<std::size_t>(t)]);
    out.E.row(t) = h;
  }

  out.D.resize(decoder_steps, cfg.hidden_dim);
  out.Y_hat.resize(decoder_steps, cfg.input_dim);
  out.dec_cache.resize(static_cast<std::size_t>(decoder_steps));
  const GruWeights& dec = params.decoder_gates();
  Matrix input = cfg.project_first_decoder_input
                     ? Matrix(out.E.row(te - 1) * params.value.Wo + params.value.bo)
                     : Matrix(X.row(te - 1));
  for (Index t = 0; t < decoder_steps; ++t) {
    h = gru_step(input, h, dec, &out.dec_cache[static_cast<std::size_t>(t)]);
    out.D.row(t) = h;
    out.Y_hat.row(t) = h * params.value.Wo + params.value.bo;
    input = out.Y_hat.row(t);
  }
  return out;
}

double mse_loss(const Matrix& Y, const Matrix& Y_hat) {
  if (Y.rows() != Y_hat.rows() || Y.cols() != Y_hat.cols())
    throw InvalidInput("mse_loss: shape mismatch");
  return (Y - Y_hat).squaredNorm() / static_cast<double>(Y.rows());
}

ParamSet backward(const StateBundle& bundle, const Matrix& X, const Matrix& Y,
                  const SeqModelParams& params) {
  const SeqModelConfig& cfg = params.config;
  if (bundle.revision != params.revision)
    throw InvalidState("backward: bundle is stale; rerun forward after updates");
  const Index te = bundle.E.rows();
  const Index td = bundle.D.rows();
  if (X.rows() != te || X.cols() != cfg.input_dim)
    throw InvalidInput("backward: input shape mismatch");
  if (Y.rows() != td || Y.cols() != cfg.input_dim)
    throw InvalidInput("backward: target shape mismatch");

  ParamSet g = zero_params(cfg);
  GruWeights& gdec = cfg.share_params ? g.enc : g.dec;

  const Matrix dLdY = (2.0 / static_cast<double>(td)) * (bundle.Y_hat - Y);
  Matrix carry_dx = Matrix::Zero(1, cfg.input_dim);
  Matrix carry_dh = Matrix::Zero(1, cfg.hidden_dim);
  Matrix de_last = Matrix::Zero(1, cfg.hidden_dim);
  for (Index t = td - 1; t >= 0; --t) {
    // dy collects the loss term plus the feedback path into step t+1.
    const Matrix dy = dLdY.row(t) + carry_dx;
    g.Wo += bundle.D.row(t).transpose() * dy;
    g.bo += dy;
    const Matrix dh = dy * params.value.Wo.transpose() + carry_dh;
    Matrix dx, dh_prev;
    gru_step_backward(bundle.dec_cache[static_cast<std::size_t>(t)],
                      params.decoder_gates(), dh, gdec, dx, dh_prev);
    if (t > 0) {
      carry_dx = std::move(dx);
      carry_dh = std::move(dh_prev);
    } else {
      de_last = std::move(dh_prev);
      if (cfg.project_first_decoder_input) {
        // The first decoder input is itself a projection of e_last.
        g.Wo += bundle.E.row(te - 1).transpose() * dx;
        g.bo += dx;
        de_last += dx * params.value.Wo.transpose();
      }
    }
  }

  Matrix dh = std::move(de_last);
  for (Index t = te - 1; t >= 0; --t) {
    Matrix dx, dh_prev;
    gru_step_backward(bundle.enc_cache[static_cast<std::size_t>(t)],
                      params.encoder_gates(), dh, g.enc, dx, dh_prev);
    dh = std::move(dh_prev);
  }
  return g;
}

void adam_update(SeqModelParams& params, const ParamSet& grads, double learning_rate) {
  const bool share = params.config.share_params;
  auto gview = tensor_view(grads, share);
  for (const auto& ref : gview)
    if (!ref.tensor->allFinite())
      throw NumericalFailure("adam_update: non-finite gradient in " + ref.name,
                             params.step);

  double scale = 1.0;
  if (params.config.grad_clip_norm) {
    double sq = 0.0;
    for (const auto& ref : gview) sq += ref.tensor->squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > *params.config.grad_clip_norm) scale = *params.config.grad_clip_norm / norm;
  }

  params.step += 1;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(params.step));
  const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(params.step));

  auto tview = tensor_view(params.value, share);
  auto mview = tensor_view(params.m, share);
  auto vview = tensor_view(params.v, share);
  for (std::size_t i = 0; i < tview.size(); ++i) {
    const Matrix g = scale * (*gview[i].tensor);
    Matrix& m = *mview[i].tensor;
    Matrix& v = *vview[i].tensor;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const Matrix mhat = m / corr1;
    const Matrix vhat = v / corr2;
    tview[i].tensor->array() -=
        learning_rate * mhat.array() / (vhat.array().sqrt() + eps);
  }
  params.revision += 1;
}

void save_checkpoint(const SeqModelParams& params, const std::string& path) {
  const SeqModelConfig& c = params.config;
  for (const auto& ref : tensor_view(params.value, c.share_params))
    if (!ref.tensor->allFinite())
      throw InvalidState("checkpoint: non-finite parameter in " + ref.name);

  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "gru_seq2seq_checkpoint";
  doc["config"] = {
      {"input_dim", c.input_dim},
      {"hidden_dim", c.hidden_dim},
      {"encoder_steps", c.encoder_steps},
      {"decoder_steps", c.decoder_steps},
      {"share_params", c.share_params},
      {"project_first_decoder_input", c.project_first_decoder_input},
      {"seed", c.seed},
      {"learning_rate", c.learning_rate},
      {"grad_clip_norm", c.grad_clip_norm ? json(*c.grad_clip_norm) : json(nullptr)},
  };
  doc["step"] = params.step;
  doc["value"] = set_to_json(params.value, c.share_params);
  doc["m"] = set_to_json(params.m, c.share_params);
  doc["v"] = set_to_json(params.v, c.share_params);
  write_lines_atomic(path, {doc.dump()});
}

SeqModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IngestionError(std::string("checkpoint: parse failure: ") + e.what(), path, 0);
  }
  if (!doc.is_object() || doc.value("kind", "") != "gru_seq2seq_checkpoint")
    throw IngestionError("checkpoint: unrecognized document kind", path, 0);
  if (doc.value("schema_version", -1) != 1)
    throw IngestionError("checkpoint: unsupported schema_version", path, 0);

  SeqModelConfig c;
  try {
    const json& jc = doc.at("config");
    c.input_dim = jc.at("input_dim").get<Index>();
    c.hidden_dim = jc.at("hidden_dim").get<Index>();
    c.encoder_steps = jc.at("encoder_steps").get<Index>();
    c.decoder_steps = jc.at("decoder_steps").get<Index>();
    c.share_params = jc.at("share_params").get<bool>();
    c.project_first_decoder_input = jc.at("project_first_decoder_input").get<bool>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    c.learning_rate = jc.at("learning_rate").get<double>();
    if (!jc.at("grad_clip_norm").is_null())
      c.grad_clip_norm = jc.at("grad_clip_norm").get<double>();

    validate(c);
    SeqModelParams p;
    p.config = c;
    p.value = zero_params(c);
    p.m = zero_params(c);
    p.v = zero_params(c);
    p.step = doc.at("step").get<std::int64_t>();
    if (p.step < 0) throw InvalidInput("checkpoint: negative step counter");
    set_from_json(doc.at("value"), p.value, c.share_params);
    set_from_json(doc.at("m"), p.m, c.share_params);
    set_from_json(doc.at("v"), p.v, c.share_params);
    return p;
  } catch (const json::exception& e) {
    throw IngestionError(std::string("checkpoint: ") + e.what(), path, 0);
  } catch (const InvalidInput& e) {
    throw IngestionError(e.what(), path, 0);
  }
}

}  // namespace seqembed
