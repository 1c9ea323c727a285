// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace seqembed {

struct SeqModelConfig {
  Index input_dim = 1;
  Index hidden_dim = 1;
  Index encoder_steps = 1;
  Index decoder_steps = 1;
  bool share_params = false;
  // First decoder input: the final encoder input frame by default, or the
  // projected final encoder state when set.
  bool project_first_decoder_input = false;
  std::uint64_t seed = 0;
  double learning_rate = 0.01;
  std::optional<double> grad_clip_norm;
};

// One GRU gate block. Input maps are input_dim x hidden_dim, recurrent maps
// hidden_dim square, biases 1 x hidden_dim. Steps use the row convention
// a = x * W + h_prev * U + b.
struct GruWeights {
  Matrix Wz, Uz, bz;
  Matrix Wr, Ur, br;
  Matrix Wh, Uh, bh;
};

// Every trainable tensor of a model. When parameters are shared the decoder
// runs on `enc` and `dec` stays zero and is excluded from the flat view.
struct ParamSet {
  GruWeights enc;
  GruWeights dec;
  Matrix Wo;  // hidden_dim x input_dim
  Matrix bo;  // 1 x input_dim
};

struct SeqModelParams {
  SeqModelConfig config;
  ParamSet value;
  ParamSet m;  // ADAM first moments
  ParamSet v;  // ADAM second moments
  std::int64_t step = 0;
  // Bumped on every mutation; forward stamps it into the bundle so backward
  // can reject caches built against older weights.
  std::uint64_t revision = 0;

  GruWeights& encoder_gates() { return value.enc; }
  const GruWeights& encoder_gates() const { return value.enc; }
  GruWeights& decoder_gates() { return config.share_params ? value.enc : value.dec; }
  const GruWeights& decoder_gates() const {
    return config.share_params ? value.enc : value.dec;
  }
};

// Per-step activations kept for backpropagation.
struct GateCache {
  Matrix x;       // 1 x input_dim
  Matrix h_prev;  // 1 x hidden_dim
  Matrix z, r, htilde;
};

struct StateBundle {
  Matrix E;      // encoder_steps x hidden_dim
  Matrix D;      // decoder_steps x hidden_dim
  Matrix Y_hat;  // decoder_steps x input_dim
  std::vector<GateCache> enc_cache;
  std::vector<GateCache> dec_cache;
  std::uint64_t revision = 0;
};

struct TensorRef {
  std::string name;
  Matrix* tensor;
};
struct ConstTensorRef {
  std::string name;
  const Matrix* tensor;
};

// Flat view over a parameter set in a fixed canonical order. Bias tensors
// carry ".b" in their name.
std::vector<TensorRef> tensor_view(ParamSet& set, bool share_params);
std::vector<ConstTensorRef> tensor_view(const ParamSet& set, bool share_params);

// Weights uniform in [-1/sqrt(hidden_dim), +1/sqrt(hidden_dim)] from the
// seeded generator, biases and moments zero.
SeqModelParams init_params(const SeqModelConfig& config);

// One GRU step; fills `cache` when non-null.
Matrix gru_step(const Matrix& x, const Matrix& h_prev, const GruWeights& w,
                GateCache* cache);

// Runs the encoder over all rows of X from a zero initial state, then the
// decoder for decoder_steps steps seeded with the final encoder state. The
// decoder consumes its own previous output at every step after the first.
StateBundle forward(const Matrix& X, const SeqModelParams& params, Index decoder_steps);

// Squared error summed over features, averaged over decoder steps.
double mse_loss(const Matrix& Y, const Matrix& Y_hat);

// Exact gradients of the loss, including the path through the decoder's
// output feedback. Shared-parameter gradients are summed into `enc`.
ParamSet backward(const StateBundle& bundle, const Matrix& X, const Matrix& Y,
                  const SeqModelParams& params);

void adam_update(SeqModelParams& params, const ParamSet& grads, double learning_rate);

// JSON checkpoint; weights, moments and the step counter round-trip
// bit-exactly.
void save_checkpoint(const SeqModelParams& params, const std::string& path);
SeqModelParams load_checkpoint(const std::string& path);

}  // namespace seqembed
