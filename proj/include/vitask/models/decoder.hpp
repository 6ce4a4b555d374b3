#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vitask/models/encoder.hpp"
#include "vitask/numerics/autograd.hpp"

namespace vitask::models {

using numerics::Var;

struct DecoderDims {
  std::size_t vocab = 0;
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ff = 256;
  std::size_t max_len = 96;
  std::size_t patches = 4;
  std::size_t d_v = 16;
  std::size_t d_t = 32;
  std::size_t rank = 4;
  std::size_t input_dim = 16;

  friend bool operator==(const DecoderDims&, const DecoderDims&) = default;
};

/// Additive low-rank update W + B A with A: [r, d_in], B: [d_out, r].
struct LowRankAdapter {
  Var a;
  Var b;
};

struct DecoderLayer {
  Var wq, wk, wv, wo;
  Var w1, b1, w2, b2;
  LowRankAdapter q_adapter, v_adapter;
};

/// Which parameter groups receive gradient.
enum class TrainPhase { warmup, stage1, stage2, frozen };

/// Causal decoder with its frozen encoder, frozen vision-language connector,
/// learnable task connector and low-rank adapters.
///
/// The last d_v residual dimensions are reserved for image content: the
/// vision-language connector writes only there, while the base weights
/// neither read from nor write to that block. The base model is therefore
/// blind to the image, and only the adapters (which read every dimension)
/// can route visual information into the prediction. The task connector
/// writes to every dimension.
class DecoderModel {
 public:
  DecoderModel() = default;
  DecoderModel(const DecoderDims& dims, std::uint64_t seed);

  const DecoderDims& dims() const noexcept { return dims_; }
  std::size_t image_begin() const noexcept { return dims_.d_model - dims_.d_v; }

  /// inputs: [n, d_model] input embeddings (positions are added here).
  /// Returns logits [rows, V] for sequence rows [first_row, first_row + rows).
  Var forward(const Var& inputs, std::size_t first_row, std::size_t rows, bool adapters_on = true) const;

  /// [P, d_model] image rows for a feature vector.
  Var image_embeddings(const std::vector<double>& features) const;
  /// [n, d_model] rows for exemplar vectors [n, d_t].
  Var exemplar_embeddings(const numerics::Tensor& exemplars) const;
  Var token_embeddings(const std::vector<std::size_t>& ids) const;

  void set_trainable(TrainPhase phase);
  std::vector<Var> trainable_parameters() const;
  /// Every tensor in a fixed order with stable names.
  std::vector<std::pair<std::string, Var>> named_parameters() const;

  /// Zeros the base-weight entries that would touch the image block.
  void enforce_image_block();

  /// Deep copy with fresh parameter nodes and the same trainability.
  DecoderModel clone() const;

  FrozenEncoder encoder;
  Var tok_emb, pos_emb;
  std::vector<DecoderLayer> layers;
  Var out_w, out_b;
  Var vl_w, vl_b;
  Var tc_w, tc_b;

 private:
  DecoderDims dims_;
};

}  // namespace vitask::models
