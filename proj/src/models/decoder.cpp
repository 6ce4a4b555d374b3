#include "vitask/models/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "vitask/numerics/ops.hpp"
#include "vitask/numerics/random.hpp"

namespace vitask::models {

namespace ops = numerics;
using numerics::Tensor;

namespace {

constexpr std::uint64_t kBaseStream = 0x42415345;
constexpr std::uint64_t kConnectorStream = 0x434f4e4e;
constexpr std::uint64_t kAdapterStream = 0x4c4f5241;
constexpr std::uint64_t kEncoderSalt = 0x9e3779b97f4a7c15ULL;

Var param(Tensor t) { return Var::parameter(std::move(t)); }

Var gauss(numerics::Shape shape, double stddev, numerics::Rng& rng) { return param(numerics::gaussian(std::move(shape), stddev, rng)); }

double inv_sqrt(std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

void zero_cols(Var& w, std::size_t begin) {
  Tensor& t = w.mutable_value();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = begin; c < t.cols(); ++c) t.at(r, c) = 0.0;
  }
}

void zero_rows(Var& w, std::size_t begin) {
  Tensor& t = w.mutable_value();
  const std::size_t width = t.rank() == 1 ? 1 : t.cols();
  for (std::size_t i = begin * width; i < t.size(); ++i) t[i] = 0.0;
}

Var adapted(const Var& x, const Var& w, const LowRankAdapter& adapter, bool on) {
  Var y = ops::affine(x, w);
  if (on) y = ops::add(y, ops::affine(ops::affine(x, adapter.a), adapter.b));
  return y;
}

Var copy_param(const Var& v) {
  Var out = Var::parameter(v.value());
  out.set_requires_grad(v.requires_grad());
  return out;
}

}  // namespace

DecoderModel::DecoderModel(const DecoderDims& dims, std::uint64_t seed) : dims_(dims) {
  const std::size_t d = dims.d_model;
  if (dims.vocab == 0 || d == 0 || dims.layers == 0 || dims.heads == 0 || dims.ff == 0 || dims.max_len == 0 ||
      dims.patches == 0 || dims.d_v == 0 || dims.d_t == 0 || dims.rank == 0) {
    throw std::invalid_argument("decoder dimensions must be positive");
  }
  if (d % dims.heads != 0) throw std::invalid_argument("d_model must be divisible by the head count");
  if (dims.d_v >= d) throw std::invalid_argument("image block must be narrower than d_model");

  encoder = FrozenEncoder(dims.input_dim, dims.patches, dims.d_v, seed ^ kEncoderSalt);

  auto rng = numerics::make_rng(seed, kBaseStream);
  const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(dims.layers));
  tok_emb = gauss({dims.vocab, d}, 0.5, rng);
  pos_emb = gauss({dims.max_len, d}, 0.1, rng);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    DecoderLayer layer;
    layer.wq = gauss({d, d}, inv_sqrt(d), rng);
    layer.wk = gauss({d, d}, inv_sqrt(d), rng);
    layer.wv = gauss({d, d}, inv_sqrt(d), rng);
    layer.wo = gauss({d, d}, inv_sqrt(d) * residual_scale, rng);
    layer.w1 = gauss({dims.ff, d}, inv_sqrt(d), rng);
    layer.b1 = param(Tensor({dims.ff}, 0.0));
    layer.w2 = gauss({d, dims.ff}, inv_sqrt(dims.ff) * residual_scale, rng);
    layer.b2 = param(Tensor({d}, 0.0));
    layers.push_back(std::move(layer));
  }
  out_w = gauss({dims.vocab, d}, inv_sqrt(d), rng);
  out_b = param(Tensor({dims.vocab}, 0.0));

  auto crng = numerics::make_rng(seed, kConnectorStream);
  vl_w = gauss({dims.d_v, dims.d_v}, inv_sqrt(dims.d_v), crng);
  vl_b = param(Tensor({dims.d_v}, 0.0));
  tc_w = param(Tensor({d, dims.d_t}, 0.0));
  tc_b = param(Tensor({d}, 0.0));

  auto arng = numerics::make_rng(seed, kAdapterStream);
  for (DecoderLayer& layer : layers) {
    layer.q_adapter = {gauss({dims.rank, d}, inv_sqrt(d), arng), param(Tensor({d, dims.rank}, 0.0))};
    layer.v_adapter = {gauss({dims.rank, d}, inv_sqrt(d), arng), param(Tensor({d, dims.rank}, 0.0))};
  }

  enforce_image_block();
  set_trainable(TrainPhase::warmup);
}

void DecoderModel::enforce_image_block() {
  const std::size_t img = image_begin();
  zero_cols(tok_emb, img);
  zero_cols(pos_emb, img);
  for (DecoderLayer& layer : layers) {
    zero_cols(layer.wq, img);
    zero_cols(layer.wk, img);
    zero_cols(layer.wv, img);
    zero_rows(layer.wo, img);
    zero_cols(layer.w1, img);
    zero_rows(layer.w2, img);
    zero_rows(layer.b2, img);
  }
  zero_cols(out_w, img);
}

Var DecoderModel::forward(const Var& inputs, std::size_t first_row, std::size_t rows, bool adapters_on) const {
  const std::size_t n = inputs.value().rows();
  if (inputs.value().rank() != 2 || inputs.value().cols() != dims_.d_model) {
    throw std::invalid_argument("decoder inputs must be [n, d_model], got " + numerics::shape_string(inputs.shape()));
  }
  if (n > dims_.max_len) {
    throw std::invalid_argument("sequence length " + std::to_string(n) + " exceeds max_len " + std::to_string(dims_.max_len));
  }
  if (rows == 0 || first_row + rows > n) throw std::out_of_range("decoder output rows outside the sequence");

  const std::size_t hd = dims_.d_model / dims_.heads;
  const double score_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Var x = ops::add(inputs, ops::slice_rows(pos_emb, 0, n));
  for (const DecoderLayer& layer : layers) {
    const Var q = adapted(x, layer.wq, layer.q_adapter, adapters_on);
    const Var k = ops::affine(x, layer.wk);
    const Var v = adapted(x, layer.wv, layer.v_adapter, adapters_on);
    std::vector<Var> heads;
    for (std::size_t h = 0; h < dims_.heads; ++h) {
      const Var qh = dims_.heads == 1 ? q : ops::slice_cols(q, h * hd, (h + 1) * hd);
      const Var kh = dims_.heads == 1 ? k : ops::slice_cols(k, h * hd, (h + 1) * hd);
      const Var vh = dims_.heads == 1 ? v : ops::slice_cols(v, h * hd, (h + 1) * hd);
      const Var weights = ops::softmax(ops::causal_mask(ops::scale(ops::matmul_nt(qh, kh), score_scale)));
      heads.push_back(ops::matmul(weights, vh));
    }
    const Var attended = dims_.heads == 1 ? heads.front() : ops::concat_cols(heads);
    x = ops::add(x, ops::affine(attended, layer.wo));
    x = ops::add(x, ops::affine(ops::gelu(ops::affine(x, layer.w1, layer.b1)), layer.w2, layer.b2));
  }
  const Var picked = (first_row == 0 && rows == n) ? x : ops::slice_rows(x, first_row, first_row + rows);
  return ops::affine(picked, out_w, out_b);
}

Var DecoderModel::image_embeddings(const std::vector<double>& features) const {
  const Var patches = Var::constant(encoder.patch_embeddings(features));
  const Var projected = ops::affine(patches, vl_w, vl_b);
  const Var blank = Var::constant(Tensor({dims_.patches, image_begin()}, 0.0));
  return ops::concat_cols({blank, projected});
}

Var DecoderModel::exemplar_embeddings(const Tensor& exemplars) const {
  if (exemplars.rank() != 2 || exemplars.cols() != dims_.d_t) {
    throw std::invalid_argument("exemplar width " + std::to_string(exemplars.cols()) +
                                " does not match the task connector input " + std::to_string(dims_.d_t));
  }
  return ops::affine(Var::constant(exemplars), tc_w, tc_b);
}

Var DecoderModel::token_embeddings(const std::vector<std::size_t>& ids) const { return ops::embedding(tok_emb, ids); }

void DecoderModel::set_trainable(TrainPhase phase) {
  const bool base = phase == TrainPhase::warmup;
  const bool adapters = phase == TrainPhase::stage1 || phase == TrainPhase::stage2;
  const bool connector = phase == TrainPhase::stage1;
  for (auto& [name, p] : named_parameters()) {
    bool on = base;
    if (name.find("adapter") != std::string::npos) on = adapters;
    if (name.rfind("task_connector", 0) == 0) on = connector;
    if (name.rfind("vl_connector", 0) == 0) on = false;
    p.set_requires_grad(on);
  }
}

std::vector<Var> DecoderModel::trainable_parameters() const {
  std::vector<Var> out;
  for (const auto& [name, p] : named_parameters()) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, Var>> DecoderModel::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out = {{"tok_emb", tok_emb}, {"pos_emb", pos_emb}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DecoderLayer& layer = layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    out.insert(out.end(), {{p + "wq", layer.wq},
                           {p + "wk", layer.wk},
                           {p + "wv", layer.wv},
                           {p + "wo", layer.wo},
                           {p + "w1", layer.w1},
                           {p + "b1", layer.b1},
                           {p + "w2", layer.w2},
                           {p + "b2", layer.b2},
                           {p + "q_adapter.a", layer.q_adapter.a},
                           {p + "q_adapter.b", layer.q_adapter.b},
                           {p + "v_adapter.a", layer.v_adapter.a},
                           {p + "v_adapter.b", layer.v_adapter.b}});
  }
  out.insert(out.end(), {{"out_w", out_w},
                         {"out_b", out_b},
                         {"vl_connector.w", vl_w},
                         {"vl_connector.b", vl_b},
                         {"task_connector.w", tc_w},
                         {"task_connector.b", tc_b}});
  return out;
}

DecoderModel DecoderModel::clone() const {
  DecoderModel out;
  out.dims_ = dims_;
  out.encoder = encoder;
  out.tok_emb = copy_param(tok_emb);
  out.pos_emb = copy_param(pos_emb);
  for (const DecoderLayer& layer : layers) {
    DecoderLayer c;
    c.wq = copy_param(layer.wq);
    c.wk = copy_param(layer.wk);
    c.wv = copy_param(layer.wv);
    c.wo = copy_param(layer.wo);
    c.w1 = copy_param(layer.w1);
    c.b1 = copy_param(layer.b1);
    c.w2 = copy_param(layer.w2);
    c.b2 = copy_param(layer.b2);
    c.q_adapter = {copy_param(layer.q_adapter.a), copy_param(layer.q_adapter.b)};
    c.v_adapter = {copy_param(layer.v_adapter.a), copy_param(layer.v_adapter.b)};
    out.layers.push_back(std::move(c));
  }
  out.out_w = copy_param(out_w);
  out.out_b = copy_param(out_b);
  out.vl_w = copy_param(vl_w);
  out.vl_b = copy_param(vl_b);
  out.tc_w = copy_param(tc_w);
  out.tc_b = copy_param(tc_b);
  return out;
}

}  // namespace vitask::models
