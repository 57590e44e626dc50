// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "easq/error.hpp"
#include "easq/rng.hpp"

namespace easq {

namespace {
constexpr double kEmbStd = 0.3;
}

const char* to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::backbone:
      return "backbone";
    case ParamGroup::lora:
      return "lora";
    case ParamGroup::main_head:
      return "main_head";
    case ParamGroup::satis_head:
      return "satis_head";
  }
  return "?";
}

const char* to_string(BackboneKind kind) {
  return kind == BackboneKind::mlp ? "mlp" : "attention";
}

const char* to_string(RouterKind kind) {
  return kind == RouterKind::relu ? "relu" : "topk_softmax";
}

BackboneKind parse_backbone_kind(const std::string& s) {
  if (s == "mlp") return BackboneKind::mlp;
  if (s == "attention") return BackboneKind::attention;
  throw ConfigError("unknown backbone kind '" + s + "' (expected mlp or attention)");
}

RouterKind parse_router_kind(const std::string& s) {
  if (s == "relu") return RouterKind::relu;
  if (s == "topk_softmax") return RouterKind::topk_softmax;
  throw ConfigError("unknown router kind '" + s + "' (expected relu or topk_softmax)");
}

std::size_t EasqConfig::input_width() const {
  return 2 * emb_id_dim + emb_cat_dim + emb_dense_dim;
}

void EasqConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be >= 1");
  };
  positive(emb_id_dim, "emb_id_dim");
  positive(emb_cat_dim, "emb_cat_dim");
  positive(emb_dense_dim, "emb_dense_dim");
  positive(backbone_hidden, "backbone_hidden");
  positive(d_h, "d_h");
  positive(k1, "k1");
  positive(k2, "k2");
  positive(expert_hidden, "expert_hidden");
  if (use_lora) {
    const std::size_t k = projection_input_width();
    if (lora_rank < 1 || lora_rank >= std::min(d_h, k)) {
      throw ConfigError("model.lora_rank must satisfy 1 <= r < min(d_h, " + std::to_string(k) +
                        "), got " + std::to_string(lora_rank));
    }
  }
  if (backbone == BackboneKind::attention) {
    positive(attention_heads, "attention_heads");
    if (attention_dim % attention_heads != 0) {
      throw ConfigError("model.attention_dim must be divisible by model.attention_heads");
    }
  }
  if (router == RouterKind::topk_softmax && !single_expert &&
      (topk < 1 || topk > std::min(k1, k2))) {
    throw ConfigError("model.topk must satisfy 1 <= topk <= min(k1, k2)");
  }
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw ConfigError("model.lambda1 and model.lambda2 must be >= 0");
  }
  if (!(beta > 0.0)) throw ConfigError("model.beta must be > 0");
}

Tensor expert_forward(const Expert& expert, const Tensor& input) {
  Tensor hidden = softplus(add(affine(expert.w1, input), expert.b1));
  return add(affine(expert.w2, hidden), expert.b2);
}

Tensor route(const Tensor& fused, const Tensor& gate, RouterKind kind, std::size_t topk) {
  Tensor logits = affine(gate, fused);
  if (kind == RouterKind::relu) return relu(logits);

  const std::size_t k = logits.size();
  if (topk < 1 || topk > k) {
    throw ContractError("route: topk " + std::to_string(topk) + " outside [1, " +
                        std::to_string(k) + "]");
  }
  Tensor probs = softmax(logits);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> keep(k, 0.0);
  for (std::size_t i = 0; i < topk; ++i) keep[order[i]] = 1.0;
  return mask(probs, keep);
}

Tensor moe_forward(const Tensor& fused, const std::vector<Expert>& experts, const Tensor& weights) {
  if (weights.size() != experts.size()) {
    throw DimensionError("moe_forward: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(experts.size()) + " experts");
  }
  Tensor score;
  for (std::size_t k = 0; k < experts.size(); ++k) {
    if (weights[k] == 0.0) continue;
    Tensor term = mul_scalar(expert_forward(experts[k], fused), slice(weights, k, 1));
    score = score.defined() ? add(score, term) : term;
  }
  return score.defined() ? score : Tensor::scalar(0.0);
}

EasqModel::EasqModel(EasqConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;

  user_table_ = add_param("emb.user", ParamGroup::backbone, {c.user_vocab + 1, c.emb_id_dim}, kEmbStd);
  item_table_ = add_param("emb.item", ParamGroup::backbone, {c.item_vocab + 1, c.emb_id_dim}, kEmbStd);
  hour_table_ = add_param("emb.hour", ParamGroup::backbone, {c.hour_vocab + 1, c.emb_cat_dim}, kEmbStd);
  duration_table_ = add_param("emb.duration", ParamGroup::backbone,
                              {c.duration_buckets + 1, c.emb_dense_dim}, kEmbStd);

  std::size_t pooled_width = c.input_width();
  if (c.backbone == BackboneKind::attention) {
    const std::size_t a = c.attention_dim;
    const std::size_t widths[] = {c.emb_id_dim, c.emb_id_dim, c.emb_cat_dim, c.emb_dense_dim};
    for (std::size_t f = 0; f < 4; ++f) {
      field_proj_.push_back(add_param("attn.field" + std::to_string(f), ParamGroup::backbone,
                                      {a, widths[f]}, 1.0 / std::sqrt(double(widths[f]))));
    }
    const double s = 1.0 / std::sqrt(double(a));
    wq_ = add_param("attn.wq", ParamGroup::backbone, {a, a}, s);
    wk_ = add_param("attn.wk", ParamGroup::backbone, {a, a}, s);
    wv_ = add_param("attn.wv", ParamGroup::backbone, {a, a}, s);
    wo_ = add_param("attn.wo", ParamGroup::backbone, {a, a}, s);
    pooled_width = a;
  }
  w_hidden_ = add_param("backbone.w_hidden", ParamGroup::backbone, {c.backbone_hidden, pooled_width},
                        1.0 / std::sqrt(double(pooled_width)));
  b_hidden_ = add_param("backbone.b_hidden", ParamGroup::backbone, {c.backbone_hidden}, 0.0);
  w0_ = add_param("backbone.w0", ParamGroup::backbone, {c.d_h, c.backbone_hidden},
                  1.0 / std::sqrt(double(c.backbone_hidden)));

  if (c.use_lora) {
    // B = 0 makes the pathway an exact no-op at initialisation.
    lora_a_ = add_param("lora.a", ParamGroup::lora, {c.lora_rank, c.projection_input_width()},
                        1.0 / std::sqrt(double(c.lora_rank)));
    lora_b_ = add_param("lora.b", ParamGroup::lora, {c.d_h, c.lora_rank}, 0.0);
  }

  // Head inputs are unit-norm, so unit-variance weights give unit-variance
  // pre-activations.
  auto build_head = [&](const std::string& prefix, ParamGroup group, std::size_t count,
                        Tensor& gate, std::vector<Expert>& experts) {
    if (c.single_expert) {
      count = 1;
    } else {
      gate = add_param(prefix + ".gate", group, {count, c.d_h}, 1.0);
    }
    for (std::size_t k = 0; k < count; ++k) {
      const std::string e = prefix + ".expert" + std::to_string(k);
      Expert ex;
      ex.w1 = add_param(e + ".w1", group, {c.expert_hidden, c.d_h}, 1.0);
      ex.b1 = add_param(e + ".b1", group, {c.expert_hidden}, 0.0);
      ex.w2 = add_param(e + ".w2", group, {1, c.expert_hidden},
                        1.0 / std::sqrt(double(c.expert_hidden)));
      ex.b2 = add_param(e + ".b2", group, {1}, 0.0);
      experts.push_back(std::move(ex));
    }
  };
  build_head("main", ParamGroup::main_head, c.k1, gate_main_, experts_main_);
  build_head("satis", ParamGroup::satis_head, c.k2, gate_satis_, experts_satis_);
}

Tensor& EasqModel::add_param(const std::string& name, ParamGroup group, Shape shape, double stddev) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> values(n, 0.0);
  if (stddev > 0.0) {
    // One stream per parameter name, so adding or removing a component leaves
    // the initialisation of every other parameter untouched.
    Rng rng(mix_seed(config_.seed, hash_name(name)));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : values) v = dist(rng);
  }
  params_.push_back({name, group, Tensor::from(std::move(shape), std::move(values), true)});
  return params_.back().tensor;
}

std::size_t EasqModel::table_row(std::int64_t id, std::size_t vocab) const {
  if (id < 0 || static_cast<std::uint64_t>(id) >= vocab) return 0;
  return static_cast<std::size_t>(id) + 1;
}

std::vector<Tensor> EasqModel::embed_fields(const Features& f) const {
  const auto& c = config_;
  return {row(user_table_, table_row(f.user_id, c.user_vocab)),
          row(item_table_, table_row(f.item_id, c.item_vocab)),
          row(hour_table_, table_row(f.hour, c.hour_vocab)),
          row(duration_table_, table_row(f.duration_bucket, c.duration_buckets))};
}

Tensor EasqModel::embed(const Features& f) const { return concat(embed_fields(f)); }

Tensor EasqModel::attention_pool(const std::vector<Tensor>& fields) const {
  const std::size_t a = config_.attention_dim;
  const std::size_t heads = config_.attention_heads;
  const std::size_t dh = a / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));
  const std::size_t n = fields.size();

  std::vector<Tensor> tokens, q, k, v;
  for (std::size_t t = 0; t < n; ++t) {
    tokens.push_back(affine(field_proj_[t], fields[t]));
    q.push_back(affine(wq_, tokens[t]));
    k.push_back(affine(wk_, tokens[t]));
    v.push_back(affine(wv_, tokens[t]));
  }
  Tensor pooled;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Tensor> head_out;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      Tensor qh = slice(q[t], hd * dh, dh);
      std::vector<Tensor> scores;
      for (std::size_t s = 0; s < n; ++s) {
        scores.push_back(scale(dot(qh, slice(k[s], hd * dh, dh)), inv_sqrt));
      }
      Tensor w = softmax(concat(scores));
      Tensor acc;
      for (std::size_t s = 0; s < n; ++s) {
        Tensor term = mul_scalar(slice(v[s], hd * dh, dh), slice(w, s, 1));
        acc = acc.defined() ? add(acc, term) : term;
      }
      head_out.push_back(acc);
    }
    Tensor out = add(tokens[t], affine(wo_, concat(head_out)));
    pooled = pooled.defined() ? add(pooled, out) : out;
  }
  return scale(pooled, 1.0 / double(n));
}

Tensor EasqModel::lora_forward(const Tensor& z) const {
  if (!config_.use_lora) throw ContractError("lora_forward on a model without the LoRA pathway");
  return affine(lora_b_, affine(lora_a_, z));
}

Encoding EasqModel::encode(const Features& f) const {
  Encoding e;
  auto fields = embed_fields(f);
  e.x = concat(fields);
  Tensor pooled = config_.backbone == BackboneKind::mlp ? e.x : attention_pool(fields);
  e.z = softplus(add(affine(w_hidden_, pooled), b_hidden_));
  e.h = l2_normalize(affine(w0_, e.z));
  // The adapter reads z but must not train the backbone.
  if (config_.use_lora) e.h_lora = lora_forward(stop_grad(e.z));
  return e;
}

Tensor EasqModel::fuse_main(const Encoding& e) const {
  if (!e.h_lora.defined()) return e.h;
  return add(e.h, stop_grad(e.h_lora));
}

Tensor EasqModel::fuse_satis(const Encoding& e) const {
  if (!e.h_lora.defined()) return stop_grad(e.h);
  return add(stop_grad(e.h), e.h_lora);
}

HeadOutput EasqModel::run_head(const Tensor& fused, ParamGroup head) const {
  HeadOutput out;
  out.fused = fused;
  const auto& ex = experts(head);
  if (config_.single_expert) {
    out.weights = Tensor::scalar(1.0);
    out.score = expert_forward(ex.front(), fused);
    return out;
  }
  out.weights = route(fused, gate(head), config_.router, config_.topk);
  out.score = moe_forward(fused, ex, out.weights);
  return out;
}

HeadOutput EasqModel::main_head(const Encoding& e) const {
  return run_head(fuse_main(e), ParamGroup::main_head);
}

HeadOutput EasqModel::satis_head(const Encoding& e) const {
  return run_head(fuse_satis(e), ParamGroup::satis_head);
}

ForwardResult EasqModel::forward_all(const Features& f) const {
  ForwardResult r;
  r.encoding = encode(f);
  r.main = main_head(r.encoding);
  r.satis = satis_head(r.encoding);
  return r;
}

std::vector<Tensor> EasqModel::tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::vector<Tensor> EasqModel::tensors(ParamGroup group) const {
  std::vector<Tensor> out;
  for (const auto& p : params_) {
    if (p.group == group) out.push_back(p.tensor);
  }
  return out;
}

std::size_t EasqModel::parameter_count(ParamGroup group) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.group == group) n += p.tensor.size();
  }
  return n;
}

const Parameter* EasqModel::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const std::vector<Expert>& EasqModel::experts(ParamGroup head) const {
  if (head == ParamGroup::main_head) return experts_main_;
  if (head == ParamGroup::satis_head) return experts_satis_;
  throw ContractError("experts(): not a head group");
}

const Tensor& EasqModel::gate(ParamGroup head) const {
  if (head == ParamGroup::main_head) return gate_main_;
  if (head == ParamGroup::satis_head) return gate_satis_;
  throw ContractError("gate(): not a head group");
}

}  // namespace easq
