// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// The ranking network. A shared backbone produces a unit-norm representation
// h; a low-rank side pathway produces an increment h_lora from the same input
// the final projection consumes. Two fusions feed two mixture-of-experts
// heads:
//
//   h_main  = h + stop_grad(h_lora)   -> main head       -> y_hat
//   h_satis = stop_grad(h) + h_lora   -> satisfaction head -> s_hat
//
// Both fusions are value-identical; they differ only in which branch may
// receive gradient. y_hat is the served ranking score.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "easq/tensor.hpp"

namespace easq {

enum class BackboneKind { mlp, attention };
enum class RouterKind { relu, topk_softmax };

// Disjoint parameter groups; every parameter belongs to exactly one.
enum class ParamGroup { backbone, lora, main_head, satis_head };

const char* to_string(ParamGroup group);
const char* to_string(BackboneKind kind);
const char* to_string(RouterKind kind);
BackboneKind parse_backbone_kind(const std::string& s);
RouterKind parse_router_kind(const std::string& s);

struct EasqConfig {
  // Embedding widths per field type: ids, categorical context, dense buckets.
  std::size_t emb_id_dim = 64;
  std::size_t emb_cat_dim = 32;
  std::size_t emb_dense_dim = 8;
  // Vocabulary sizes; one extra reserved out-of-vocabulary row is added.
  std::size_t user_vocab = 200;
  std::size_t item_vocab = 300;
  std::size_t hour_vocab = 24;
  std::size_t duration_buckets = 8;

  BackboneKind backbone = BackboneKind::mlp;
  std::size_t backbone_hidden = 64;
  std::size_t d_h = 32;
  std::size_t attention_dim = 32;
  std::size_t attention_heads = 2;

  bool use_lora = true;
  std::size_t lora_rank = 4;

  std::size_t k1 = 4;
  std::size_t k2 = 2;
  std::size_t expert_hidden = 32;
  RouterKind router = RouterKind::relu;
  std::size_t topk = 2;
  // Replaces each head by one expert with a constant unit router weight.
  bool single_expert = false;

  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double beta = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_width() const;
  // Width of the input consumed by the adapted projection.
  std::size_t projection_input_width() const { return backbone_hidden; }
};

// One (user, item, context) example. Ids outside the vocabulary map to the
// reserved row 0 of their table.
struct Features {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  std::int64_t hour = 0;
  std::int64_t duration_bucket = 0;

  friend bool operator==(const Features&, const Features&) = default;
};

struct Parameter {
  std::string name;
  ParamGroup group;
  Tensor tensor;
};

struct Expert {
  Tensor w1;  // [hidden x d_h]
  Tensor b1;  // [hidden]
  Tensor w2;  // [1 x hidden]
  Tensor b2;  // [1]
};

// Two-layer softplus FFN with a scalar output.
Tensor expert_forward(const Expert& expert, const Tensor& input);

// relu: relu(gate . fused). topk_softmax: softmax(gate . fused) with all but
// the k largest entries zeroed and no renormalisation of the kept mass.
Tensor route(const Tensor& fused, const Tensor& gate, RouterKind kind, std::size_t topk);

// sum_k weights[k] * expert_k(fused). Experts with an exactly zero weight are
// not evaluated; their contribution and gradient are zero either way.
Tensor moe_forward(const Tensor& fused, const std::vector<Expert>& experts, const Tensor& weights);

struct Encoding {
  Tensor x;       // concatenated embeddings
  Tensor z;       // input of the final projection
  Tensor h;       // unit-norm backbone output
  Tensor h_lora;  // undefined when the pathway is disabled
};

struct HeadOutput {
  Tensor fused;
  Tensor weights;
  Tensor score;
};

struct ForwardResult {
  Encoding encoding;
  HeadOutput main;
  HeadOutput satis;
};

class EasqModel {
 public:
  explicit EasqModel(EasqConfig config);

  const EasqConfig& config() const { return config_; }

  std::vector<Tensor> embed_fields(const Features& f) const;
  Tensor embed(const Features& f) const;
  // Produces z and h from the field embeddings.
  Encoding encode(const Features& f) const;
  Tensor lora_forward(const Tensor& z) const;

  Tensor fuse_main(const Encoding& e) const;
  Tensor fuse_satis(const Encoding& e) const;

  HeadOutput main_head(const Encoding& e) const;
  HeadOutput satis_head(const Encoding& e) const;
  ForwardResult forward_all(const Features& f) const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Tensor> tensors() const;
  std::vector<Tensor> tensors(ParamGroup group) const;
  std::size_t parameter_count(ParamGroup group) const;
  const Parameter* find(const std::string& name) const;

  const Tensor& lora_a() const { return lora_a_; }
  const Tensor& lora_b() const { return lora_b_; }
  const std::vector<Expert>& experts(ParamGroup head) const;
  const Tensor& gate(ParamGroup head) const;

 private:
  Tensor& add_param(const std::string& name, ParamGroup group, Shape shape, double stddev);
  std::size_t table_row(std::int64_t id, std::size_t vocab) const;
  Tensor attention_pool(const std::vector<Tensor>& fields) const;
  HeadOutput run_head(const Tensor& fused, ParamGroup head) const;

  EasqConfig config_;
  std::vector<Parameter> params_;

  Tensor user_table_, item_table_, hour_table_, duration_table_;
  std::vector<Tensor> field_proj_;
  Tensor wq_, wk_, wv_, wo_;
  Tensor w_hidden_, b_hidden_, w0_;
  Tensor lora_a_, lora_b_;
  Tensor gate_main_, gate_satis_;
  std::vector<Expert> experts_main_, experts_satis_;
};

}  // namespace easq
