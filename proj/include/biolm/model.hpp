#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "biolm/rng.hpp"
#include "biolm/tensor.hpp"

namespace biolm::model {

// Architecture hyperparameters. The conventions are the GPT-2 ones: pre-norm
// residual blocks, GELU feed-forward, learned positional embeddings, tied
// input/output embeddings.
struct ModelConfig {
  int num_layers = 2;
  int hidden_size = 64;
  int num_heads = 4;
  int ffn_size = 256;  // 4 x hidden by convention
  int max_positions = 256;
  int vocab_size = 512;
  double dropout = 0.0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  static ModelConfig desk_preset();
  static ModelConfig paper_preset();
};

// Exact parameter count implied by the config, with weight tying (the output
// projection reuses the token embedding and contributes nothing).
int64_t count_params(const ModelConfig& config);

struct LayerParams {
  Tensor ln1_gain, ln1_bias;
  Tensor attn_qkv_w, attn_qkv_b;    // (3H,H), (3H)
  Tensor attn_proj_w, attn_proj_b;  // (H,H), (H)
  Tensor ln2_gain, ln2_bias;
  Tensor mlp_fc_w, mlp_fc_b;        // (F,H), (F)
  Tensor mlp_proj_w, mlp_proj_b;    // (H,F), (H)
};

struct ModelParams {
  ModelConfig config;
  Tensor wte;  // (V,H), also the output projection (tied)
  Tensor wpe;  // (P,H)
  std::vector<LayerParams> layers;
  Tensor lnf_gain, lnf_bias;

  // Visits every tensor with a stable name ("wte", "layers.0.attn_qkv_w",
  // ...). The order is fixed; checkpoints, Adam and the finite-difference
  // harness all key off it.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(
      const std::function<void(const std::string&, const Tensor&)>& fn) const;
  Tensor* find(const std::string& name);

  static ModelParams init(const ModelConfig& config, Rng& rng);
  static ModelParams zeros_like(const ModelParams& other);
};

// One input position: either a vocabulary token or a virtual prompt row
// (continuous prompt embedding; these have no vocabulary id).
struct PosInput {
  int32_t token = -1;
  int32_t prompt_row = -1;

  static PosInput tok(int32_t id) { return {id, -1}; }
  static PosInput prompt(int32_t row) { return {-1, row}; }
  bool is_prompt() const { return prompt_row >= 0; }
};

using SequencePlan = std::vector<PosInput>;

SequencePlan plan_from_ids(const std::vector<int32_t>& ids);

// Forward activations, kept for the backward pass. Buffers are plain flat
// vectors sized on demand; one instance is reused across calls.
struct Activations {
  int T = 0;
  Tensor embedded;  // (T,H) token/prompt embedding + positional
  struct LayerActs {
    Tensor ln1_out, ln1_mean, ln1_rstd;
    Tensor qkv;       // (T,3H)
    Tensor att;       // (NH,T,T)
    Tensor att_out;   // (T,H)
    Tensor att_proj;  // (T,H)
    Tensor res1;      // (T,H)
    Tensor ln2_out, ln2_mean, ln2_rstd;
    Tensor fc_out;    // (T,F)
    Tensor gelu_out;  // (T,F)
    Tensor mlp_proj;  // (T,H)
    Tensor res2;      // (T,H)
    Tensor drop1_mask, drop2_mask;  // (T,H), kept only when dropout is live
  };
  std::vector<LayerActs> layers;
  Tensor lnf_out, lnf_mean, lnf_rstd;
  Tensor logits;  // (T,V)
};

struct ForwardOptions {
  const Tensor* prompt_embed = nullptr;  // (prompt_len,H), for virtual rows
  bool training = false;                 // enables dropout when > 0
  Rng* dropout_rng = nullptr;
};

// Runs the decoder stack over a plan, filling acts (including logits).
// Throws on out-of-range ids, prompt rows, or length > max_positions.
void forward(const ModelParams& params, const SequencePlan& plan,
             Activations& acts, const ForwardOptions& opts = {});

// Backpropagates dlogits (T,V) through saved activations, accumulating into
// grads (and dprompt for virtual rows; required if the plan has any).
void backward(const ModelParams& params, const SequencePlan& plan,
              const Activations& acts, const double* dlogits,
              ModelParams& grads, Tensor* dprompt,
              const ForwardOptions& opts = {});

// Convenience wrapper over token ids; returns logits (T,V).
Tensor forward_logits(const ModelParams& params,
                      const std::vector<int32_t>& ids);

// Standalone multi-head attention op: produces the attended hidden vectors
// (after the output projection) plus the per-head attention weights, causal.
struct AttentionOutput {
  Tensor hidden;   // (T,H)
  Tensor weights;  // (NH,T,T), rows sum to 1 over positions <= t
};

AttentionOutput multi_head_attention(const Tensor& x, const LayerParams& layer,
                                     int num_heads);

}  // namespace biolm::model
