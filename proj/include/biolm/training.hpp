#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolm/bpe.hpp"
#include "biolm/corpus.hpp"
#include "biolm/model.hpp"
#include "biolm/prompt.hpp"
#include "biolm/taskcodec.hpp"

namespace biolm::train {

struct TrainConfig {
  double peak_lr = 1e-3;
  int warmup_steps = 100;
  int total_steps = 500;       // pretrain step budget
  int epochs = 20;             // finetune epoch budget
  int tokens_per_batch = 1024; // micro-batch token budget
  int accumulation_steps = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  int seq_len = 128;           // pretrain window length
  int checkpoint_every = 0;    // pretrain; 0 = final only
  bool deterministic = true;   // forces dropout off

  void validate() const;
};

// peak_lr * min(step/warmup, sqrt(warmup/step)): linear warmup, then inverse
// square root decay. Continuous at step == warmup.
double lr_at(int64_t step, const TrainConfig& cfg);

// Mean over selected positions of -log softmax(logits)[target]. mask must
// select at least one position.
double lm_loss(const Tensor& logits, const std::vector<int32_t>& targets,
               const std::vector<uint8_t>& mask);

// Forward + backward for one assembled sequence. Zeroes grads (and dprompt
// when given), fills them with the gradient of the masked-mean loss, and
// returns that loss. Throws naming the tensor if any gradient is NaN.
double loss_and_grad(const model::ModelParams& params,
                     const prompt::AssembledSequence& seq,
                     const Tensor* prompt_embed, model::ModelParams& grads,
                     Tensor* dprompt);

// Forward-only masked-mean loss (the finite-difference side).
double sequence_loss(const model::ModelParams& params,
                     const prompt::AssembledSequence& seq,
                     const Tensor* prompt_embed);

struct AdamState {
  model::ModelParams m, v;
  Tensor prompt_m, prompt_v;
  int64_t t = 0;

  static AdamState make(const model::ModelParams& params,
                        const Tensor* prompt_embed);
};

// One Adam update with bias correction over every model tensor (and the
// prompt embeddings when present).
void adam_step(model::ModelParams& params, const model::ModelParams& grads,
               Tensor* prompt_embed, const Tensor* prompt_grads,
               AdamState& state, double lr, const TrainConfig& cfg);

// Single-tensor Adam update, exposed for the scalar hand-check.
void adam_step_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                      int64_t t, double lr, const TrainConfig& cfg);

struct TrainResult {
  std::vector<std::string> checkpoints;
  std::string final_checkpoint;
  std::string loss_log;
  bool diverged = false;
  double final_loss = 0.0;
  int64_t steps = 0;
};

// Language-model pretraining over document texts: encodes, concatenates with
// eos separators, slices fixed windows, and runs total_steps optimizer steps
// with gradient accumulation. Deterministic given the seed.
TrainResult pretrain_loop(const std::vector<std::string>& doc_texts,
                          const bpe::Encoder& encoder,
                          const model::ModelConfig& model_cfg,
                          const TrainConfig& cfg, const std::string& out_dir);

// Builds [source; prompt; target] sequences for a task split.
std::vector<prompt::AssembledSequence> build_finetune_sequences(
    const std::vector<corpus::TaskExample>& examples,
    const bpe::Encoder& encoder, codec::TargetFormat format,
    const codec::RelationLexicon& lexicon,
    const std::vector<std::string>& label_universe,
    const prompt::PromptState& prompt_state, int max_positions,
    int32_t eos_id);

// Fine-tunes params (and the prompt, when continuous) in place for
// cfg.epochs epochs, writing one checkpoint per epoch. Nothing is frozen.
TrainResult finetune_loop(model::ModelParams& params,
                          prompt::PromptState& prompt_state,
                          const std::vector<prompt::AssembledSequence>& data,
                          const TrainConfig& cfg, const std::string& out_dir,
                          const nlohmann::ordered_json& checkpoint_meta);

// Mean LM loss of the model over held-out texts (pretrain-style windows).
double held_out_lm_loss(const model::ModelParams& params,
                        const bpe::Encoder& encoder,
                        const std::vector<std::string>& texts, int seq_len);

}  // namespace biolm::train
