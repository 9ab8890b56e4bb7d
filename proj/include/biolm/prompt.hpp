#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biolm/bpe.hpp"
#include "biolm/model.hpp"

namespace biolm::prompt {

enum class PromptKind { hard, continuous };

// "hard:we can conclude that" or "cont:9".
struct PromptSpec {
  PromptKind kind = PromptKind::continuous;
  std::string hard_text;  // nonempty when hard
  int length = 9;         // virtual token count when continuous

  static PromptSpec parse(const std::string& spec);
  std::string to_string() const;
  void validate() const;
};

// Learned virtual-token embeddings; trained jointly with the model.
struct PromptParams {
  Tensor embed;  // (length, hidden)

  static PromptParams init(int length, int hidden, Rng& rng);
};

// A prompt ready for sequence assembly: hard prompts are pre-tokenized,
// continuous prompts carry their embedding matrix.
struct PromptState {
  PromptSpec spec;
  std::vector<int32_t> hard_ids;  // hard only
  PromptParams params;            // continuous only

  int length() const {
    return spec.kind == PromptKind::hard ? static_cast<int>(hard_ids.size())
                                         : spec.length;
  }
  bool is_continuous() const { return spec.kind == PromptKind::continuous; }
};

PromptState make_prompt_state(const PromptSpec& spec,
                              const bpe::Encoder& encoder, int hidden,
                              Rng& rng);

// [source; prompt; target] plus shifted targets and the loss mask: mask[j]
// marks positions whose next-token prediction is a target token, so exactly
// the target tokens are trained on. Overflow truncates the source from the
// left (never the prompt or the target) and sets `truncated`.
struct AssembledSequence {
  model::SequencePlan plan;
  std::vector<int32_t> targets;  // per position; -1 where unused
  std::vector<uint8_t> mask;     // per position; 1 = contributes to the loss
  bool truncated = false;
};

AssembledSequence assemble(const std::vector<int32_t>& source_ids,
                           const PromptState& prompt,
                           const std::vector<int32_t>& target_ids,
                           int max_positions);

// [source; prompt], the generation prefix. Same truncation rule.
model::SequencePlan inference_prefix(const std::vector<int32_t>& source_ids,
                                     const PromptState& prompt,
                                     int max_positions,
                                     int reserve_new_tokens = 0);

}  // namespace biolm::prompt
