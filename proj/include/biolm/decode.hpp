#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biolm/model.hpp"

namespace biolm::decode {

struct DecodeConfig {
  enum class Strategy { greedy, beam };
  Strategy strategy = Strategy::greedy;
  int beam_size = 5;
  int max_new_tokens = 64;
  int32_t end_id = 2;
  double length_penalty = 1.0;

  void validate() const;
};

// Generated ids (end token excluded) plus the hypothesis score: the sum of
// chosen per-token log-probabilities (including the end token's, when one
// was emitted) divided by steps^length_penalty.
struct GenResult {
  std::vector<int32_t> ids;
  double score = 0.0;
};

// Argmax decoding; ties break to the lowest token id. Stops at the end id or
// the token budget. Deterministic.
GenResult greedy_generate(const model::ModelParams& params,
                          const model::SequencePlan& prefix,
                          const Tensor* prompt_embed,
                          const DecodeConfig& config);

// Length-normalized beam search. Hypotheses finishing inside the per-step
// top beam_size move to a finished pool; the pool and any still-live
// hypotheses compete only once the search ends (beam_size finished
// hypotheses collected, or the budget is spent). beam_size=1 reproduces
// greedy_generate exactly.
GenResult beam_generate(const model::ModelParams& params,
                        const model::SequencePlan& prefix,
                        const Tensor* prompt_embed, const DecodeConfig& config);

GenResult generate(const model::ModelParams& params,
                   const model::SequencePlan& prefix,
                   const Tensor* prompt_embed, const DecodeConfig& config);

}  // namespace biolm::decode
