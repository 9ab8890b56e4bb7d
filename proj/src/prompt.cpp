#include "biolm/prompt.hpp"

namespace biolm::prompt {

PromptSpec PromptSpec::parse(const std::string& spec) {
  PromptSpec p;
  if (spec.rfind("hard:", 0) == 0) {
    p.kind = PromptKind::hard;
    p.hard_text = spec.substr(5);
    p.length = 0;
  } else if (spec.rfind("cont:", 0) == 0) {
    p.kind = PromptKind::continuous;
    try {
      p.length = std::stoi(spec.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("bad prompt spec: " + spec);
    }
  } else {
    throw ConfigError("prompt spec must be hard:<text> or cont:<length>, got " +
                      spec);
  }
  p.validate();
  return p;
}

std::string PromptSpec::to_string() const {
  return kind == PromptKind::hard ? "hard:" + hard_text
                                  : "cont:" + std::to_string(length);
}

void PromptSpec::validate() const {
  if (kind == PromptKind::hard && hard_text.empty()) {
    throw ConfigError("hard prompt text must be nonempty");
  }
  if (kind == PromptKind::continuous && length < 1) {
    throw ConfigError("continuous prompt length must be >= 1");
  }
}

PromptParams PromptParams::init(int length, int hidden, Rng& rng) {
  PromptParams p;
  p.embed = Tensor::zeros({length, hidden});
  for (double& v : p.embed.data) v = rng.gauss(0.0, 0.02);
  return p;
}

PromptState make_prompt_state(const PromptSpec& spec,
                              const bpe::Encoder& encoder, int hidden,
                              Rng& rng) {
  spec.validate();
  PromptState state;
  state.spec = spec;
  if (spec.kind == PromptKind::hard) {
    state.hard_ids = encoder.encode(spec.hard_text);
    if (state.hard_ids.empty()) {
      throw ConfigError("hard prompt tokenized to nothing: " + spec.hard_text);
    }
  } else {
    state.params = PromptParams::init(spec.length, hidden, rng);
  }
  return state;
}

namespace {

// Appends the prompt segment: ordinary token positions for hard prompts,
// virtual rows for continuous ones.
void append_prompt(model::SequencePlan& plan, const PromptState& prompt) {
  if (prompt.spec.kind == PromptKind::hard) {
    for (int32_t id : prompt.hard_ids) {
      plan.push_back(model::PosInput::tok(id));
    }
  } else {
    for (int32_t r = 0; r < prompt.spec.length; r++) {
      plan.push_back(model::PosInput::prompt(r));
    }
  }
}

size_t truncated_source_len(size_t source_len, size_t fixed_len,
                            int max_positions, bool* truncated) {
  const size_t budget = static_cast<size_t>(max_positions);
  if (source_len + fixed_len <= budget) return source_len;
  if (fixed_len > budget) {
    throw Error("sequence overflow: prompt and target alone need " +
                std::to_string(fixed_len) + " positions, max is " +
                std::to_string(max_positions));
  }
  *truncated = true;
  return budget - fixed_len;
}

}  // namespace

AssembledSequence assemble(const std::vector<int32_t>& source_ids,
                           const PromptState& prompt,
                           const std::vector<int32_t>& target_ids,
                           int max_positions) {
  AssembledSequence seq;
  const size_t fixed =
      static_cast<size_t>(prompt.length()) + target_ids.size();
  const size_t src_len = truncated_source_len(source_ids.size(), fixed,
                                              max_positions, &seq.truncated);
  if (seq.truncated) {
    warn("assemble: source truncated from " +
         std::to_string(source_ids.size()) + " to " + std::to_string(src_len) +
         " tokens");
  }

  // keep the rightmost src_len source tokens
  for (size_t i = source_ids.size() - src_len; i < source_ids.size(); i++) {
    seq.plan.push_back(model::PosInput::tok(source_ids[i]));
  }
  append_prompt(seq.plan, prompt);
  const size_t first_target = seq.plan.size();
  for (int32_t id : target_ids) {
    seq.plan.push_back(model::PosInput::tok(id));
  }

  const size_t n = seq.plan.size();
  seq.targets.assign(n, -1);
  seq.mask.assign(n, 0);
  for (size_t j = 0; j + 1 < n; j++) {
    if (j + 1 >= first_target) {
      seq.targets[j] = seq.plan[j + 1].token;
      seq.mask[j] = 1;
    }
  }
  return seq;
}

model::SequencePlan inference_prefix(const std::vector<int32_t>& source_ids,
                                     const PromptState& prompt,
                                     int max_positions,
                                     int reserve_new_tokens) {
  bool truncated = false;
  const size_t fixed = static_cast<size_t>(prompt.length()) +
                       static_cast<size_t>(reserve_new_tokens);
  const size_t src_len = truncated_source_len(source_ids.size(), fixed,
                                              max_positions, &truncated);
  if (truncated) {
    warn("inference_prefix: source truncated from " +
         std::to_string(source_ids.size()) + " to " + std::to_string(src_len) +
         " tokens");
  }
  model::SequencePlan plan;
  for (size_t i = source_ids.size() - src_len; i < source_ids.size(); i++) {
    plan.push_back(model::PosInput::tok(source_ids[i]));
  }
  append_prompt(plan, prompt);
  return plan;
}

}  // namespace biolm::prompt
