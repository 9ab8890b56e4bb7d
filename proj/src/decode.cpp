#include "biolm/decode.hpp"

#include <algorithm>
#include <cmath>

namespace biolm::decode {

void DecodeConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
}

namespace {

void check_budget(const model::ModelParams& params,
                  const model::SequencePlan& prefix,
                  const DecodeConfig& config) {
  if (prefix.empty()) throw Error("generate: empty prefix");
  if (static_cast<int>(prefix.size()) + config.max_new_tokens >
      params.config.max_positions) {
    throw Error("generate: prefix length " + std::to_string(prefix.size()) +
                " + max_new_tokens " + std::to_string(config.max_new_tokens) +
                " exceeds max_positions " +
                std::to_string(params.config.max_positions));
  }
}

// Log-probabilities of the next token given the plan.
std::vector<double> next_logprobs(const model::ModelParams& params,
                                  const model::SequencePlan& plan,
                                  const Tensor* prompt_embed,
                                  model::Activations& acts) {
  model::ForwardOptions opts;
  opts.prompt_embed = prompt_embed;
  model::forward(params, plan, acts, opts);
  const int V = params.config.vocab_size;
  const double* row = acts.logits.ptr() + (int64_t)(acts.T - 1) * V;
  double maxval = row[0];
  for (int v = 1; v < V; v++) maxval = std::max(maxval, row[v]);
  double lse = 0.0;
  for (int v = 0; v < V; v++) lse += std::exp(row[v] - maxval);
  const double logz = std::log(lse) + maxval;
  std::vector<double> lp(V);
  for (int v = 0; v < V; v++) lp[v] = row[v] - logz;
  return lp;
}

double normalized(double logprob_sum, int steps, double length_penalty) {
  return logprob_sum / std::pow(static_cast<double>(std::max(steps, 1)),
                                length_penalty);
}

}  // namespace

GenResult greedy_generate(const model::ModelParams& params,
                          const model::SequencePlan& prefix,
                          const Tensor* prompt_embed,
                          const DecodeConfig& config) {
  config.validate();
  check_budget(params, prefix, config);

  model::SequencePlan plan = prefix;
  model::Activations acts;
  GenResult result;
  double sum = 0.0;
  int steps = 0;
  for (int s = 0; s < config.max_new_tokens; s++) {
    const std::vector<double> lp =
        next_logprobs(params, plan, prompt_embed, acts);
    int32_t best = 0;
    for (int32_t v = 1; v < static_cast<int32_t>(lp.size()); v++) {
      if (lp[v] > lp[best]) best = v;  // ties keep the lowest id
    }
    sum += lp[best];
    steps++;
    if (best == config.end_id) break;
    result.ids.push_back(best);
    plan.push_back(model::PosInput::tok(best));
  }
  result.score = normalized(sum, steps, config.length_penalty);
  return result;
}

GenResult beam_generate(const model::ModelParams& params,
                        const model::SequencePlan& prefix,
                        const Tensor* prompt_embed,
                        const DecodeConfig& config) {
  config.validate();
  check_budget(params, prefix, config);

  struct Hypothesis {
    std::vector<int32_t> ids;  // generated, end token excluded
    double sum = 0.0;
    int steps = 0;
  };
  struct Candidate {
    double sum;
    size_t parent;
    int32_t token;
  };

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  model::Activations acts;

  for (int s = 0; s < config.max_new_tokens; s++) {
    if (live.empty() ||
        finished.size() >= static_cast<size_t>(config.beam_size)) {
      break;
    }
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * params.config.vocab_size);
    for (size_t b = 0; b < live.size(); b++) {
      model::SequencePlan plan = prefix;
      for (int32_t id : live[b].ids) plan.push_back(model::PosInput::tok(id));
      const std::vector<double> lp =
          next_logprobs(params, plan, prompt_embed, acts);
      for (int32_t v = 0; v < static_cast<int32_t>(lp.size()); v++) {
        candidates.push_back({live[b].sum + lp[v], b, v});
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                if (a.sum != b.sum) return a.sum > b.sum;
                if (a.parent != b.parent) return a.parent < b.parent;
                return a.token < b.token;
              });

    std::vector<Hypothesis> next_live;
    for (size_t rank = 0; rank < candidates.size(); rank++) {
      const Candidate& c = candidates[rank];
      if (c.token == config.end_id) {
        // an end token only finalizes from inside the top beam_size
        if (rank < static_cast<size_t>(config.beam_size)) {
          Hypothesis h = live[c.parent];
          h.sum = c.sum;
          h.steps++;
          finished.push_back(std::move(h));
        }
        continue;
      }
      if (next_live.size() < static_cast<size_t>(config.beam_size)) {
        Hypothesis h = live[c.parent];
        h.ids.push_back(c.token);
        h.sum = c.sum;
        h.steps++;
        next_live.push_back(std::move(h));
      }
      if (next_live.size() >= static_cast<size_t>(config.beam_size) &&
          rank + 1 >= static_cast<size_t>(config.beam_size)) {
        break;
      }
    }
    live = std::move(next_live);
  }

  // collect-then-compare: finished hypotheses and any live ones that ran out
  // of budget compete here, by normalized score
  const Hypothesis* best = nullptr;
  double best_score = 0.0;
  auto consider = [&](const Hypothesis& h) {
    const double score = normalized(h.sum, h.steps, config.length_penalty);
    if (!best || score > best_score) {
      best = &h;
      best_score = score;
    }
  };
  for (const Hypothesis& h : finished) consider(h);
  for (const Hypothesis& h : live) consider(h);
  if (!best) throw Error("beam_generate: no hypotheses produced");

  return GenResult{best->ids, best_score};
}

GenResult generate(const model::ModelParams& params,
                   const model::SequencePlan& prefix,
                   const Tensor* prompt_embed, const DecodeConfig& config) {
  return config.strategy == DecodeConfig::Strategy::greedy
             ? greedy_generate(params, prefix, prompt_embed, config)
             : beam_generate(params, prefix, prompt_embed, config);
}

}  // namespace biolm::decode
