#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolm/bpe.hpp"
#include "biolm/corpus.hpp"
#include "biolm/decode.hpp"
#include "biolm/prompt.hpp"
#include "biolm/taskcodec.hpp"

namespace biolm::eval {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
};

struct DocCounts {
  std::string id;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
};

// Micro-averaged P/R/F1 over per-document sets: TP/FP/FN are summed across
// documents before the ratios. Zero denominators yield zero. pred and gold
// must cover the same ids in the same order.
Prf micro_prf(
    const std::vector<std::pair<std::string, std::vector<corpus::Triplet>>>&
        pred,
    const std::vector<std::pair<std::string, std::vector<corpus::Triplet>>>&
        gold,
    std::vector<DocCounts>* per_doc = nullptr);

Prf micro_prf_labels(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& pred,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& gold,
    std::vector<DocCounts>* per_doc = nullptr);

// Exact-match accuracy; a rejected (unparseable) prediction counts as wrong.
double qa_accuracy(
    const std::vector<std::pair<std::string, std::optional<corpus::QaAnswer>>>&
        pred,
    const std::vector<std::pair<std::string, corpus::QaAnswer>>& gold);

struct EvalReport {
  corpus::Task task = corpus::Task::relation_extraction;
  Prf prf;                      // relation extraction / doc classification
  double accuracy = 0.0;        // question answering
  int64_t num_docs = 0;
  int64_t skipped_clauses = 0;  // unparseable clause count from decoding
  std::vector<DocCounts> per_doc;

  nlohmann::ordered_json to_json() const;
  std::string metric_line() const;  // "P=... R=... F1=..." or "accuracy=..."
};

// Generates for every example with the prompt prefix, parses the text back
// through the codec, and scores against gold. Deterministic in deterministic
// mode; generation runs parallel across examples.
EvalReport evaluate_pipeline(const model::ModelParams& params,
                             const prompt::PromptState& prompt_state,
                             const bpe::Encoder& encoder,
                             const std::vector<corpus::TaskExample>& examples,
                             codec::TargetFormat format,
                             const codec::RelationLexicon& lexicon,
                             const std::vector<std::string>& label_universe,
                             const decode::DecodeConfig& decode_cfg);

}  // namespace biolm::eval
