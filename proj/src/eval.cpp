#include "biolm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace biolm::eval {

namespace {

template <class Item>
Prf micro_prf_impl(
    const std::vector<std::pair<std::string, std::vector<Item>>>& pred,
    const std::vector<std::pair<std::string, std::vector<Item>>>& gold,
    std::vector<DocCounts>* per_doc) {
  if (pred.size() != gold.size()) {
    throw Error("micro_prf: pred and gold have different document counts");
  }
  Prf out;
  for (size_t i = 0; i < pred.size(); i++) {
    if (pred[i].first != gold[i].first) {
      throw Error("micro_prf: misaligned document ids: " + pred[i].first +
                  " vs " + gold[i].first);
    }
    DocCounts dc;
    dc.id = pred[i].first;
    for (const Item& p : pred[i].second) {
      const auto& g = gold[i].second;
      if (std::find(g.begin(), g.end(), p) != g.end()) {
        dc.tp++;
      } else {
        dc.fp++;
      }
    }
    for (const Item& g : gold[i].second) {
      const auto& p = pred[i].second;
      if (std::find(p.begin(), p.end(), g) == p.end()) dc.fn++;
    }
    out.tp += dc.tp;
    out.fp += dc.fp;
    out.fn += dc.fn;
    if (per_doc) per_doc->push_back(std::move(dc));
  }
  out.precision =
      out.tp + out.fp > 0
          ? static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp)
          : 0.0;
  out.recall =
      out.tp + out.fn > 0
          ? static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fn)
          : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall /
                     (out.precision + out.recall)
               : 0.0;
  return out;
}

// dedup to set semantics
template <class Item>
std::vector<Item> unique_items(std::vector<Item> items) {
  std::vector<Item> out;
  for (Item& it : items) {
    if (std::find(out.begin(), out.end(), it) == out.end()) {
      out.push_back(std::move(it));
    }
  }
  return out;
}

}  // namespace

Prf micro_prf(
    const std::vector<std::pair<std::string, std::vector<corpus::Triplet>>>&
        pred,
    const std::vector<std::pair<std::string, std::vector<corpus::Triplet>>>&
        gold,
    std::vector<DocCounts>* per_doc) {
  return micro_prf_impl(pred, gold, per_doc);
}

Prf micro_prf_labels(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& pred,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& gold,
    std::vector<DocCounts>* per_doc) {
  return micro_prf_impl(pred, gold, per_doc);
}

double qa_accuracy(
    const std::vector<std::pair<std::string, std::optional<corpus::QaAnswer>>>&
        pred,
    const std::vector<std::pair<std::string, corpus::QaAnswer>>& gold) {
  if (pred.size() != gold.size()) {
    throw Error("qa_accuracy: pred and gold have different counts");
  }
  if (pred.empty()) return 0.0;
  int64_t correct = 0;
  for (size_t i = 0; i < pred.size(); i++) {
    if (pred[i].first != gold[i].first) {
      throw Error("qa_accuracy: misaligned ids: " + pred[i].first + " vs " +
                  gold[i].first);
    }
    if (pred[i].second && *pred[i].second == gold[i].second) correct++;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = corpus::task_name(task);
  j["num_docs"] = num_docs;
  if (task == corpus::Task::question_answering) {
    j["accuracy"] = accuracy;
  } else {
    j["precision"] = prf.precision;
    j["recall"] = prf.recall;
    j["f1"] = prf.f1;
    j["tp"] = prf.tp;
    j["fp"] = prf.fp;
    j["fn"] = prf.fn;
  }
  j["skipped_clauses"] = skipped_clauses;
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  for (const DocCounts& d : per_doc) {
    nlohmann::ordered_json jd;
    jd["id"] = d.id;
    jd["tp"] = d.tp;
    jd["fp"] = d.fp;
    jd["fn"] = d.fn;
    docs.push_back(std::move(jd));
  }
  j["per_doc"] = std::move(docs);
  return j;
}

std::string EvalReport::metric_line() const {
  std::ostringstream os;
  if (task == corpus::Task::question_answering) {
    os << "accuracy=" << accuracy;
  } else {
    os << "P=" << prf.precision << " R=" << prf.recall << " F1=" << prf.f1;
  }
  return os.str();
}

EvalReport evaluate_pipeline(const model::ModelParams& params,
                             const prompt::PromptState& prompt_state,
                             const bpe::Encoder& encoder,
                             const std::vector<corpus::TaskExample>& examples,
                             codec::TargetFormat format,
                             const codec::RelationLexicon& lexicon,
                             const std::vector<std::string>& label_universe,
                             const decode::DecodeConfig& decode_cfg) {
  EvalReport report;
  report.num_docs = static_cast<int64_t>(examples.size());
  if (examples.empty()) return report;
  report.task = examples.front().task;

  const Tensor* prompt_embed =
      prompt_state.is_continuous() ? &prompt_state.params.embed : nullptr;

  // generation is independent per example
  const int n = static_cast<int>(examples.size());
  std::vector<std::string> generated(examples.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; i++) {
    const model::SequencePlan prefix =
        prompt::inference_prefix(encoder.encode(examples[i].source),
                                 prompt_state, params.config.max_positions,
                                 decode_cfg.max_new_tokens);
    const decode::GenResult gen =
        decode::generate(params, prefix, prompt_embed, decode_cfg);
    generated[i] = encoder.decode(gen.ids);
  }

  switch (report.task) {
    case corpus::Task::relation_extraction: {
      std::vector<std::pair<std::string, std::vector<corpus::Triplet>>> pred;
      std::vector<std::pair<std::string, std::vector<corpus::Triplet>>> gold;
      for (size_t i = 0; i < examples.size(); i++) {
        const codec::TripletDecode dec =
            codec::decode_triplets(generated[i], format, lexicon);
        report.skipped_clauses += dec.skipped;
        pred.emplace_back(examples[i].id, dec.triplets);
        gold.emplace_back(
            examples[i].id,
            codec::normalized_set(
                std::get<std::vector<corpus::Triplet>>(examples[i].label)));
      }
      report.prf = micro_prf(pred, gold, &report.per_doc);
      break;
    }
    case corpus::Task::question_answering: {
      std::vector<std::pair<std::string, std::optional<corpus::QaAnswer>>>
          pred;
      std::vector<std::pair<std::string, corpus::QaAnswer>> gold;
      for (size_t i = 0; i < examples.size(); i++) {
        pred.emplace_back(examples[i].id,
                          codec::decode_qa_target(generated[i]));
        gold.emplace_back(examples[i].id,
                          std::get<corpus::QaAnswer>(examples[i].label));
      }
      report.accuracy = qa_accuracy(pred, gold);
      break;
    }
    case corpus::Task::doc_classification: {
      std::vector<std::pair<std::string, std::vector<std::string>>> pred;
      std::vector<std::pair<std::string, std::vector<std::string>>> gold;
      for (size_t i = 0; i < examples.size(); i++) {
        pred.emplace_back(
            examples[i].id,
            codec::decode_doc_target(generated[i], label_universe));
        gold.emplace_back(
            examples[i].id,
            unique_items(std::get<std::vector<std::string>>(examples[i].label)));
      }
      report.prf = micro_prf_labels(pred, gold, &report.per_doc);
      break;
    }
    case corpus::Task::generation:
      throw ConfigError("generation task has no evaluation metric");
  }
  return report;
}

}  // namespace biolm::eval
