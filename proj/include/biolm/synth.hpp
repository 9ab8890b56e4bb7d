#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biolm/corpus.hpp"
#include "biolm/taskcodec.hpp"

namespace biolm::synth {

// Deterministic generator settings. Documents are built from fixed sentence
// templates over a small entity inventory, so a tiny model can learn the
// tasks and an inverse extractor can recover every gold label from the text.
struct SynthSpec {
  uint64_t seed = 1;
  int num_docs = 1000;   // task examples; split 8/1/1
  int num_drugs = 30;
  int num_targets = 30;
  int corpus_docs = 2000;  // pretraining documents
  bool binary = false;     // untyped entity-pair relations (rel-exists style)
};

struct ReDataset {
  corpus::DatasetSplit split;
  codec::RelationLexicon lexicon;
};

struct DocDataset {
  corpus::DatasetSplit split;
  std::vector<std::string> universe;
};

// Typed relations with verb/noun surface forms (or the single untyped
// relation when spec.binary). Every gold triplet's head and tail occur
// verbatim in its source, in gold order; every 10th document carries zero
// triplets.
ReDataset make_re_dataset(const SynthSpec& spec);

// Balanced yes/no/maybe labels; source assembled as question/context/answer.
corpus::DatasetSplit make_qa_dataset(const SynthSpec& spec);

// Ten-class label universe, one or two labels per document.
DocDataset make_doc_dataset(const SynthSpec& spec);

// Pretraining documents over the same entity and template inventory.
std::vector<corpus::Document> make_corpus(const SynthSpec& spec);

// Inverse of the relation templates: recovers the gold triplets from a
// generated source text. Bounds any model score from above (F1 = 1).
std::vector<corpus::Triplet> oracle_extract(
    const std::string& source, const codec::RelationLexicon& lexicon);

// The fixed relation inventory used by typed synthetic data.
codec::RelationLexicon re_lexicon();

// The fixed 10-label document-classification universe.
std::vector<std::string> doc_universe();

}  // namespace biolm::synth
