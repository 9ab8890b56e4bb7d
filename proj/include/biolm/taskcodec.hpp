#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biolm/corpus.hpp"

namespace biolm::codec {

using corpus::QaAnswer;
using corpus::Triplet;

// Target sequence shapes for relation triplets:
//   svo         "head verbs tail"
//   is_of       "head is the noun of tail"
//   rel_is      "the relation between head and tail is noun"
//   rel_exists  "the relation between head and tail exists"  (binary data)
//   structured  "<head> head <tail> tail <relation> relation"
enum class TargetFormat { svo, is_of, rel_is, rel_exists, structured };

std::string format_name(TargetFormat f);
TargetFormat format_from_name(const std::string& name);  // accepts "rel-is" etc.

struct RelationForms {
  std::string verb;  // used by svo
  std::string noun;  // used by is_of and rel_is
};

// Surface forms per relation id, ordered for deterministic parsing. Binary
// datasets (entity pairs with no typed relation) set `binary`; their triplets
// all carry `binary_relation` as the relation id and rel_exists needs no
// surface forms.
struct RelationLexicon {
  std::map<std::string, RelationForms> relations;
  bool binary = false;
  std::string binary_relation = "exists";

  const RelationForms& require(const std::string& relation) const;
  // noun -> relation id, nullopt if no relation has this noun form
  std::optional<std::string> relation_for_noun(const std::string& noun) const;
};

// JSON map {relation_id: {"verb": ..., "noun": ...}}; an optional boolean
// entry under the key "binary" marks a binary-relation dataset.
RelationLexicon load_lexicon(const std::string& path);
void save_lexicon(const std::string& path, const RelationLexicon& lexicon);

inline constexpr std::string_view kNoRelationSentinel = "no relation found.";

// One clause per triplet in input order, clauses joined by "; ", closed with
// ".". Empty list encodes to the sentinel. For `structured`, delegates to
// encode_structured (whose empty encoding is the empty string).
std::string encode_triplets(const std::vector<Triplet>& triplets,
                            TargetFormat format,
                            const RelationLexicon& lexicon);

// Special-token linearization, one block per triplet joined by single spaces.
std::string encode_structured(const std::vector<Triplet>& triplets);

struct TripletDecode {
  std::vector<Triplet> triplets;  // normalized, deduplicated, extraction order
  int skipped = 0;                // clauses that matched no pattern
};

// Total over arbitrary generated text: clauses that match the format pattern
// become triplets, everything else is counted as skipped.
TripletDecode decode_triplets(const std::string& text, TargetFormat format,
                              const RelationLexicon& lexicon);

// "the answer to the question given the context is {label}."
std::string encode_qa_target(QaAnswer answer);
// Last yes/no/maybe word in the text wins; nullopt rejects (scored as wrong).
std::optional<QaAnswer> decode_qa_target(const std::string& text);

// "the type of this document is {l1; l2; ...}." in universe order; empty set
// encodes to "none". Unknown labels at encode time are an error.
std::string encode_doc_target(const std::vector<std::string>& labels,
                              const std::vector<std::string>& universe);
// Case-insensitive substring scan for each universe label; returns matches
// in universe order.
std::vector<std::string> decode_doc_target(
    const std::string& text, const std::vector<std::string>& universe);

// Triplet identity: case-fold, collapse internal whitespace, strip leading
// and trailing punctuation.
std::string normalize_surface(std::string_view s);
Triplet normalize(const Triplet& t);
std::vector<Triplet> normalized_set(const std::vector<Triplet>& triplets);

// Orders triplets by first mention in the source: position of the head's
// first occurrence, then the tail's, stable on ties.
std::vector<Triplet> sort_by_appearance(std::vector<Triplet> triplets,
                                        const std::string& source);

}  // namespace biolm::codec
