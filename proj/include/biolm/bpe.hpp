#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "biolm/common.hpp"

namespace biolm::bpe {

// Ordered merge rules, highest-frequency first. Symbols are byte strings;
// the end-of-word marker is appended to each word's final symbol, so base
// symbols are single bytes or a single byte followed by the marker.
struct MergeTable {
  std::vector<std::pair<std::string, std::string>> merges;
  std::string end_of_word_marker = "</w>";
};

struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int32_t> token_to_id;
  int32_t pad_id = 0;
  int32_t bos_id = 1;
  int32_t eos_id = 2;
  int32_t unk_id = 3;

  static constexpr const char* kPad = "<pad>";
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";
  static constexpr const char* kUnk = "<unk>";

  int32_t size() const { return static_cast<int32_t>(id_to_token.size()); }
  int32_t lookup(const std::string& token) const;  // unk_id if absent
  void add(const std::string& token);
  static Vocabulary with_specials();
};

// Learns at most num_merges merges: at every step the most frequent adjacent
// symbol pair wins; equal frequencies break to the lexicographically smaller
// pair. Words are whitespace-pretokenized; text is canonicalized (whitespace
// runs collapse to single spaces) before counting, the same way encode does.
MergeTable learn_bpe(const std::vector<std::string>& corpus, int num_merges);

// Specials, then each corpus byte c as "c" and "c</w>" (sorted), then merge
// outputs in learning order (first occurrence wins on duplicates).
Vocabulary build_vocabulary(const std::vector<std::string>& corpus,
                            const MergeTable& table);

// How many merges to request so the final vocabulary lands on target_size,
// assuming no duplicate merge outputs (4 specials + 2*alphabet + merges).
int merges_for_target_vocab(int alphabet_size, int target_size);

// Applies merges to one word (no marker handling; the word's last symbol is
// expected to carry the marker already). Exposed for tests.
std::vector<std::string> apply_merges(const std::vector<std::string>& symbols,
                                      const MergeTable& table);

class Encoder {
 public:
  Encoder(MergeTable table, Vocabulary vocab);

  // Whitespace-canonicalized encoding; unknown symbols map to unk with a
  // warning. decode(encode(t)) == t for canonical text over the training
  // alphabet.
  std::vector<int32_t> encode(const std::string& text) const;
  std::string decode(const std::vector<int32_t>& ids) const;

  const MergeTable& table() const { return table_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  std::vector<std::string> segment_word(const std::string& word) const;

  MergeTable table_;
  Vocabulary vocab_;
  std::unordered_map<std::string, int> rank_;  // "a b" -> merge index
  mutable std::unordered_map<std::string, std::vector<int32_t>> cache_;
  mutable std::mutex cache_mutex_;
};

// Canonical form used throughout: whitespace runs -> single space, ends
// trimmed.
std::string canonicalize(const std::string& text);

// Merge table: one "left right" pair per line, learning order.
void save_merges(const std::string& path, const MergeTable& table);
MergeTable load_merges(const std::string& path);

// Vocabulary: "token<TAB>id" lines.
void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

}  // namespace biolm::bpe
