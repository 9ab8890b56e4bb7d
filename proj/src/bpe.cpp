#include "biolm/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace biolm::bpe {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::vector<std::string> split_words(const std::string& canonical) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : canonical) {
    if (c == ' ') {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> word_symbols(const std::string& word,
                                      const std::string& marker) {
  std::vector<std::string> syms;
  syms.reserve(word.size());
  for (char c : word) syms.emplace_back(1, c);
  syms.back() += marker;
  return syms;
}

// Merges every left-to-right non-overlapping occurrence of (left,right).
void merge_in_place(std::vector<std::string>& syms, const std::string& left,
                    const std::string& right) {
  size_t w = 0;
  for (size_t r = 0; r < syms.size();) {
    if (r + 1 < syms.size() && syms[r] == left && syms[r + 1] == right) {
      syms[w++] = left + right;
      r += 2;
    } else {
      if (w != r) syms[w] = std::move(syms[r]);
      w++;
      r++;
    }
  }
  syms.resize(w);
}

}  // namespace

std::string canonicalize(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // also trims leading space
  for (char c : text) {
    if (is_space(static_cast<unsigned char>(c))) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

int32_t Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? unk_id : it->second;
}

void Vocabulary::add(const std::string& token) {
  if (token_to_id.contains(token)) return;
  token_to_id.emplace(token, size());
  id_to_token.push_back(token);
}

Vocabulary Vocabulary::with_specials() {
  Vocabulary v;
  v.add(kPad);
  v.add(kBos);
  v.add(kEos);
  v.add(kUnk);
  return v;
}

MergeTable learn_bpe(const std::vector<std::string>& corpus, int num_merges) {
  if (corpus.empty()) throw Error("learn_bpe: empty corpus");
  if (num_merges < 0) throw Error("learn_bpe: num_merges must be >= 0");

  MergeTable table;

  // distinct words with frequencies
  std::map<std::string, int64_t> word_freq;
  for (const std::string& line : corpus) {
    for (std::string& w : split_words(canonicalize(line))) {
      word_freq[std::move(w)]++;
    }
  }
  if (word_freq.empty()) throw Error("learn_bpe: corpus contains no words");

  struct Entry {
    std::vector<std::string> syms;
    int64_t freq;
  };
  std::vector<Entry> words;
  words.reserve(word_freq.size());
  for (const auto& [w, f] : word_freq) {
    words.push_back({word_symbols(w, table.end_of_word_marker), f});
  }

  using Pair = std::pair<std::string, std::string>;
  for (int step = 0; step < num_merges; step++) {
    // count every adjacent position, overlaps included
    std::map<Pair, int64_t> counts;
    for (const Entry& e : words) {
      for (size_t i = 0; i + 1 < e.syms.size(); i++) {
        counts[{e.syms[i], e.syms[i + 1]}] += e.freq;
      }
    }
    const Pair* best = nullptr;
    int64_t best_count = 0;
    for (const auto& [pair, cnt] : counts) {
      if (cnt > best_count) {  // ties keep the lexicographically first pair
        best = &pair;
        best_count = cnt;
      }
    }
    // a pair seen once cannot compress anything; stop early
    if (!best || best_count < 2) break;

    table.merges.push_back(*best);
    for (Entry& e : words) {
      merge_in_place(e.syms, best->first, best->second);
    }
  }
  return table;
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus,
                            const MergeTable& table) {
  Vocabulary vocab = Vocabulary::with_specials();
  std::set<unsigned char> alphabet;
  for (const std::string& line : corpus) {
    for (char c : canonicalize(line)) {
      if (c != ' ') alphabet.insert(static_cast<unsigned char>(c));
    }
  }
  for (unsigned char c : alphabet) {
    vocab.add(std::string(1, static_cast<char>(c)));
    vocab.add(std::string(1, static_cast<char>(c)) + table.end_of_word_marker);
  }
  for (const auto& [left, right] : table.merges) {
    vocab.add(left + right);
  }
  return vocab;
}

int merges_for_target_vocab(int alphabet_size, int target_size) {
  return std::max(0, target_size - 4 - 2 * alphabet_size);
}

std::vector<std::string> apply_merges(const std::vector<std::string>& symbols,
                                      const MergeTable& table) {
  std::map<std::pair<std::string, std::string>, int> rank;
  for (size_t i = 0; i < table.merges.size(); i++) {
    rank.emplace(table.merges[i], static_cast<int>(i));
  }
  std::vector<std::string> syms = symbols;
  while (syms.size() > 1) {
    int best_rank = -1;
    for (size_t i = 0; i + 1 < syms.size(); i++) {
      auto it = rank.find({syms[i], syms[i + 1]});
      if (it != rank.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
      }
    }
    if (best_rank < 0) break;
    merge_in_place(syms, table.merges[best_rank].first,
                   table.merges[best_rank].second);
  }
  return syms;
}

Encoder::Encoder(MergeTable table, Vocabulary vocab)
    : table_(std::move(table)), vocab_(std::move(vocab)) {
  for (size_t i = 0; i < table_.merges.size(); i++) {
    rank_.emplace(table_.merges[i].first + ' ' + table_.merges[i].second,
                  static_cast<int>(i));
  }
}

std::vector<std::string> Encoder::segment_word(const std::string& word) const {
  std::vector<std::string> syms = word_symbols(word, table_.end_of_word_marker);
  while (syms.size() > 1) {
    int best_rank = -1;
    size_t n = syms.size();
    for (size_t i = 0; i + 1 < n; i++) {
      auto it = rank_.find(syms[i] + ' ' + syms[i + 1]);
      if (it != rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
      }
    }
    if (best_rank < 0) break;
    merge_in_place(syms, table_.merges[best_rank].first,
                   table_.merges[best_rank].second);
  }
  return syms;
}

std::vector<int32_t> Encoder::encode(const std::string& text) const {
  std::vector<int32_t> out;
  int64_t unknown = 0;
  for (const std::string& word : split_words(canonicalize(text))) {
    {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      auto it = cache_.find(word);
      if (it != cache_.end()) {
        for (int32_t id : it->second) {
          out.push_back(id);
          if (id == vocab_.unk_id) unknown++;
        }
        continue;
      }
    }
    std::vector<int32_t> ids;
    for (const std::string& sym : segment_word(word)) {
      const int32_t id = vocab_.lookup(sym);
      ids.push_back(id);
      if (id == vocab_.unk_id) unknown++;
    }
    out.insert(out.end(), ids.begin(), ids.end());
    std::lock_guard<std::mutex> lock(cache_mutex_);
    cache_.emplace(word, std::move(ids));
  }
  if (unknown > 0) {
    warn("encode: " + std::to_string(unknown) +
         " out-of-vocabulary symbol(s) mapped to " + Vocabulary::kUnk);
  }
  return out;
}

std::string Encoder::decode(const std::vector<int32_t>& ids) const {
  std::string joined;
  for (int32_t id : ids) {
    if (id < 0 || id >= vocab_.size()) {
      throw Error("decode: id " + std::to_string(id) + " not in vocabulary");
    }
    if (id == vocab_.pad_id || id == vocab_.bos_id || id == vocab_.eos_id) {
      continue;  // structural tokens carry no text
    }
    joined += vocab_.id_to_token[static_cast<size_t>(id)];
  }
  // marker -> space
  std::string out;
  out.reserve(joined.size());
  const std::string& m = table_.end_of_word_marker;
  size_t i = 0;
  while (i < joined.size()) {
    if (joined.compare(i, m.size(), m) == 0) {
      out.push_back(' ');
      i += m.size();
    } else {
      out.push_back(joined[i]);
      i++;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

void save_merges(const std::string& path, const MergeTable& table) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  for (const auto& [left, right] : table.merges) {
    os << left << ' ' << right << '\n';
  }
  if (!os) throw Error("write failed: " + path);
}

MergeTable load_merges(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open: " + path);
  MergeTable table;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    const size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) {
      throw ParseError(path, lineno, "expected 'left right' merge pair");
    }
    table.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return table;
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  for (int32_t i = 0; i < vocab.size(); i++) {
    os << vocab.id_to_token[static_cast<size_t>(i)] << '\t' << i << '\n';
  }
  if (!os) throw Error("write failed: " + path);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open: " + path);
  Vocabulary vocab;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    const size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw ParseError(path, lineno, "expected 'token<TAB>id'");
    }
    const std::string token = line.substr(0, tab);
    const int32_t id = static_cast<int32_t>(std::stol(line.substr(tab + 1)));
    if (id != vocab.size()) {
      throw ParseError(path, lineno, "ids must be dense and in order");
    }
    vocab.add(token);
  }
  auto require = [&](const char* tok) {
    auto it = vocab.token_to_id.find(tok);
    if (it == vocab.token_to_id.end()) {
      throw Error(path + ": vocabulary is missing special token " +
                  std::string(tok));
    }
    return it->second;
  };
  vocab.pad_id = require(Vocabulary::kPad);
  vocab.bos_id = require(Vocabulary::kBos);
  vocab.eos_id = require(Vocabulary::kEos);
  vocab.unk_id = require(Vocabulary::kUnk);
  return vocab;
}

}  // namespace biolm::bpe
