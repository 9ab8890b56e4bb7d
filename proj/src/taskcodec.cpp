#include "biolm/taskcodec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include <nlohmann/json.hpp>

namespace biolm::codec {

using json = nlohmann::ordered_json;

std::string format_name(TargetFormat f) {
  switch (f) {
    case TargetFormat::svo: return "svo";
    case TargetFormat::is_of: return "is-of";
    case TargetFormat::rel_is: return "rel-is";
    case TargetFormat::rel_exists: return "rel-exists";
    case TargetFormat::structured: return "structured";
  }
  throw Error("unknown target format enum value");
}

TargetFormat format_from_name(const std::string& name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '_', '-');
  if (n == "svo") return TargetFormat::svo;
  if (n == "is-of") return TargetFormat::is_of;
  if (n == "rel-is") return TargetFormat::rel_is;
  if (n == "rel-exists") return TargetFormat::rel_exists;
  if (n == "structured") return TargetFormat::structured;
  throw ConfigError("unknown target format: " + name);
}

const RelationForms& RelationLexicon::require(
    const std::string& relation) const {
  auto it = relations.find(relation);
  if (it == relations.end()) {
    throw Error("relation lexicon has no entry for relation '" + relation +
                "'");
  }
  return it->second;
}

std::optional<std::string> RelationLexicon::relation_for_noun(
    const std::string& noun) const {
  for (const auto& [id, forms] : relations) {
    if (forms.noun == noun) return id;
  }
  return std::nullopt;
}

RelationLexicon load_lexicon(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(path + ": bad lexicon json: " + e.what());
  }
  RelationLexicon lex;
  for (const auto& [key, value] : j.items()) {
    if (key == "binary") {
      lex.binary = value.get<bool>();
      continue;
    }
    RelationForms forms;
    if (value.contains("verb")) forms.verb = value["verb"].get<std::string>();
    if (value.contains("noun")) forms.noun = value["noun"].get<std::string>();
    lex.relations.emplace(key, std::move(forms));
  }
  return lex;
}

void save_lexicon(const std::string& path, const RelationLexicon& lexicon) {
  json j;
  if (lexicon.binary) j["binary"] = true;
  for (const auto& [id, forms] : lexicon.relations) {
    json f;
    f["verb"] = forms.verb;
    f["noun"] = forms.noun;
    j[id] = std::move(f);
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

namespace {

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) b++;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) e--;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string clause_for(const Triplet& t, TargetFormat format,
                       const RelationLexicon& lexicon) {
  switch (format) {
    case TargetFormat::svo: {
      const RelationForms& f = lexicon.require(t.relation);
      if (f.verb.empty()) {
        throw Error("relation '" + t.relation + "' has no verb form");
      }
      return t.head + " " + f.verb + " " + t.tail;
    }
    case TargetFormat::is_of: {
      const RelationForms& f = lexicon.require(t.relation);
      if (f.noun.empty()) {
        throw Error("relation '" + t.relation + "' has no noun form");
      }
      return t.head + " is the " + f.noun + " of " + t.tail;
    }
    case TargetFormat::rel_is: {
      const RelationForms& f = lexicon.require(t.relation);
      if (f.noun.empty()) {
        throw Error("relation '" + t.relation + "' has no noun form");
      }
      return "the relation between " + t.head + " and " + t.tail + " is " +
             f.noun;
    }
    case TargetFormat::rel_exists:
      return "the relation between " + t.head + " and " + t.tail + " exists";
    case TargetFormat::structured:
      throw Error("structured format has no clause form");
  }
  throw Error("unknown target format enum value");
}

// Splits "a; b; c." into trimmed clauses with the closing period removed.
std::vector<std::string> split_clauses(const std::string& text) {
  std::vector<std::string> clauses;
  std::string cur;
  for (char c : text) {
    if (c == ';') {
      clauses.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  clauses.push_back(cur);
  for (std::string& cl : clauses) {
    cl = trim(cl);
    while (!cl.empty() && cl.back() == '.') cl.pop_back();
    cl = trim(cl);
  }
  return clauses;
}

struct SeparatorHit {
  size_t pos = std::string::npos;
  size_t len = 0;
  std::string relation;
};

// Leftmost occurrence wins; on a tie the longer separator does.
void consider(SeparatorHit& best, const std::string& clause,
              const std::string& sep, const std::string& relation) {
  const size_t pos = clause.find(sep);
  if (pos == std::string::npos) return;
  if (pos < best.pos || (pos == best.pos && sep.size() > best.len)) {
    best = {pos, sep.size(), relation};
  }
}

std::optional<Triplet> parse_clause(const std::string& clause,
                                    TargetFormat format,
                                    const RelationLexicon& lexicon) {
  switch (format) {
    case TargetFormat::svo: {
      SeparatorHit best;
      for (const auto& [id, forms] : lexicon.relations) {
        if (forms.verb.empty()) continue;
        consider(best, clause, " " + forms.verb + " ", id);
      }
      if (best.pos == std::string::npos) return std::nullopt;
      return Triplet{clause.substr(0, best.pos),
                     clause.substr(best.pos + best.len), best.relation};
    }
    case TargetFormat::is_of: {
      SeparatorHit best;
      for (const auto& [id, forms] : lexicon.relations) {
        if (forms.noun.empty()) continue;
        consider(best, clause, " is the " + forms.noun + " of ", id);
      }
      if (best.pos == std::string::npos) return std::nullopt;
      return Triplet{clause.substr(0, best.pos),
                     clause.substr(best.pos + best.len), best.relation};
    }
    case TargetFormat::rel_is: {
      constexpr std::string_view prefix = "the relation between ";
      if (clause.rfind(prefix, 0) != 0) return std::nullopt;
      const std::string rest = clause.substr(prefix.size());
      // greedy on the final " is " separator
      const size_t is_pos = rest.rfind(" is ");
      if (is_pos == std::string::npos) return std::nullopt;
      const std::string between = rest.substr(0, is_pos);
      std::string noun = trim(rest.substr(is_pos + 4));
      const size_t and_pos = between.find(" and ");
      if (and_pos == std::string::npos) return std::nullopt;
      std::string relation = noun;
      if (auto id = lexicon.relation_for_noun(noun)) relation = *id;
      return Triplet{between.substr(0, and_pos), between.substr(and_pos + 5),
                     relation};
    }
    case TargetFormat::rel_exists: {
      constexpr std::string_view prefix = "the relation between ";
      constexpr std::string_view suffix = " exists";
      if (clause.rfind(prefix, 0) != 0) return std::nullopt;
      if (clause.size() < prefix.size() + suffix.size()) return std::nullopt;
      if (clause.compare(clause.size() - suffix.size(), suffix.size(),
                         suffix) != 0) {
        return std::nullopt;
      }
      const std::string between = clause.substr(
          prefix.size(), clause.size() - prefix.size() - suffix.size());
      const size_t and_pos = between.find(" and ");
      if (and_pos == std::string::npos) return std::nullopt;
      return Triplet{between.substr(0, and_pos), between.substr(and_pos + 5),
                     lexicon.binary_relation};
    }
    case TargetFormat::structured:
      break;
  }
  return std::nullopt;
}

void add_unique(std::vector<Triplet>& out, Triplet t) {
  if (std::find(out.begin(), out.end(), t) == out.end()) {
    out.push_back(std::move(t));
  }
}

TripletDecode decode_structured(const std::string& text) {
  TripletDecode result;
  static const std::regex block_re(
      R"(^\s*(.*\S)\s*<tail>\s*(.*\S)\s*<relation>\s*(.*\S)\s*$)");
  constexpr std::string_view marker = "<head>";

  const size_t first = text.find(marker);
  if (first == std::string::npos) {
    if (!trim(text).empty()) result.skipped++;
    return result;
  }
  if (!trim(text.substr(0, first)).empty()) result.skipped++;

  size_t pos = first;
  while (pos != std::string::npos) {
    const size_t next = text.find(marker, pos + marker.size());
    const size_t begin = pos + marker.size();
    const std::string block = text.substr(
        begin, next == std::string::npos ? std::string::npos : next - begin);
    std::smatch m;
    if (std::regex_match(block, m, block_re)) {
      Triplet t = normalize(Triplet{m[1].str(), m[2].str(), m[3].str()});
      if (!t.head.empty() && !t.tail.empty()) {
        add_unique(result.triplets, std::move(t));
      } else {
        result.skipped++;
      }
    } else {
      result.skipped++;
    }
    pos = next;
  }
  return result;
}

}  // namespace

std::string encode_triplets(const std::vector<Triplet>& triplets,
                            TargetFormat format,
                            const RelationLexicon& lexicon) {
  if (format == TargetFormat::structured) return encode_structured(triplets);
  if (format == TargetFormat::rel_exists && !lexicon.binary) {
    throw ConfigError(
        "rel-exists target format is only valid for binary-relation datasets");
  }
  if (triplets.empty()) return std::string(kNoRelationSentinel);
  std::string out;
  for (size_t i = 0; i < triplets.size(); i++) {
    if (i > 0) out += "; ";
    out += clause_for(triplets[i], format, lexicon);
  }
  out += ".";
  return out;
}

std::string encode_structured(const std::vector<Triplet>& triplets) {
  std::string out;
  for (size_t i = 0; i < triplets.size(); i++) {
    if (i > 0) out += " ";
    out += "<head> " + triplets[i].head + " <tail> " + triplets[i].tail +
           " <relation> " + triplets[i].relation;
  }
  return out;
}

TripletDecode decode_triplets(const std::string& text, TargetFormat format,
                              const RelationLexicon& lexicon) {
  if (format == TargetFormat::structured) return decode_structured(text);

  TripletDecode result;
  if (lower(trim(text)) == kNoRelationSentinel) return result;

  for (const std::string& clause : split_clauses(text)) {
    if (clause.empty()) continue;
    auto parsed = parse_clause(clause, format, lexicon);
    if (!parsed) {
      result.skipped++;
      continue;
    }
    Triplet t = normalize(*parsed);
    if (t.head.empty() || t.tail.empty()) {
      result.skipped++;
      continue;
    }
    add_unique(result.triplets, std::move(t));
  }
  return result;
}

std::string encode_qa_target(QaAnswer answer) {
  return "the answer to the question given the context is " +
         corpus::qa_answer_name(answer) + ".";
}

std::optional<QaAnswer> decode_qa_target(const std::string& text) {
  std::optional<QaAnswer> found;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (auto a = corpus::qa_answer_from_name(word)) found = a;
    word.clear();
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return found;
}

std::string encode_doc_target(const std::vector<std::string>& labels,
                              const std::vector<std::string>& universe) {
  for (const std::string& l : labels) {
    if (std::find(universe.begin(), universe.end(), l) == universe.end()) {
      throw Error("label '" + l + "' is not in the label universe");
    }
  }
  std::string body;
  for (const std::string& u : universe) {
    if (std::find(labels.begin(), labels.end(), u) == labels.end()) continue;
    if (!body.empty()) body += "; ";
    body += u;
  }
  if (body.empty()) body = "none";
  return "the type of this document is " + body + ".";
}

std::vector<std::string> decode_doc_target(
    const std::string& text, const std::vector<std::string>& universe) {
  const std::string haystack = lower(text);
  std::vector<std::string> found;
  for (const std::string& u : universe) {
    if (haystack.find(lower(u)) != std::string::npos) found.push_back(u);
  }
  return found;
}

std::string normalize_surface(std::string_view s) {
  std::string folded;
  folded.reserve(s.size());
  bool in_space = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) folded.push_back(' ');
      in_space = true;
    } else {
      folded.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      in_space = false;
    }
  }
  auto strippable = [](char c) {
    const unsigned char u = static_cast<unsigned char>(c);
    return std::ispunct(u) || std::isspace(u);
  };
  size_t b = 0;
  size_t e = folded.size();
  while (b < e && strippable(folded[b])) b++;
  while (e > b && strippable(folded[e - 1])) e--;
  return folded.substr(b, e - b);
}

Triplet normalize(const Triplet& t) {
  return {normalize_surface(t.head), normalize_surface(t.tail),
          normalize_surface(t.relation)};
}

std::vector<Triplet> normalized_set(const std::vector<Triplet>& triplets) {
  std::vector<Triplet> out;
  for (const Triplet& t : triplets) add_unique(out, normalize(t));
  return out;
}

std::vector<Triplet> sort_by_appearance(std::vector<Triplet> triplets,
                                        const std::string& source) {
  auto pos_of = [&source](const std::string& s) {
    const size_t p = source.find(s);
    return p == std::string::npos ? source.size() : p;
  };
  std::stable_sort(triplets.begin(), triplets.end(),
                   [&](const Triplet& a, const Triplet& b) {
                     const auto ka = std::make_pair(pos_of(a.head), pos_of(a.tail));
                     const auto kb = std::make_pair(pos_of(b.head), pos_of(b.tail));
                     return ka < kb;
                   });
  return triplets;
}

}  // namespace biolm::codec
