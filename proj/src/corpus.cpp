#include "biolm/corpus.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace biolm::corpus {

using json = nlohmann::ordered_json;

std::string task_name(Task task) {
  switch (task) {
    case Task::relation_extraction: return "relation_extraction";
    case Task::question_answering: return "question_answering";
    case Task::doc_classification: return "doc_classification";
    case Task::generation: return "generation";
  }
  throw Error("unknown task enum value");
}

Task task_from_name(const std::string& name) {
  if (name == "relation_extraction") return Task::relation_extraction;
  if (name == "question_answering") return Task::question_answering;
  if (name == "doc_classification") return Task::doc_classification;
  if (name == "generation") return Task::generation;
  throw ConfigError("unknown task: " + name);
}

std::string qa_answer_name(QaAnswer a) {
  switch (a) {
    case QaAnswer::yes: return "yes";
    case QaAnswer::no: return "no";
    case QaAnswer::maybe: return "maybe";
  }
  throw Error("unknown qa answer enum value");
}

std::optional<QaAnswer> qa_answer_from_name(const std::string& name) {
  if (name == "yes") return QaAnswer::yes;
  if (name == "no") return QaAnswer::no;
  if (name == "maybe") return QaAnswer::maybe;
  return std::nullopt;
}

std::vector<Document> filter_documents(const std::vector<Document>& docs) {
  std::vector<Document> kept;
  for (const Document& d : docs) {
    if (!d.title.empty() && !d.abstract_text.empty()) kept.push_back(d);
  }
  return kept;
}

std::vector<Document> load_documents(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path);
  std::vector<Document> docs;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      Document d;
      d.id = j.at("id").get<std::string>();
      d.title = j.at("title").get<std::string>();
      d.abstract_text = j.at("abstract").get<std::string>();
      if (d.id.empty()) throw Error("document id must be nonempty");
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, e.what());
    } catch (const Error& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
  return docs;
}

void save_documents(const std::string& path,
                    const std::vector<Document>& docs) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  for (const Document& d : docs) {
    json j;
    j["id"] = d.id;
    j["title"] = d.title;
    j["abstract"] = d.abstract_text;
    os << j.dump() << '\n';
  }
  if (!os) throw Error("write failed: " + path);
}

namespace {

json label_to_json(const TaskLabel& label) {
  if (const auto* triplets = std::get_if<std::vector<Triplet>>(&label)) {
    json arr = json::array();
    for (const Triplet& t : *triplets) {
      json jt;
      jt["head"] = t.head;
      jt["tail"] = t.tail;
      jt["relation"] = t.relation;
      arr.push_back(std::move(jt));
    }
    return arr;
  }
  if (const auto* qa = std::get_if<QaAnswer>(&label)) {
    return qa_answer_name(*qa);
  }
  if (const auto* labels = std::get_if<std::vector<std::string>>(&label)) {
    return json(*labels);
  }
  return nullptr;
}

TaskLabel label_from_json(const json& j, Task task) {
  switch (task) {
    case Task::relation_extraction: {
      if (!j.is_array()) {
        throw ConfigError("relation_extraction label must be a triplet array");
      }
      std::vector<Triplet> triplets;
      for (const json& jt : j) {
        Triplet t;
        t.head = jt.at("head").get<std::string>();
        t.tail = jt.at("tail").get<std::string>();
        t.relation = jt.at("relation").get<std::string>();
        triplets.push_back(std::move(t));
      }
      return triplets;
    }
    case Task::question_answering: {
      if (!j.is_string()) {
        throw ConfigError("question_answering label must be a string");
      }
      auto a = qa_answer_from_name(j.get<std::string>());
      if (!a) {
        throw ConfigError("qa label must be yes, no or maybe, got " +
                          j.get<std::string>());
      }
      return *a;
    }
    case Task::doc_classification: {
      if (!j.is_array()) {
        throw ConfigError("doc_classification label must be a string array");
      }
      return j.get<std::vector<std::string>>();
    }
    case Task::generation: {
      if (!j.is_null()) {
        throw ConfigError("generation examples carry no label");
      }
      return std::monostate{};
    }
  }
  throw Error("unknown task enum value");
}

}  // namespace

std::vector<TaskExample> load_examples(const std::string& path, Task task) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path);
  std::vector<TaskExample> examples;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TaskExample e;
      e.id = j.at("id").get<std::string>();
      e.task = task_from_name(j.at("task").get<std::string>());
      if (e.task != task) {
        throw ConfigError("example task " + task_name(e.task) +
                          " does not match requested task " + task_name(task));
      }
      e.source = j.at("source").get<std::string>();
      e.label = label_from_json(j.at("label"), e.task);
      examples.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, e.what());
    } catch (const ConfigError&) {
      throw;
    }
  }
  return examples;
}

void save_examples(const std::string& path,
                   const std::vector<TaskExample>& examples) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  for (const TaskExample& e : examples) {
    json j;
    j["id"] = e.id;
    j["task"] = task_name(e.task);
    j["source"] = e.source;
    j["label"] = label_to_json(e.label);
    os << j.dump() << '\n';
  }
  if (!os) throw Error("write failed: " + path);
}

DatasetSplit load_dataset(const std::string& train_path,
                          const std::string& valid_path,
                          const std::string& test_path, Task task) {
  DatasetSplit split;
  split.train = load_examples(train_path, task);
  split.valid = load_examples(valid_path, task);
  split.test = load_examples(test_path, task);

  std::set<std::string> seen;
  auto check = [&seen](const std::vector<TaskExample>& v, const char* name) {
    for (const TaskExample& e : v) {
      if (!seen.insert(e.id).second) {
        throw ConfigError("dataset splits share example id " + e.id + " (" +
                          name + ")");
      }
    }
  };
  check(split.train, "train");
  check(split.valid, "valid");
  check(split.test, "test");

  if (split.train.empty() && split.valid.empty() && split.test.empty()) {
    warn("dataset is empty: " + train_path);
  }
  return split;
}

std::string pretraining_text(const Document& doc) {
  return doc.title + "\n" + doc.abstract_text;
}

std::string assemble_qa_source(const std::string& question,
                               const std::string& context,
                               const std::string& answer) {
  return "question: " + question + " context: " + context +
         " answer: " + answer;
}

}  // namespace biolm::corpus
