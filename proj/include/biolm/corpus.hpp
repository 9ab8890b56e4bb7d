#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "biolm/common.hpp"

namespace biolm::corpus {

struct Document {
  std::string id;
  std::string title;
  std::string abstract_text;
};

enum class Task {
  relation_extraction,
  question_answering,
  doc_classification,
  generation,
};

std::string task_name(Task task);
Task task_from_name(const std::string& name);

struct Triplet {
  std::string head;
  std::string tail;
  std::string relation;

  bool operator==(const Triplet&) const = default;
  auto operator<=>(const Triplet&) const = default;
};

enum class QaAnswer { yes, no, maybe };

std::string qa_answer_name(QaAnswer a);
std::optional<QaAnswer> qa_answer_from_name(const std::string& name);

// Label variant: triplet set for relation extraction, categorical answer for
// QA, label set for document classification, nothing for generation.
using TaskLabel = std::variant<std::vector<Triplet>, QaAnswer,
                               std::vector<std::string>, std::monostate>;

struct TaskExample {
  std::string id;
  Task task = Task::relation_extraction;
  std::string source;
  TaskLabel label;
};

struct DatasetSplit {
  std::vector<TaskExample> train;
  std::vector<TaskExample> valid;
  std::vector<TaskExample> test;
};

// Keeps exactly the documents with nonempty title and nonempty abstract,
// original order preserved. Idempotent.
std::vector<Document> filter_documents(const std::vector<Document>& docs);

// JSONL: {"id","title","abstract"} per line.
std::vector<Document> load_documents(const std::string& path);
void save_documents(const std::string& path,
                    const std::vector<Document>& docs);

// JSONL: {"id","task","source","label"} per line. Malformed lines raise a
// ParseError naming the line; a label that does not match `task` raises a
// ConfigError.
std::vector<TaskExample> load_examples(const std::string& path, Task task);
void save_examples(const std::string& path,
                   const std::vector<TaskExample>& examples);

// Loads the three split files and checks ids are pairwise disjoint across
// splits. Empty files load as empty splits with a warning.
DatasetSplit load_dataset(const std::string& train_path,
                          const std::string& valid_path,
                          const std::string& test_path, Task task);

// Pretraining text for a document: title, newline, abstract.
std::string pretraining_text(const Document& doc);

// QA source assembly: "question: ... context: ... answer: ...".
std::string assemble_qa_source(const std::string& question,
                               const std::string& context,
                               const std::string& answer);

}  // namespace biolm::corpus
