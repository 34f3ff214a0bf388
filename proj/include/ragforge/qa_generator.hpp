#pragma once

#include <string>
#include <vector>

#include "ragforge/document.hpp"
#include "ragforge/llm_client.hpp"

namespace ragforge::qa {

inline constexpr const char* kDefaultQaTemplate =
    "You are an AI assistant that helps create question-answer pairs. You start every question with "
    "QUESTION and every answer with ANSWER. Answer in detail.";

struct QAPair {
  std::string question;
  std::string answer;
  friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct Exemplar {
  std::string document;
  QAPair pair;
};

struct QAGenPrompt {
  std::string system_text;
  std::vector<Exemplar> exemplars;
  std::string target_document;

  // system text, then one "Document:" block per exemplar followed by its
  // QUESTION/ANSWER lines, then the target document.
  std::string render() const;
};

// Body when present, else title and description on separate lines.
std::string document_prompt_text(const Document& doc);

// Throws InputError when the document has no text.
QAGenPrompt build_prompt(const Document& doc, const std::vector<Exemplar>& exemplars,
                         const std::string& system_template = kDefaultQaTemplate);

struct ParsedQA {
  std::vector<QAPair> pairs;
  std::size_t dropped = 0;  // unpaired questions, stray answers, empty halves
};

// Markers are recognized only at line starts: "QUESTION" / "ANSWER", case
// sensitive, optionally followed by ':'. Text on the marker line and all
// following lines up to the next marker belong to that section. Throws
// ParseError when an ANSWER precedes every QUESTION or no pair is found.
ParsedQA parse_qa_markers(const std::string& llm_output);

// Inverse of parse_qa_markers for well-formed pairs.
std::string render_qa_markers(const std::vector<QAPair>& pairs);

struct GeneratedQA {
  std::string question;
  std::string answer;
  std::string source_doc_id;
  std::string generator;
};

ordered_json generated_to_json(const GeneratedQA& g);
GeneratedQA generated_from_json(const json& j);

struct GenerationOptions {
  std::string system_template = kDefaultQaTemplate;
  std::vector<Exemplar> exemplars;
  std::size_t max_per_doc = 8;
  std::size_t chunk_words = 2000;
  std::size_t max_tokens = 1024;
};

struct GenerationReport {
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t pairs_written = 0;
  std::size_t llm_calls = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (doc_id, reason)

  json to_json() const;
};

// Splits text into chunks of at most `max_words` whitespace tokens.
std::vector<std::string> chunk_words(const std::string& text, std::size_t max_words);

// For each document: build_prompt -> complete -> parse, appending pairs to the
// JSONL sink. Documents already present in the sink, or recorded in the
// "<sink>.failures.jsonl" sidecar, are skipped so no document is submitted
// twice across resumed runs. Throws IoError when the sink is not writable.
GenerationReport generate_for_corpus(const std::vector<Document>& docs, llm::Client& client,
                                     const std::string& sink_path, const GenerationOptions& options = {});

std::vector<Exemplar> load_exemplars(const std::string& path);

}  // namespace ragforge::qa
