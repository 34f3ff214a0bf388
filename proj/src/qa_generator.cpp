#include "ragforge/qa_generator.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::qa {

std::string QAGenPrompt::render() const {
  std::string out = system_text;
  out += "\n\n";
  for (const auto& ex : exemplars) {
    out += "Document:\n";
    out += ex.document;
    out += "\n\nQUESTION: ";
    out += ex.pair.question;
    out += "\nANSWER: ";
    out += ex.pair.answer;
    out += "\n\n";
  }
  out += "Document:\n";
  out += target_document;
  out += "\n";
  return out;
}

std::string document_prompt_text(const Document& doc) {
  if (!trim(doc.body).empty()) return std::string(trim(doc.body));
  auto t = trim(doc.title);
  auto d = trim(doc.description);
  if (t.empty()) return std::string(d);
  if (d.empty()) return std::string(t);
  return std::string(t) + "\n" + std::string(d);
}

QAGenPrompt build_prompt(const Document& doc, const std::vector<Exemplar>& exemplars,
                         const std::string& system_template) {
  std::string text = document_prompt_text(doc);
  if (text.empty()) throw InputError("document " + doc.doc_id + " has no text");
  return QAGenPrompt{system_template, exemplars, std::move(text)};
}

namespace {

enum class Marker { none, question, answer };

// Returns the marker and the remainder of the line after it.
std::pair<Marker, std::string_view> classify(std::string_view line) {
  for (auto [word, kind] : {std::pair{std::string_view("QUESTION"), Marker::question},
                            std::pair{std::string_view("ANSWER"), Marker::answer}}) {
    if (!starts_with(line, word)) continue;
    std::string_view rest = line.substr(word.size());
    if (rest.empty()) return {kind, rest};
    if (rest.front() == ':') return {kind, rest.substr(1)};
    if (rest.front() == ' ' || rest.front() == '\t' || rest.front() == '\r') return {kind, rest};
  }
  return {Marker::none, line};
}

}  // namespace

ParsedQA parse_qa_markers(const std::string& llm_output) {
  ParsedQA out;
  // `skip` swallows the text of a stray ANSWER that has no open QUESTION.
  enum class State { start, question, answer, skip } state = State::start;
  std::string question, answer;

  auto close_pair = [&]() {
    std::string q(trim(question)), a(trim(answer));
    if (q.empty() || a.empty()) {
      ++out.dropped;
    } else {
      out.pairs.push_back({std::move(q), std::move(a)});
    }
    question.clear();
    answer.clear();
  };

  for (const auto& raw : split(llm_output, '\n')) {
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto [marker, rest] = classify(line);
    if (marker == Marker::question) {
      if (state == State::answer) close_pair();
      if (state == State::question) ++out.dropped;  // previous question never got an answer
      state = State::question;
      question = std::string(rest);
    } else if (marker == Marker::answer) {
      if (state == State::start) throw ParseError("ANSWER before any QUESTION in LLM output:\n" + llm_output);
      if (state == State::question) {
        state = State::answer;
        answer = std::string(rest);
      } else {
        if (state == State::answer) close_pair();
        ++out.dropped;
        state = State::skip;
      }
    } else if (state == State::question) {
      question += "\n";
      question += line;
    } else if (state == State::answer) {
      answer += "\n";
      answer += line;
    }
  }
  if (state == State::answer) close_pair();
  if (state == State::question) {
    ++out.dropped;
    spdlog::warn("qa parse: dropped trailing unpaired QUESTION");
  }
  if (out.pairs.empty()) throw ParseError("no QUESTION/ANSWER pairs found in LLM output:\n" + llm_output);
  return out;
}

std::string render_qa_markers(const std::vector<QAPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += "QUESTION: " + p.question + "\nANSWER: " + p.answer + "\n";
  }
  return out;
}

ordered_json generated_to_json(const GeneratedQA& g) {
  ordered_json j;
  j["question"] = g.question;
  j["answer"] = g.answer;
  j["source_doc_id"] = g.source_doc_id;
  j["generator"] = g.generator;
  return j;
}

GeneratedQA generated_from_json(const json& j) {
  try {
    return GeneratedQA{j.at("question").get<std::string>(), j.at("answer").get<std::string>(),
                       j.at("source_doc_id").get<std::string>(), j.value("generator", std::string{})};
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad generated QA record: ") + e.what());
  }
}

json GenerationReport::to_json() const {
  json f = json::array();
  for (const auto& [doc, reason] : failures) f.push_back({{"doc_id", doc}, {"reason", reason}});
  return json{{"ok", ok},
              {"failed", failed},
              {"skipped", skipped},
              {"pairs_written", pairs_written},
              {"llm_calls", llm_calls},
              {"failures", f}};
}

std::vector<std::string> chunk_words(const std::string& text, std::size_t max_words) {
  auto words = split_whitespace(text);
  if (max_words == 0 || words.size() <= max_words) return {text};
  std::vector<std::string> chunks;
  for (std::size_t i = 0; i < words.size(); i += max_words) {
    std::string c;
    for (std::size_t k = i; k < std::min(words.size(), i + max_words); ++k) {
      if (k > i) c.push_back(' ');
      c.append(words[k]);
    }
    chunks.push_back(std::move(c));
  }
  return chunks;
}

namespace {

std::set<std::string> ids_in_jsonl(const std::string& path, const char* key) {
  std::set<std::string> ids;
  std::ifstream in(path);
  if (!in) return ids;
  for_each_jsonl(in, [&](const json& j, std::size_t) {
    if (auto it = j.find(key); it != j.end() && it->is_string()) ids.insert(it->get<std::string>());
  });
  return ids;
}

}  // namespace

GenerationReport generate_for_corpus(const std::vector<Document>& docs, llm::Client& client,
                                     const std::string& sink_path, const GenerationOptions& options) {
  if (docs.empty()) throw EmptyInputError("no documents for QA generation");
  const std::string failure_path = sink_path + ".failures.jsonl";
  std::set<std::string> done = ids_in_jsonl(sink_path, "source_doc_id");
  for (const auto& id : ids_in_jsonl(failure_path, "doc_id")) done.insert(id);

  std::ofstream sink(sink_path, std::ios::app);
  if (!sink) throw IoError("cannot open QA sink " + sink_path);
  std::ofstream failures;

  GenerationReport report;
  for (const auto& doc : docs) {
    if (done.contains(doc.doc_id)) {
      ++report.skipped;
      continue;
    }
    std::vector<QAPair> pairs;
    std::string reason;
    try {
      QAGenPrompt base = build_prompt(doc, options.exemplars, options.system_template);
      for (const auto& chunk : chunk_words(base.target_document, options.chunk_words)) {
        QAGenPrompt prompt = base;
        prompt.target_document = chunk;
        llm::CompletionRequest req;
        req.prompt = prompt.render();
        req.max_tokens = options.max_tokens;
        ++report.llm_calls;
        auto result = client.complete(req);
        try {
          auto parsed = parse_qa_markers(result.samples.at(0));
          for (auto& p : parsed.pairs) pairs.push_back(std::move(p));
        } catch (const ParseError& e) {
          reason = "unparseable LLM output";
        }
      }
    } catch (const Error& e) {
      reason = e.what();
    }
    if (pairs.empty()) {
      if (reason.empty()) reason = "no pairs produced";
      ++report.failed;
      report.failures.emplace_back(doc.doc_id, reason);
      if (!failures.is_open()) {
        failures.open(failure_path, std::ios::app);
        if (!failures) throw IoError("cannot open " + failure_path);
      }
      failures << json{{"doc_id", doc.doc_id}, {"reason", reason}}.dump() << '\n';
      failures.flush();
      spdlog::warn("qa generation failed for {}: {}", doc.doc_id, reason);
      continue;
    }
    if (pairs.size() > options.max_per_doc) pairs.resize(options.max_per_doc);
    for (const auto& p : pairs) {
      sink << generated_to_json({p.question, p.answer, doc.doc_id, client.name()}).dump() << '\n';
    }
    sink.flush();
    if (!sink) throw IoError("write to QA sink " + sink_path + " failed");
    ++report.ok;
    report.pairs_written += pairs.size();
    done.insert(doc.doc_id);
  }
  return report;
}

std::vector<Exemplar> load_exemplars(const std::string& path) {
  std::vector<Exemplar> out;
  for (const auto& j : read_jsonl_strict(path)) {
    try {
      out.push_back({j.at("document").get<std::string>(),
                     {j.at("question").get<std::string>(), j.at("answer").get<std::string>()}});
    } catch (const json::exception& e) {
      throw FormatError(path + ": bad exemplar: " + e.what());
    }
  }
  return out;
}

}  // namespace ragforge::qa
