#include "ragforge/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "ragforge/click_ingest.hpp"
#include "ragforge/config.hpp"
#include "ragforge/errors.hpp"
#include "ragforge/evaluation.hpp"
#include "ragforge/finetune_dataset.hpp"
#include "ragforge/qa_generator.hpp"
#include "ragforge/rag_pipeline.hpp"
#include "ragforge/sanitizer.hpp"
#include "ragforge/service.hpp"
#include "ragforge/text.hpp"
#include "ragforge/vector_index.hpp"

namespace ragforge::cli {

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool trace = false;
};

void setup_logging(const Globals& g) {
  static std::shared_ptr<spdlog::logger> logger = spdlog::stderr_color_mt("ragforge");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(g.quiet ? spdlog::level::warn : (g.trace ? spdlog::level::debug : spdlog::level::info));
}

config::Config load(const Globals& g) {
  config::Config cfg = g.config_path.empty() ? config::Config{} : config::load_config(g.config_path);
  if (g.seed) cfg.override_seed(*g.seed);
  cfg.validate();
  return cfg;
}

const std::string& need(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("no path for ") + what + " (pass it or set it in the config)");
  return value;
}

std::string pick_path(const std::string& flag, const std::string& configured, const char* what) {
  return need(flag.empty() ? configured : flag, what);
}

std::vector<Document> load_documents(const std::string& path) {
  std::vector<Document> docs;
  for (const auto& j : read_jsonl_strict(path)) docs.push_back(document_from_json(j));
  return docs;
}

std::vector<qa::GeneratedQA> load_generated(const std::string& path) {
  std::vector<qa::GeneratedQA> out;
  for (const auto& j : read_jsonl_strict(path)) out.push_back(qa::generated_from_json(j));
  return out;
}

std::ofstream open_out(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

template <typename Rows>
void write_rows(const std::string& path, const Rows& rows) {
  auto out = open_out(path);
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::int64_t build_timestamp() {
  if (const char* s = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return std::stoll(s);
    } catch (const std::exception&) {
      throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
    }
  }
  return 0;
}

struct LlmStack {
  std::unique_ptr<llm::Client> base;
  std::unique_ptr<llm::BoundedClient> bounded;
  llm::Client& client() { return *bounded; }
};

LlmStack make_llm(const config::Config& cfg) {
  LlmStack s;
  if (cfg.llm.provider == "http") {
    llm::HttpConfig h;
    h.endpoint = cfg.llm.endpoint;
    h.model = cfg.llm.model;
    h.api_key = llm::api_key_from_env();
    h.timeout = std::chrono::milliseconds(cfg.llm.timeout_ms);
    h.max_attempts = cfg.llm.max_attempts;
    h.backoff_base = std::chrono::milliseconds(cfg.llm.backoff_ms);
    spdlog::debug("llm: http endpoint {} model {} key {}", h.endpoint, h.model, llm::redact_secret(h.api_key));
    s.base = std::make_unique<llm::HttpClient>(h);
  } else if (!cfg.paths.fixtures.empty()) {
    s.base = llm::ScriptedClient::from_directory(cfg.paths.fixtures);
  } else {
    s.base = std::make_unique<llm::ScriptedClient>();
  }
  s.bounded = std::make_unique<llm::BoundedClient>(*s.base, static_cast<std::ptrdiff_t>(cfg.llm.max_in_flight));
  return s;
}

// Everything the answering path needs, loaded from disk.
struct ServingState {
  index::Index idx;
  embed::Projection proj;
  intent::ProductCatalog catalog;
  LlmStack llm;
};

ServingState load_serving(const config::Config& cfg, const std::string& index_flag, const std::string& proj_flag) {
  ServingState s;
  s.idx = index::load(pick_path(index_flag, cfg.paths.index, "index"));
  s.proj = embed::load_projection(pick_path(proj_flag, cfg.paths.projection, "projection"));
  if (!cfg.paths.catalog.empty()) s.catalog = intent::ProductCatalog::load(cfg.paths.catalog);
  s.llm = make_llm(cfg);
  return s;
}

// Subcommand bodies. Each receives the parsed globals.

int cmd_ingest(const Globals& g, const std::string& clicks_flag, const std::string& docs_flag,
               const std::string& out_path) {
  auto cfg = load(g);
  auto parsed = clicks::parse_click_log_file(pick_path(clicks_flag, cfg.paths.clicks, "click log"));
  std::map<std::string, Document> docs;
  for (auto& d : load_documents(pick_path(docs_flag, cfg.paths.documents, "documents"))) docs.emplace(d.doc_id, d);
  auto rel = clicks::compute_relevance(parsed.records, docs);
  std::vector<ordered_json> rows;
  for (const auto& p : rel.pairs) rows.push_back(clicks::training_pair_to_json(p));
  write_rows(pick_path(out_path, cfg.paths.pairs, "training pairs output"), rows);
  json report{{"lines", parsed.stats.lines},
              {"malformed", parsed.stats.skipped},
              {"zero_dropped", parsed.stats.zero_dropped},
              {"records", parsed.records.size()},
              {"pairs", rel.pairs.size()},
              {"unresolved", rel.unresolved}};
  std::cout << report.dump() << '\n';
  return kExitOk;
}

int cmd_train(const Globals& g, const std::string& pairs_flag, const std::string& out_flag,
              std::optional<std::size_t> epochs) {
  auto cfg = load(g);
  if (epochs) cfg.train.epochs = *epochs;
  std::vector<clicks::TrainingPair> pairs;
  for (const auto& j : read_jsonl_strict(pick_path(pairs_flag, cfg.paths.pairs, "training pairs")))
    pairs.push_back(clicks::training_pair_from_json(j));
  if (pairs.empty()) throw EmptyInputError("no training pairs");
  auto initial = embed::Projection::initial(cfg.features.dim, cfg.train.rng_seed);
  auto result = embed::train(pairs, cfg.train, cfg.features, initial);
  const std::string out = pick_path(out_flag, cfg.paths.projection, "projection output");
  embed::save_projection(result.projection, out);
  std::cout << json{{"pairs", pairs.size()},
                    {"epoch_losses", result.epoch_losses},
                    {"projection_version", result.projection.version()}}
                   .dump()
            << '\n';
  return kExitOk;
}

int cmd_build_index(const Globals& g, std::vector<std::string> docs_files, const std::vector<std::string>& qa_files,
                    const std::string& qa_kind, const std::string& proj_flag, const std::string& out_flag) {
  auto cfg = load(g);
  if (docs_files.empty() && !cfg.paths.documents.empty()) docs_files.push_back(cfg.paths.documents);
  if (docs_files.empty() && qa_files.empty()) throw ConfigError("build-index needs --docs or --qa input");
  std::vector<Document> records;
  for (const auto& f : docs_files) {
    auto d = load_documents(f);
    records.insert(records.end(), d.begin(), d.end());
  }
  std::map<std::string, std::set<std::string>> tags_of;
  for (const auto& d : records) tags_of[d.doc_id] = d.product_tags;
  const ItemKind kind = parse_item_kind(qa_kind);
  if (!is_generated(kind)) throw ConfigError("--qa-kind must be a generated kind");
  for (const auto& f : qa_files) {
    std::map<std::string, std::size_t> per_source;
    for (const auto& qa : load_generated(f)) {
      Document d;
      d.doc_id = qa.source_doc_id + "#q" + std::to_string(per_source[qa.source_doc_id]++);
      d.kind = kind;
      d.question = qa.question;
      d.answer = qa.answer;
      if (auto it = tags_of.find(qa.source_doc_id); it != tags_of.end()) d.product_tags = it->second;
      records.push_back(std::move(d));
    }
  }
  auto proj = embed::load_projection(pick_path(proj_flag, cfg.paths.projection, "projection"));
  auto idx = index::build(records, proj, cfg.features, build_timestamp());
  index::save(idx, pick_path(out_flag, cfg.paths.index, "index output"));
  json counts;
  for (const auto& [k, n] : idx.kind_counts()) counts[std::string(to_string(k))] = n;
  std::cout << json{{"items", idx.size()}, {"kinds", counts}, {"projection_version", idx.projection_version()}}.dump()
            << '\n';
  return kExitOk;
}

int cmd_sanitize(const Globals& g, const std::string& in_path, const std::string& out_path,
                 const std::string& fields_flag, const std::string& report_path, const std::string& names_flag) {
  auto cfg = load(g);
  std::vector<std::string> fields = cfg.sanitize_fields;
  if (!fields_flag.empty()) fields = split(fields_flag, ',');
  std::set<std::string> names;
  const std::string names_path = names_flag.empty() ? cfg.paths.names : names_flag;
  if (!names_path.empty()) {
    std::istringstream in(read_file(names_path));
    for (std::string line; std::getline(in, line);) {
      auto t = trim(line);
      if (!t.empty()) names.emplace(t);
    }
  }
  sanitize::DictionaryNerProvider ner(std::move(names));
  sanitize::Report report;
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw IoError("cannot read " + in_path);
  auto out = open_out(out_path);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json rec = ordered_json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      spdlog::warn("line {}: not a JSON object, skipped", line_no);
      ++report.skipped;
      continue;
    }
    try {
      auto clean = sanitize::sanitize_record(rec, fields, ner, report, cfg.sanitizer);
      out << (clean == rec ? line : clean.dump()) << '\n';
    } catch (const RecordError& e) {
      spdlog::warn("line {}: {}", line_no, e.what());
      ++report.skipped;
    }
  }
  if (!out) throw IoError("write failed: " + out_path);
  const std::string summary = report.to_json().dump(2);
  if (!report_path.empty()) write_file(report_path, summary + "\n");
  std::cout << report.to_json().dump() << '\n';
  return kExitOk;
}

int cmd_generate_qa(const Globals& g, const std::string& docs_flag, const std::string& out_path,
                    const std::string& exemplars_flag, std::optional<std::size_t> max_per_doc) {
  auto cfg = load(g);
  auto opts = cfg.generation;
  if (max_per_doc) opts.max_per_doc = *max_per_doc;
  const std::string ex = exemplars_flag.empty() ? cfg.paths.exemplars : exemplars_flag;
  if (!ex.empty()) opts.exemplars = qa::load_exemplars(ex);
  auto docs = load_documents(pick_path(docs_flag, cfg.paths.documents, "documents"));
  auto llm = make_llm(cfg);
  auto report = qa::generate_for_corpus(docs, llm.client(), out_path, opts);
  std::cout << report.to_json().dump() << '\n';
  return kExitOk;
}

int cmd_finetune(const Globals& g, const std::string& qa_path, const std::string& index_flag,
                 const std::string& out_path, const std::string& rendered_path) {
  auto cfg = load(g);
  auto idx = index::load(pick_path(index_flag, cfg.paths.index, "index"));
  auto filtered = finetune::filter_short_answers(load_generated(qa_path), cfg.finetune);
  spdlog::info("{} QA pair(s) kept, {} below {} tokens", filtered.kept.size(), filtered.dropped,
               cfg.finetune.min_answer_tokens);
  auto ds = finetune::build_dataset(filtered.kept, idx, cfg.finetune);
  std::vector<ordered_json> rows;
  for (const auto& r : ds.records) rows.push_back(finetune::record_to_json(r));
  write_rows(out_path, rows);
  if (!rendered_path.empty()) {
    auto out = open_out(rendered_path);
    for (const auto& r : ds.records)
      out << finetune::render_training_sample(r, finetune::kDefaultSampleTemplate, cfg.finetune.rng_seed) << "\n\n";
  }
  json report = ds.report.to_json();
  report["short_answers_dropped"] = filtered.dropped;
  std::cout << report.dump() << '\n';
  return kExitOk;
}

int cmd_eval(const Globals& g, const std::string& index_flag, const std::string& proj_flag,
             const std::string& eval_path, std::optional<std::size_t> k, bool as_json) {
  auto cfg = load(g);
  auto idx = index::load(pick_path(index_flag, cfg.paths.index, "index"));
  auto proj = embed::load_projection(pick_path(proj_flag, cfg.paths.projection, "projection"));
  std::vector<eval::EvalQuery> queries;
  for (const auto& j : read_jsonl_strict(eval_path)) queries.push_back(eval::eval_query_from_json(j));
  auto report = eval::evaluate_retriever(idx, proj, cfg.features, queries, k.value_or(cfg.eval_k));
  if (as_json) std::cout << report.to_json().dump() << '\n';
  else std::cout << report.to_table();
  return kExitOk;
}

int cmd_judge(const Globals& g, const std::string& gold_path, const std::string& cand_path) {
  auto cfg = load(g);
  std::map<std::string, std::string> candidates;
  for (const auto& j : read_jsonl_strict(cand_path))
    candidates[j.at("id").get<std::string>()] = j.at("answer").get<std::string>();
  auto llm = make_llm(cfg);
  json rows = json::array();
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& j : read_jsonl_strict(gold_path)) {
    const std::string id = j.at("id").get<std::string>();
    auto it = candidates.find(id);
    if (it == candidates.end()) throw InputError("no candidate answer for id '" + id + "'");
    auto score = eval::judge_relevance(j.at("question").get<std::string>(), j.at("answer").get<std::string>(),
                                       it->second, llm.client());
    rows.push_back({{"id", id}, {"score", score.mean}, {"parsed", score.scores.size()}, {"discarded", score.discarded}});
    sum += score.mean;
    ++n;
  }
  if (n == 0) throw EmptyInputError("no gold rows");
  std::cout << json{{"mean", sum / static_cast<double>(n)}, {"rows", rows}}.dump() << '\n';
  return kExitOk;
}

int cmd_synth(const Globals& g, const std::string& out_dir) {
  auto cfg = load(g);
  auto corpus = eval::synth_clicks(cfg.synth);
  std::filesystem::create_directories(out_dir);
  std::vector<json> docs, train, all, evals;
  for (const auto& d : corpus.documents) docs.push_back(document_to_json(d));
  auto click_row = [](const clicks::ClickRecord& r) {
    return json{{"query", r.query}, {"doc_id", r.doc_id}, {"clicks", r.clicks}};
  };
  for (const auto& r : corpus.train_rows) train.push_back(click_row(r));
  for (const auto& r : corpus.all_rows) all.push_back(click_row(r));
  for (const auto& q : corpus.eval_set) evals.push_back(eval::eval_query_to_json(q));
  const std::filesystem::path dir(out_dir);
  write_rows((dir / "docs.jsonl").string(), docs);
  write_rows((dir / "clicks.jsonl").string(), train);
  write_rows((dir / "all_clicks.jsonl").string(), all);
  write_rows((dir / "eval.jsonl").string(), evals);
  std::cout << json{{"documents", docs.size()},
                    {"queries", corpus.queries.size()},
                    {"rows", corpus.all_rows.size()},
                    {"train_rows", corpus.train_rows.size()},
                    {"eval_rows", corpus.eval_rows.size()},
                    {"eval_queries", corpus.eval_set.size()}}
                   .dump()
            << '\n';
  return kExitOk;
}

int cmd_serve(const Globals& g, std::optional<int> port, const std::string& host_flag, const std::string& index_flag,
              const std::string& proj_flag) {
  auto cfg = load(g);
  auto state = load_serving(cfg, index_flag, proj_flag);
  rag::PipelineDeps deps{state.idx, state.proj, cfg.features, state.catalog, state.llm.client(), cfg.pipeline};
  service::ServiceOptions opts;
  opts.cors_origin = cfg.service.cors_origin;
  service::Service svc(deps, opts);
  svc.serve_blocking(host_flag.empty() ? cfg.service.host : host_flag, port.value_or(cfg.service.port));
  return kExitOk;
}

int cmd_ask(const Globals& g, const std::string& query, const std::vector<std::string>& products,
            const std::string& index_flag, const std::string& proj_flag, bool no_timings) {
  auto cfg = load(g);
  auto state = load_serving(cfg, index_flag, proj_flag);
  rag::PipelineDeps deps{state.idx, state.proj, cfg.features, state.catalog, state.llm.client(), cfg.pipeline};
  auto bundle = rag::answer(query, deps, products);
  if (g.trace) std::cout << bundle.to_json(!no_timings).dump(2) << '\n';
  else std::cout << bundle.answer << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"ragforge: click-trained retrieval and grounded answering toolkit", "ragforge"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "TOML config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "override every stage seed");
  app.add_flag("--quiet", g.quiet, "only warnings and errors on stderr");
  app.add_flag("--trace", g.trace, "debug logging; `ask` prints the full answer bundle");
  app.fallthrough();

  std::function<int()> action;

  auto* ingest = app.add_subcommand("ingest-clicks", "turn a click log into graded training pairs");
  std::string clicks_path, docs_path, out_path;
  ingest->add_option("--clicks", clicks_path, "click log JSONL");
  ingest->add_option("--docs", docs_path, "documents JSONL");
  ingest->add_option("--out", out_path, "training pairs JSONL");
  ingest->callback([&] { action = [&] { return cmd_ingest(g, clicks_path, docs_path, out_path); }; });

  auto* train = app.add_subcommand("train-retriever", "train the shared projection");
  std::string pairs_path, proj_out;
  std::optional<std::size_t> epochs;
  train->add_option("--pairs", pairs_path, "training pairs JSONL");
  train->add_option("--out", proj_out, "projection output");
  train->add_option("--epochs", epochs, "override train.epochs");
  train->callback([&] { action = [&] { return cmd_train(g, pairs_path, proj_out, epochs); }; });

  auto* build = app.add_subcommand("build-index", "embed source items into an index");
  std::vector<std::string> docs_files, qa_files;
  std::string qa_kind = "generated_helpx_qa", proj_path, index_out;
  build->add_option("--docs", docs_files, "source items JSONL (repeatable)");
  build->add_option("--qa", qa_files, "generated QA JSONL (repeatable)");
  build->add_option("--qa-kind", qa_kind, "kind for --qa items");
  build->add_option("--projection", proj_path, "projection file");
  build->add_option("--out", index_out, "index output");
  build->callback([&] {
    action = [&] { return cmd_build_index(g, docs_files, qa_files, qa_kind, proj_path, index_out); };
  });

  auto* sanitize = app.add_subcommand("sanitize", "redact personal information from JSONL records");
  std::string san_in, san_out, san_fields, san_report, san_names;
  sanitize->add_option("--in", san_in, "input JSONL")->required();
  sanitize->add_option("--out", san_out, "output JSONL")->required();
  sanitize->add_option("--fields", san_fields, "comma-separated fields to scrub");
  sanitize->add_option("--report", san_report, "report JSON output");
  sanitize->add_option("--names", san_names, "person names, one per line");
  sanitize->callback([&] {
    action = [&] { return cmd_sanitize(g, san_in, san_out, san_fields, san_report, san_names); };
  });

  auto* gen = app.add_subcommand("generate-qa", "generate QA pairs from documents with the configured LLM");
  std::string gen_docs, gen_out, gen_ex;
  std::optional<std::size_t> max_per_doc;
  gen->add_option("--docs", gen_docs, "documents JSONL");
  gen->add_option("--out", gen_out, "QA JSONL (appended; resumable)")->required();
  gen->add_option("--exemplars", gen_ex, "few-shot exemplars JSONL");
  gen->add_option("--max-per-doc", max_per_doc, "cap on pairs per document");
  gen->callback([&] { action = [&] { return cmd_generate_qa(g, gen_docs, gen_out, gen_ex, max_per_doc); }; });

  auto* ft = app.add_subcommand("build-finetune-set", "build retrieval-aware finetuning records");
  std::string ft_qa, ft_index, ft_out, ft_rendered;
  ft->add_option("--qa", ft_qa, "generated QA JSONL")->required();
  ft->add_option("--index", ft_index, "index file");
  ft->add_option("--out", ft_out, "records JSONL")->required();
  ft->add_option("--rendered", ft_rendered, "rendered training text");
  ft->callback([&] { action = [&] { return cmd_finetune(g, ft_qa, ft_index, ft_out, ft_rendered); }; });

  auto* ev = app.add_subcommand("eval-ndcg", "mean nDCG@k of a projection over an eval set");
  std::string ev_index, ev_proj, ev_eval;
  std::optional<std::size_t> ev_k;
  bool ev_json = false;
  ev->add_option("--index", ev_index, "index file");
  ev->add_option("--projection", ev_proj, "projection file");
  ev->add_option("--eval", ev_eval, "eval JSONL")->required();
  ev->add_option("-k", ev_k, "cutoff");
  ev->add_flag("--json", ev_json, "emit the JSON report instead of a table");
  ev->callback([&] { action = [&] { return cmd_eval(g, ev_index, ev_proj, ev_eval, ev_k, ev_json); }; });

  auto* judge = app.add_subcommand("judge", "score candidate answers against gold answers");
  std::string gold, cand;
  judge->add_option("--gold", gold, "gold JSONL {id, question, answer}")->required();
  judge->add_option("--candidates", cand, "candidate JSONL {id, answer}")->required();
  judge->callback([&] { action = [&] { return cmd_judge(g, gold, cand); }; });

  auto* synth = app.add_subcommand("synth", "write a synthetic click corpus");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->callback([&] { action = [&] { return cmd_synth(g, synth_out); }; });

  auto* serve = app.add_subcommand("serve", "run the HTTP answering service");
  std::optional<int> port;
  std::string host, serve_index, serve_proj;
  serve->add_option("--port", port, "listen port");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--index", serve_index, "index file");
  serve->add_option("--projection", serve_proj, "projection file");
  serve->callback([&] { action = [&] { return cmd_serve(g, port, host, serve_index, serve_proj); }; });

  auto* ask = app.add_subcommand("ask", "answer one query");
  std::string query, ask_index, ask_proj;
  std::vector<std::string> products;
  bool no_timings = false;
  ask->add_option("query", query, "the question")->required();
  ask->add_option("--product", products, "manual product override (repeatable)");
  ask->add_option("--index", ask_index, "index file");
  ask->add_option("--projection", ask_proj, "projection file");
  ask->add_flag("--no-timings", no_timings, "omit stage timings from --trace output");
  ask->callback([&] {
    action = [&] { return cmd_ask(g, query, products, ask_index, ask_proj, no_timings); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) g.seed = seed;
  setup_logging(g);

  try {
    return action ? action() : kExitUsage;
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitDomain;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitDomain;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ragforge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ragforge::cli
