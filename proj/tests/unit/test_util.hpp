#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ragforge/document.hpp"
#include "ragforge/jsonl.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "rf") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string fixture(const std::string& rel) { return std::string(RAGFORGE_FIXTURES) + "/" + rel; }

inline std::string random_word(std::mt19937_64& rng, std::size_t min_len = 2, std::size_t max_len = 8) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::string w(len(rng), 'a');
  for (auto& c : w) c = static_cast<char>(ch(rng));
  return w;
}

inline std::string random_sentence(std::mt19937_64& rng, std::size_t words) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += random_word(rng);
  }
  return s;
}

inline ragforge::Document helpx(const std::string& id, const std::string& title, const std::string& desc,
                                std::set<std::string> tags = {}) {
  ragforge::Document d;
  d.doc_id = id;
  d.kind = ragforge::ItemKind::helpx_doc;
  d.title = title;
  d.description = desc;
  d.product_tags = std::move(tags);
  return d;
}

inline ragforge::Document qa_doc(const std::string& id, ragforge::ItemKind kind, const std::string& q,
                                 const std::string& a, std::set<std::string> tags = {}) {
  ragforge::Document d;
  d.doc_id = id;
  d.kind = kind;
  d.question = q;
  d.answer = a;
  d.product_tags = std::move(tags);
  return d;
}

inline std::vector<ragforge::Document> load_docs(const std::string& path) {
  std::vector<ragforge::Document> out;
  for (const auto& j : ragforge::read_jsonl_strict(path)) out.push_back(ragforge::document_from_json(j));
  return out;
}

}  // namespace testutil
