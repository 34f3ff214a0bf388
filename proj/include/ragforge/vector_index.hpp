#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ragforge/document.hpp"
#include "ragforge/embedder.hpp"

namespace ragforge::index {

struct IndexItem {
  std::string item_id;
  ItemKind kind = ItemKind::helpx_doc;
  std::string match_text;  // what was embedded
  std::optional<std::string> question;
  std::optional<std::string> answer;
  std::optional<std::string> url;
  std::set<std::string> product_tags;
  embed::Embedding embedding;

  // Question shown to the LLM and compared during dedup: the question, or the
  // match text when there is none.
  const std::string& question_text() const { return question ? *question : match_text; }
  std::string answer_text() const { return answer.value_or(std::string{}); }
  // Document body used as finetuning context.
  std::string document_text() const;

  friend bool operator==(const IndexItem&, const IndexItem&) = default;
};

// Immutable after build. Search and lookup are safe to call concurrently.
class Index {
 public:
  Index() = default;
  Index(std::vector<IndexItem> items, std::size_t dim, std::uint32_t projection_version, std::int64_t built_at);

  const std::vector<IndexItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t dim() const { return dim_; }
  std::uint32_t projection_version() const { return projection_version_; }
  std::int64_t built_at() const { return built_at_; }

  const IndexItem* find(const std::string& item_id) const;
  std::map<ItemKind, std::size_t> kind_counts() const;

  friend bool operator==(const Index& a, const Index& b) {
    return a.items_ == b.items_ && a.dim_ == b.dim_ && a.projection_version_ == b.projection_version_ &&
           a.built_at_ == b.built_at_;
  }

 private:
  std::vector<IndexItem> items_;
  std::size_t dim_ = 0;
  std::uint32_t projection_version_ = 0;
  std::int64_t built_at_ = 0;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

// Embeds each record's match text: title + description for Helpx docs, the
// question for the other kinds. Helpx docs store title/description as their
// question/answer payload so every kind can be rendered as a QA pair.
// Throws BuildError on duplicate ids, empty match text, or generated kinds
// without both question and answer.
Index build(const std::vector<Document>& records, const embed::Projection& proj, const embed::FeatureConfig& fcfg,
            std::int64_t built_at = 0);

struct RetrievedItem {
  IndexItem item;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

// Exact cosine scan. Items whose tags intersect `product_filter` are ranked
// ahead of all others; within each block, score descending then item_id
// ascending. Throws QueryError on dim mismatch.
std::vector<RetrievedItem> search(const Index& index, const embed::Embedding& query, std::size_t k,
                                  const std::set<std::string>& product_filter = {});

// "RFIX", u32 format version, u32 dim, u32 count, u32 projection version,
// i64 built_at, per item: u32 payload length + payload, dim f32; CRC32.
std::string encode_index(const Index& index);
Index decode_index(std::string_view bytes);
void save(const Index& index, const std::string& path);
Index load(const std::string& path);

inline constexpr std::uint32_t kIndexFormatVersion = 1;

}  // namespace ragforge::index
