#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "ragforge/jsonl.hpp"

namespace ragforge {

// The four retrieval sources. Order of declaration is not the credibility order;
// see rag::credibility().
enum class ItemKind { helpx_doc, community_question, generated_helpx_qa, generated_video_qa };

std::string_view to_string(ItemKind kind);
// Throws InputError on an unknown name.
ItemKind parse_item_kind(std::string_view name);
inline bool is_generated(ItemKind k) {
  return k == ItemKind::generated_helpx_qa || k == ItemKind::generated_video_qa;
}

// A retrievable source item as it arrives in source JSONL.
struct Document {
  std::string doc_id;
  ItemKind kind = ItemKind::helpx_doc;
  std::string title;
  std::string description;
  std::string body;
  std::optional<std::string> question;
  std::optional<std::string> answer;
  std::optional<std::string> url;
  std::set<std::string> product_tags;

  // title + " " + description
  std::string doc_text() const;
};

// Accepts either `item_id` or `doc_id` as the identifier key.
Document document_from_json(const json& j);
json document_to_json(const Document& d);

}  // namespace ragforge
