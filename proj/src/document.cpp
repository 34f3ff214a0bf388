#include "ragforge/document.hpp"

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge {

std::string_view to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::helpx_doc: return "helpx_doc";
    case ItemKind::community_question: return "community_question";
    case ItemKind::generated_helpx_qa: return "generated_helpx_qa";
    case ItemKind::generated_video_qa: return "generated_video_qa";
  }
  return "unknown";
}

ItemKind parse_item_kind(std::string_view name) {
  for (auto k : {ItemKind::helpx_doc, ItemKind::community_question, ItemKind::generated_helpx_qa,
                 ItemKind::generated_video_qa}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown item kind: " + std::string(name));
}

std::string Document::doc_text() const { return join_title_description(title, description); }

namespace {

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw InputError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw InputError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

Document document_from_json(const json& j) {
  Document d;
  d.doc_id = string_field(j, "item_id");
  if (d.doc_id.empty()) d.doc_id = string_field(j, "doc_id");
  if (d.doc_id.empty()) throw InputError("record has no item_id/doc_id");
  if (auto it = j.find("kind"); it != j.end() && it->is_string()) {
    d.kind = parse_item_kind(it->get<std::string>());
  }
  d.title = string_field(j, "title");
  d.description = string_field(j, "description");
  d.body = string_field(j, "body");
  d.question = optional_field(j, "question");
  d.answer = optional_field(j, "answer");
  d.url = optional_field(j, "url");
  if (auto it = j.find("product_tags"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw InputError("field 'product_tags' must be an array");
    for (const auto& t : *it) {
      if (!t.is_string()) throw InputError("product_tags entries must be strings");
      d.product_tags.insert(t.get<std::string>());
    }
  }
  return d;
}

json document_to_json(const Document& d) {
  json j;
  j["item_id"] = d.doc_id;
  j["kind"] = std::string(to_string(d.kind));
  j["title"] = d.title;
  j["description"] = d.description;
  if (!d.body.empty()) j["body"] = d.body;
  j["question"] = d.question ? json(*d.question) : json(nullptr);
  j["answer"] = d.answer ? json(*d.answer) : json(nullptr);
  j["url"] = d.url ? json(*d.url) : json(nullptr);
  j["product_tags"] = json(std::vector<std::string>(d.product_tags.begin(), d.product_tags.end()));
  return j;
}

}  // namespace ragforge
