#include "ragforge/vector_index.hpp"

#include <algorithm>
#include <cmath>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::index {

std::string IndexItem::document_text() const {
  if (kind == ItemKind::helpx_doc || !answer || answer->empty()) return match_text;
  return question_text() + "\n" + *answer;
}

Index::Index(std::vector<IndexItem> items, std::size_t dim, std::uint32_t projection_version, std::int64_t built_at)
    : items_(std::move(items)), dim_(dim), projection_version_(projection_version), built_at_(built_at) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].embedding.dim() != dim_) {
      throw BuildError("item " + items_[i].item_id + " has embedding dim " +
                       std::to_string(items_[i].embedding.dim()) + ", expected " + std::to_string(dim_));
    }
    if (!by_id_.emplace(items_[i].item_id, i).second) throw BuildError("duplicate item_id: " + items_[i].item_id);
  }
}

const IndexItem* Index::find(const std::string& item_id) const {
  auto it = by_id_.find(item_id);
  return it == by_id_.end() ? nullptr : &items_[it->second];
}

std::map<ItemKind, std::size_t> Index::kind_counts() const {
  std::map<ItemKind, std::size_t> out;
  for (const auto& it : items_) ++out[it.kind];
  return out;
}

Index build(const std::vector<Document>& records, const embed::Projection& proj, const embed::FeatureConfig& fcfg,
            std::int64_t built_at) {
  if (records.empty()) throw BuildError("no source records to index");
  if (proj.dim() != fcfg.dim) throw BuildError("projection dim does not match features.dim");
  std::set<std::string> seen;
  std::vector<IndexItem> items;
  items.reserve(records.size());
  for (const auto& r : records) {
    if (!seen.insert(r.doc_id).second) throw BuildError("duplicate item_id: " + r.doc_id);
    IndexItem it;
    it.item_id = r.doc_id;
    it.kind = r.kind;
    it.url = r.url;
    it.product_tags = r.product_tags;
    if (r.kind == ItemKind::helpx_doc) {
      it.match_text = join_title_description(r.title, r.description);
      if (!trim(r.title).empty()) it.question = std::string(trim(r.title));
      if (!trim(r.description).empty()) it.answer = std::string(trim(r.description));
    } else {
      if (is_generated(r.kind) && (!r.question || trim(*r.question).empty() || !r.answer || trim(*r.answer).empty())) {
        throw BuildError("generated item " + r.doc_id + " needs both question and answer");
      }
      std::string q = r.question ? std::string(trim(*r.question)) : std::string(trim(r.title));
      it.match_text = q;
      if (!q.empty()) it.question = q;
      if (r.answer && !trim(*r.answer).empty()) {
        it.answer = std::string(trim(*r.answer));
      } else if (!trim(r.description).empty()) {
        it.answer = std::string(trim(r.description));
      }
    }
    if (it.match_text.empty()) throw BuildError("item " + r.doc_id + " has empty match text");
    it.embedding = embed::embed(it.match_text, proj, fcfg);
    items.push_back(std::move(it));
  }
  return Index(std::move(items), fcfg.dim, proj.version(), built_at);
}

std::vector<RetrievedItem> search(const Index& index, const embed::Embedding& query, std::size_t k,
                                  const std::set<std::string>& product_filter) {
  if (query.dim() != index.dim()) {
    throw QueryError("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                     std::to_string(index.dim()));
  }
  struct Candidate {
    bool preferred;
    double score;
    std::size_t pos;
  };
  const auto& items = index.items();
  std::vector<Candidate> cands;
  cands.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    bool preferred = false;
    if (!product_filter.empty()) {
      for (const auto& tag : items[i].product_tags) {
        if (product_filter.contains(tag)) {
          preferred = true;
          break;
        }
      }
    }
    cands.push_back({preferred, embed::cosine(query.values, items[i].embedding.values), i});
  }
  auto better = [&](const Candidate& a, const Candidate& b) {
    if (a.preferred != b.preferred) return a.preferred;
    if (a.score != b.score) return a.score > b.score;
    return items[a.pos].item_id < items[b.pos].item_id;
  };
  const std::size_t take = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), better);

  std::vector<RetrievedItem> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    out.push_back({items[cands[r].pos], cands[r].score, r + 1});
  }
  return out;
}

namespace {

void put_optional(BinaryWriter& w, const std::optional<std::string>& s) {
  w.put_u8(s ? 1 : 0);
  if (s) w.put_string(*s);
}

std::optional<std::string> get_optional(BinaryReader& r) {
  std::uint8_t flag = r.get_u8();
  if (flag > 1) throw FormatError("bad optional flag in item payload");
  if (!flag) return std::nullopt;
  return r.get_string();
}

}  // namespace

std::string encode_index(const Index& index) {
  BinaryWriter w;
  w.put_bytes("RFIX");
  w.put_u32(kIndexFormatVersion);
  w.put_u32(static_cast<std::uint32_t>(index.dim()));
  w.put_u32(static_cast<std::uint32_t>(index.size()));
  w.put_u32(index.projection_version());
  w.put_i64(index.built_at());
  for (const auto& it : index.items()) {
    BinaryWriter p;
    p.put_string(it.item_id);
    p.put_u8(static_cast<std::uint8_t>(it.kind));
    p.put_string(it.match_text);
    put_optional(p, it.question);
    put_optional(p, it.answer);
    put_optional(p, it.url);
    p.put_u32(static_cast<std::uint32_t>(it.product_tags.size()));
    for (const auto& t : it.product_tags) p.put_string(t);
    w.put_string(p.bytes());
    for (float f : it.embedding.values) w.put_f32(f);
  }
  w.put_crc();
  return w.bytes();
}

Index decode_index(std::string_view bytes) {
  BinaryReader r(verify_framed(bytes, "RFIX"));
  r.get_bytes(4);
  std::uint32_t version = r.get_u32();
  if (version != kIndexFormatVersion) {
    throw FormatError("unsupported index format version " + std::to_string(version));
  }
  std::uint32_t dim = r.get_u32();
  std::uint32_t count = r.get_u32();
  std::uint32_t proj_version = r.get_u32();
  std::int64_t built_at = r.get_i64();
  if (dim == 0) throw FormatError("index dim is zero");
  std::vector<IndexItem> items;
  items.reserve(std::min<std::size_t>(count, r.remaining() / 4));
  for (std::uint32_t n = 0; n < count; ++n) {
    std::string payload = r.get_string();
    BinaryReader p(payload);
    IndexItem it;
    it.item_id = p.get_string();
    std::uint8_t kind = p.get_u8();
    if (kind > static_cast<std::uint8_t>(ItemKind::generated_video_qa)) throw FormatError("bad item kind");
    it.kind = static_cast<ItemKind>(kind);
    it.match_text = p.get_string();
    it.question = get_optional(p);
    it.answer = get_optional(p);
    it.url = get_optional(p);
    std::uint32_t ntags = p.get_u32();
    for (std::uint32_t t = 0; t < ntags; ++t) it.product_tags.insert(p.get_string());
    if (p.remaining() != 0) throw FormatError("trailing bytes in item payload");
    it.embedding.values.resize(dim);
    for (float& f : it.embedding.values) f = r.get_f32();
    items.push_back(std::move(it));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last item");
  try {
    return Index(std::move(items), dim, proj_version, built_at);
  } catch (const BuildError& e) {
    throw FormatError(std::string("inconsistent index file: ") + e.what());
  }
}

void save(const Index& index, const std::string& path) { write_file(path, encode_index(index)); }

Index load(const std::string& path) { return decode_index(read_file(path)); }

}  // namespace ragforge::index
