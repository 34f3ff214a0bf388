#include "ragforge/product_intent.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::intent {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::alias_match: return "alias_match";
    case Method::fallback_default: return "fallback_default";
    case Method::manual_override: return "manual_override";
    case Method::none: return "none";
  }
  return "none";
}

std::string normalize_for_matching(std::string_view text) {
  std::string spaced;
  spaced.reserve(text.size());
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    spaced.push_back(std::isalnum(u) || u >= 0x80 ? static_cast<char>(std::tolower(u)) : ' ');
  }
  return normalize_query(spaced);
}

ProductCatalog::ProductCatalog(std::vector<Product> products) : products_(std::move(products)) {
  std::map<std::string, std::string> owner;
  for (auto& p : products_) {
    if (p.name.empty()) throw ConfigError("catalog product with empty name");
    for (auto& a : p.aliases) a = normalize_for_matching(a);
    for (auto& k : p.keywords) k = normalize_for_matching(k);
    std::string own = normalize_for_matching(p.name);
    if (std::find(p.aliases.begin(), p.aliases.end(), own) == p.aliases.end()) p.aliases.insert(p.aliases.begin(), own);
    std::erase(p.aliases, std::string{});
    std::erase(p.keywords, std::string{});
    for (const auto& a : p.aliases) {
      auto [it, inserted] = owner.emplace(a, p.name);
      if (!inserted && it->second != p.name) {
        throw ConfigError("catalog alias '" + a + "' belongs to both " + it->second + " and " + p.name);
      }
      longest_alias_ = std::max(longest_alias_, a.size());
    }
  }
}

ProductCatalog ProductCatalog::from_json(const ordered_json& j) {
  if (!j.is_object()) throw ConfigError("catalog must be a JSON object of product -> {aliases, keywords}");
  std::vector<Product> products;
  for (const auto& [name, entry] : j.items()) {
    Product p;
    p.name = name;
    try {
      if (entry.contains("aliases")) p.aliases = entry.at("aliases").get<std::vector<std::string>>();
      if (entry.contains("keywords")) p.keywords = entry.at("keywords").get<std::vector<std::string>>();
    } catch (const ordered_json::exception& e) {
      throw ConfigError("catalog entry '" + name + "': " + e.what());
    }
    products.push_back(std::move(p));
  }
  return ProductCatalog(std::move(products));
}

ProductCatalog ProductCatalog::load(const std::string& path) {
  ordered_json j = ordered_json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError("catalog " + path + " is not valid JSON");
  return from_json(j);
}

json IntentResult::to_json() const {
  json ps = json::array();
  for (const auto& p : products) ps.push_back({{"product", p.product}, {"confidence", p.confidence}});
  return json{{"method", std::string(intent::to_string(method))}, {"products", ps}};
}

namespace {

struct Hit {
  std::size_t token_begin;
  std::size_t token_count;
  std::size_t length;  // characters of the matched term
  std::size_t product;
};

std::vector<std::string> tokens_of(const std::string& normalized) {
  std::vector<std::string> out;
  for (auto t : split_whitespace(normalized)) out.emplace_back(t);
  return out;
}

// All token-aligned occurrences of the terms selected by `terms_of`, resolved
// longest-first into non-overlapping hits.
std::vector<Hit> match_terms(const std::vector<std::string>& text_tokens, const ProductCatalog& catalog,
                             bool use_keywords) {
  std::vector<Hit> hits;
  for (std::size_t pi = 0; pi < catalog.products().size(); ++pi) {
    const auto& p = catalog.products()[pi];
    for (const auto& term : use_keywords ? p.keywords : p.aliases) {
      auto tt = tokens_of(term);
      if (tt.empty() || tt.size() > text_tokens.size()) continue;
      for (std::size_t i = 0; i + tt.size() <= text_tokens.size(); ++i) {
        if (std::equal(tt.begin(), tt.end(), text_tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
          hits.push_back({i, tt.size(), term.size(), pi});
        }
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.length != b.length) return a.length > b.length;
    if (a.token_begin != b.token_begin) return a.token_begin < b.token_begin;
    return a.product < b.product;
  });
  std::vector<bool> used(text_tokens.size(), false);
  std::vector<Hit> accepted;
  for (const auto& h : hits) {
    bool free = true;
    for (std::size_t k = h.token_begin; k < h.token_begin + h.token_count; ++k) free = free && !used[k];
    if (!free) continue;
    for (std::size_t k = h.token_begin; k < h.token_begin + h.token_count; ++k) used[k] = true;
    accepted.push_back(h);
  }
  return accepted;
}

std::vector<ProductScore> score(const std::vector<Hit>& hits, const ProductCatalog& catalog) {
  struct Agg {
    double confidence = 0.0;
    std::size_t first_token = SIZE_MAX;
  };
  std::map<std::size_t, Agg> agg;
  const double denom = static_cast<double>(catalog.longest_alias());
  for (const auto& h : hits) {
    auto& a = agg[h.product];
    a.confidence = std::max(a.confidence, std::min(1.0, static_cast<double>(h.length) / denom));
    a.first_token = std::min(a.first_token, h.token_begin);
  }
  std::vector<std::pair<std::size_t, Agg>> ordered(agg.begin(), agg.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second.confidence != b.second.confidence) return a.second.confidence > b.second.confidence;
    return a.second.first_token < b.second.first_token;
  });
  std::vector<ProductScore> out;
  for (const auto& [pi, a] : ordered) out.push_back({catalog.products()[pi].name, a.confidence});
  return out;
}

}  // namespace

IntentResult detect_products(std::string_view text, const ProductCatalog& catalog) {
  auto tokens = tokens_of(normalize_for_matching(text));
  IntentResult out;
  if (auto hits = match_terms(tokens, catalog, false); !hits.empty()) {
    out.products = score(hits, catalog);
    out.method = Method::alias_match;
  } else if (auto kw = match_terms(tokens, catalog, true); !kw.empty()) {
    out.products = score(kw, catalog);
    out.method = Method::fallback_default;
  }
  return out;
}

IntentResult manual_intent(const std::vector<std::string>& products) {
  IntentResult out;
  for (const auto& p : products) {
    if (std::none_of(out.products.begin(), out.products.end(), [&](const auto& s) { return s.product == p; })) {
      out.products.push_back({p, 1.0});
    }
  }
  out.method = out.products.empty() ? Method::none : Method::manual_override;
  return out;
}

AugmentedQuery augment_query(std::string_view query, const IntentResult& intent, std::size_t max_products) {
  AugmentedQuery out;
  out.query = std::string(query);
  for (std::size_t i = 0; i < intent.products.size() && i < max_products; ++i) {
    out.product_filter.insert(intent.products[i].product);
  }
  return out;
}

}  // namespace ragforge::intent
