#pragma once

#include <set>
#include <string>
#include <vector>

#include "ragforge/jsonl.hpp"

namespace ragforge::intent {

struct Product {
  std::string name;
  std::vector<std::string> aliases;   // normalized; always includes the name
  std::vector<std::string> keywords;  // normalized fallback terms
};

// Immutable after construction; detection is safe to call concurrently.
class ProductCatalog {
 public:
  ProductCatalog() = default;
  // Throws ConfigError when an alias maps to two products.
  explicit ProductCatalog(std::vector<Product> products);

  // {"Adobe Acrobat": {"aliases": [...], "keywords": [...]}, ...}
  static ProductCatalog from_json(const ordered_json& j);
  static ProductCatalog load(const std::string& path);

  const std::vector<Product>& products() const { return products_; }
  std::size_t longest_alias() const { return longest_alias_; }

 private:
  std::vector<Product> products_;
  std::size_t longest_alias_ = 1;
};

enum class Method { alias_match, fallback_default, manual_override, none };
std::string_view to_string(Method m);

struct ProductScore {
  std::string product;
  double confidence = 0.0;  // (0, 1]
  friend bool operator==(const ProductScore&, const ProductScore&) = default;
};

struct IntentResult {
  std::vector<ProductScore> products;  // confidence non-increasing
  Method method = Method::none;

  json to_json() const;
};

// Lowercase; punctuation to spaces; whitespace collapsed.
std::string normalize_for_matching(std::string_view text);

// Token-aligned matching, longest alias first; a shorter alias inside an
// accepted longer match is not reported. With no alias hit, keyword rules
// apply. Confidence = matched term length / longest catalog term.
IntentResult detect_products(std::string_view text, const ProductCatalog& catalog);

// An explicit product list chosen by the caller, confidence 1 each.
IntentResult manual_intent(const std::vector<std::string>& products);

struct AugmentedQuery {
  std::string query;                   // byte-identical to the input
  std::set<std::string> product_filter;  // top products by confidence
};

AugmentedQuery augment_query(std::string_view query, const IntentResult& intent, std::size_t max_products = 2);

}  // namespace ragforge::intent
