#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ragforge {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// Trim, lowercase, collapse internal whitespace runs to a single space.
std::string normalize_query(std::string_view s);

std::vector<std::string_view> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);

// Title and description joined by a single space; either may be empty.
std::string join_title_description(std::string_view title, std::string_view description);

std::size_t count_whitespace_tokens(std::string_view s);

// Decodes UTF-8 into code points; invalid bytes map to U+FFFD one byte at a time.
std::u32string utf8_decode(std::string_view s);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

// 16 lowercase hex digits of the FNV-1a hash; used to key LLM prompts.
std::string prompt_hash(std::string_view prompt);

// Replaces every "{name}" placeholder in one pass; inserted text is not rescanned.
// Unknown placeholders are left verbatim.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

// Deterministic per-index seed derivation so parallel work keeps a fixed stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Uniform integer in [0, n) from a 64-bit Mersenne twister. Rejection sampling
// keeps results identical across standard library implementations.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

// Portable Fisher-Yates on top of uniform_index.
template <typename T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Portable standard normal via Box-Muller.
double standard_normal(std::mt19937_64& rng);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace ragforge
