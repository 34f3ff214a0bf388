#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ragforge/jsonl.hpp"

namespace ragforge::sanitize {

enum class Category { person, email, phone, signature };
std::string_view to_string(Category c);
std::string_view placeholder(Category c);

struct Redaction {
  std::size_t start = 0;  // byte offsets into the input text
  std::size_t end = 0;
  Category category = Category::email;
  std::string replacement;

  friend bool operator==(const Redaction&, const Redaction&) = default;
};

struct ScrubResult {
  std::string text;
  std::vector<Redaction> redactions;  // sorted, non-overlapping
};

struct SanitizerConfig {
  // Salutation lines that open a signature block when followed by a short name line.
  std::vector<std::string> signature_openers = {"Regards,", "Thanks,", "Best,"};
  std::size_t max_name_words = 4;
  std::size_t max_name_chars = 40;
};

// Raw detectors; exposed so callers can verify outputs are clean.
std::vector<std::pair<std::size_t, std::size_t>> find_emails(std::string_view text);
// Phone candidates are runs of digit groups with optional +country code and
// parenthesized area code, kept when they hold 9 to 15 digits.
std::vector<std::pair<std::size_t, std::size_t>> find_phones(std::string_view text);
std::vector<std::pair<std::size_t, std::size_t>> find_signatures(std::string_view text,
                                                                 const SanitizerConfig& cfg = {});

// Signatures, emails and phones replaced by [SIGNATURE], [EMAIL], [PHONE].
ScrubResult regex_scrub(std::string_view text, const SanitizerConfig& cfg = {});

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;
};

class NerProvider {
 public:
  virtual ~NerProvider() = default;
  virtual std::string name() const = 0;
  virtual std::vector<EntitySpan> detect(std::string_view text) const = 0;
};

// Whole-word, case-sensitive lookup of known person names.
class DictionaryNerProvider : public NerProvider {
 public:
  explicit DictionaryNerProvider(std::set<std::string> names) : names_(std::move(names)) {}
  std::string name() const override { return "dictionary"; }
  std::vector<EntitySpan> detect(std::string_view text) const override;

 private:
  std::set<std::string> names_;
};

// PERSON spans merged where they overlap, then replaced by [PERSON]. Provider
// failures and out-of-range spans raise SanitizationError; nothing is returned
// partially scrubbed.
ScrubResult ner_scrub(std::string_view text, const NerProvider& provider);

// Regex layer, then NER layer.
std::string sanitize_text(std::string_view text, const NerProvider& provider, const SanitizerConfig& cfg = {},
                          std::map<Category, std::size_t>* counts = nullptr);

struct Report {
  std::map<Category, std::size_t> counts;
  std::size_t processed = 0;
  std::size_t skipped = 0;

  void merge(const Report& other);
  json to_json() const;
};

// Sanitizes the listed string fields in place; other fields are untouched.
// Throws RecordError naming a missing or non-string field.
ordered_json sanitize_record(const ordered_json& record, const std::vector<std::string>& fields,
                             const NerProvider& provider, Report& report, const SanitizerConfig& cfg = {});

}  // namespace ragforge::sanitize
