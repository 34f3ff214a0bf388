#include "ragforge/sanitizer.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::sanitize {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::person: return "person";
    case Category::email: return "email";
    case Category::phone: return "phone";
    case Category::signature: return "signature";
  }
  return "unknown";
}

std::string_view placeholder(Category c) {
  switch (c) {
    case Category::person: return "[PERSON]";
    case Category::email: return "[EMAIL]";
    case Category::phone: return "[PHONE]";
    case Category::signature: return "[SIGNATURE]";
  }
  return "[REDACTED]";
}

namespace {

using Span = std::pair<std::size_t, std::size_t>;

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

const std::regex& email_regex() {
  static const std::regex re(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,})");
  return re;
}

const std::regex& phone_regex() {
  static const std::regex re(R"((?:\+\d{1,3}[ .-]?)?(?:\(\d{1,4}\)[ .-]?)?\d+(?:[ .-]\d+)*)");
  return re;
}

std::vector<Span> regex_spans(std::string_view text, const std::regex& re) {
  std::vector<Span> out;
  auto begin = std::cregex_iterator(text.data(), text.data() + text.size(), re);
  for (auto it = begin; it != std::cregex_iterator(); ++it) {
    auto pos = static_cast<std::size_t>(it->position(0));
    out.emplace_back(pos, pos + static_cast<std::size_t>(it->length(0)));
  }
  return out;
}

}  // namespace

std::vector<Span> find_emails(std::string_view text) { return regex_spans(text, email_regex()); }

std::vector<Span> find_phones(std::string_view text) {
  std::vector<Span> out;
  for (auto [b, e] : regex_spans(text, phone_regex())) {
    if (b > 0 && (is_word_char(text[b - 1]) || text[b - 1] == '@' || text[b - 1] == '.')) continue;
    if (e < text.size() && (is_word_char(text[e]) || text[e] == '@')) continue;
    auto digits = std::count_if(text.begin() + static_cast<std::ptrdiff_t>(b),
                                text.begin() + static_cast<std::ptrdiff_t>(e),
                                [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (digits >= 9 && digits <= 15) out.emplace_back(b, e);
  }
  return out;
}

std::vector<Span> find_signatures(std::string_view text, const SanitizerConfig& cfg) {
  struct Line {
    std::size_t begin, end;  // trimmed content bounds
  };
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t stop = nl == std::string_view::npos ? text.size() : nl;
    std::size_t b = pos, e = stop;
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    lines.push_back({b, e});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }

  std::vector<Span> out;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    std::string_view opener = text.substr(lines[i].begin, lines[i].end - lines[i].begin);
    bool is_opener = std::any_of(cfg.signature_openers.begin(), cfg.signature_openers.end(),
                                 [&](const std::string& o) { return opener == o; });
    if (!is_opener) continue;
    const Line& name = lines[i + 1];
    std::string_view name_text = text.substr(name.begin, name.end - name.begin);
    if (name_text.empty() || name_text.size() > cfg.max_name_chars) continue;
    if (count_whitespace_tokens(name_text) > cfg.max_name_words) continue;
    out.emplace_back(lines[i].begin, name.end);
    ++i;
  }
  return out;
}

namespace {

ScrubResult apply_spans(std::string_view text, std::vector<Redaction> accepted) {
  std::sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  ScrubResult out;
  std::size_t cursor = 0;
  for (const auto& r : accepted) {
    out.text.append(text.substr(cursor, r.start - cursor));
    out.text.append(r.replacement);
    cursor = r.end;
  }
  out.text.append(text.substr(cursor));
  out.redactions = std::move(accepted);
  return out;
}

}  // namespace

ScrubResult regex_scrub(std::string_view text, const SanitizerConfig& cfg) {
  std::vector<Redaction> accepted;
  auto overlaps = [&](std::size_t b, std::size_t e) {
    return std::any_of(accepted.begin(), accepted.end(), [&](const Redaction& r) { return b < r.end && r.start < e; });
  };
  auto take = [&](const std::vector<Span>& spans, Category cat) {
    for (auto [b, e] : spans) {
      if (b < e && !overlaps(b, e)) accepted.push_back({b, e, cat, std::string(placeholder(cat))});
    }
  };
  // Priority: a signature block swallows any email or phone inside it.
  take(find_signatures(text, cfg), Category::signature);
  take(find_emails(text), Category::email);
  take(find_phones(text), Category::phone);
  return apply_spans(text, std::move(accepted));
}

std::vector<EntitySpan> DictionaryNerProvider::detect(std::string_view text) const {
  std::vector<EntitySpan> out;
  for (const auto& name : names_) {
    if (name.empty()) continue;
    std::size_t pos = 0;
    while ((pos = text.find(name, pos)) != std::string_view::npos) {
      std::size_t end = pos + name.size();
      bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
      bool right_ok = end == text.size() || !is_word_char(text[end]);
      if (left_ok && right_ok) out.push_back({pos, end, "PERSON"});
      ++pos;
    }
  }
  return out;
}

ScrubResult ner_scrub(std::string_view text, const NerProvider& provider) {
  std::vector<EntitySpan> spans;
  try {
    spans = provider.detect(text);
  } catch (const std::exception& e) {
    throw SanitizationError("NER provider '" + provider.name() + "' failed: " + e.what());
  }
  std::vector<std::pair<std::size_t, std::size_t>> persons;
  for (const auto& s : spans) {
    if (s.label != "PERSON") continue;
    if (s.start >= s.end || s.end > text.size()) {
      throw SanitizationError("NER provider '" + provider.name() + "' returned an out-of-range span");
    }
    persons.emplace_back(s.start, s.end);
  }
  std::sort(persons.begin(), persons.end());
  std::vector<Redaction> merged;
  for (auto [b, e] : persons) {
    if (!merged.empty() && b < merged.back().end) {
      merged.back().end = std::max(merged.back().end, e);
    } else {
      merged.push_back({b, e, Category::person, std::string(placeholder(Category::person))});
    }
  }
  return apply_spans(text, std::move(merged));
}

std::string sanitize_text(std::string_view text, const NerProvider& provider, const SanitizerConfig& cfg,
                          std::map<Category, std::size_t>* counts) {
  // Iterate to a fixed point: a name removed by the NER layer can shorten a
  // line enough to become a signature, and sanitizing must be idempotent.
  std::string current(text);
  for (int pass = 0; pass < 4; ++pass) {
    auto regex = regex_scrub(current, cfg);
    auto ner = ner_scrub(regex.text, provider);
    if (counts) {
      for (const auto& r : regex.redactions) ++(*counts)[r.category];
      for (const auto& r : ner.redactions) ++(*counts)[r.category];
    }
    if (regex.redactions.empty() && ner.redactions.empty()) break;
    current = std::move(ner.text);
  }
  return current;
}

void Report::merge(const Report& other) {
  for (const auto& [c, n] : other.counts) counts[c] += n;
  processed += other.processed;
  skipped += other.skipped;
}

json Report::to_json() const {
  json c = json::object();
  for (auto cat : {Category::person, Category::email, Category::phone, Category::signature}) {
    auto it = counts.find(cat);
    c[std::string(to_string(cat))] = it == counts.end() ? 0 : it->second;
  }
  return json{{"counts", c}, {"processed", processed}, {"skipped", skipped}};
}

ordered_json sanitize_record(const ordered_json& record, const std::vector<std::string>& fields,
                             const NerProvider& provider, Report& report, const SanitizerConfig& cfg) {
  ordered_json out = record;
  std::map<Category, std::size_t> counts;
  for (const auto& field : fields) {
    auto it = out.find(field);
    if (it == out.end()) throw RecordError("record is missing field '" + field + "'");
    if (!it->is_string()) throw RecordError("field '" + field + "' is not a string");
    *it = sanitize_text(it->get<std::string>(), provider, cfg, &counts);
  }
  for (const auto& [c, n] : counts) report.counts[c] += n;
  ++report.processed;
  return out;
}

}  // namespace ragforge::sanitize
