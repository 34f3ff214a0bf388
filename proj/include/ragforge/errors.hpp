#pragma once

#include <stdexcept>
#include <string>

namespace ragforge {

// Root of every domain failure. The CLI maps these to exit code 1; ConfigError
// is the one exception that maps to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RAGFORGE_DEFINE_ERROR(Name)        \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

RAGFORGE_DEFINE_ERROR(IoError);
RAGFORGE_DEFINE_ERROR(EmptyInputError);
RAGFORGE_DEFINE_ERROR(InputError);
RAGFORGE_DEFINE_ERROR(FormatError);
RAGFORGE_DEFINE_ERROR(BuildError);
RAGFORGE_DEFINE_ERROR(QueryError);
RAGFORGE_DEFINE_ERROR(TrainingError);
RAGFORGE_DEFINE_ERROR(SanitizationError);
RAGFORGE_DEFINE_ERROR(RecordError);
RAGFORGE_DEFINE_ERROR(TransportError);
RAGFORGE_DEFINE_ERROR(ParseError);
RAGFORGE_DEFINE_ERROR(EvaluationError);
RAGFORGE_DEFINE_ERROR(JudgeError);
RAGFORGE_DEFINE_ERROR(ConfigError);

#undef RAGFORGE_DEFINE_ERROR

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t pair_index)
      : Error(what), pair_index_(pair_index) {}
  std::size_t pair_index() const noexcept { return pair_index_; }

 private:
  std::size_t pair_index_;
};

class FixtureMissError : public Error {
 public:
  explicit FixtureMissError(std::string prompt_hash)
      : Error("no scripted fixture for prompt hash " + prompt_hash),
        prompt_hash_(std::move(prompt_hash)) {}
  const std::string& prompt_hash() const noexcept { return prompt_hash_; }

 private:
  std::string prompt_hash_;
};

}  // namespace ragforge
