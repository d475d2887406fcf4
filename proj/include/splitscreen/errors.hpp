#pragma once

#include <stdexcept>
#include <string>

namespace splitscreen {

// Every library failure derives from Error. The CLI maps the category to an
// exit code (usage 2, data 3, numerical 4).
class Error : public std::runtime_error {
public:
  enum class Category { usage, data, numerical };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

private:
  Category category_;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t row = 0)
      : Error(Category::data, row ? what + " (row " + std::to_string(row) + ")" : what),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

class StructureError : public Error {
public:
  StructureError(const std::string& set_id, const std::string& what)
      : Error(Category::data, "matched set '" + set_id + "': " + what), set_id_(set_id) {}
  const std::string& set_id() const noexcept { return set_id_; }

private:
  std::string set_id_;
};

struct EmptyOutcomeError : Error {
  explicit EmptyOutcomeError(const std::string& what) : Error(Category::data, what) {}
};

struct DegenerateSplitError : Error {
  explicit DegenerateSplitError(const std::string& what) : Error(Category::usage, what) {}
};

struct SpecMismatchError : Error {
  explicit SpecMismatchError(const std::string& what) : Error(Category::usage, what) {}
};

struct UnsupportedExactError : Error {
  explicit UnsupportedExactError(const std::string& what) : Error(Category::usage, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(Category::usage, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

struct MatchingError : Error {
  explicit MatchingError(const std::string& what) : Error(Category::data, what) {}
};

}  // namespace splitscreen
