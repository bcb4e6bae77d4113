#pragma once

#include <stdexcept>
#include <string>

namespace mira {

/// Coarse error classes; each maps to one CLI exit code.
enum class ErrorClass {
  kConfiguration,  // exit 2
  kData,           // exit 3
  kAborted,        // exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

// Data errors.
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorClass::kData, "format error: " + w) {}
};
struct CorruptFileError : Error {
  explicit CorruptFileError(const std::string& w) : Error(ErrorClass::kData, "corrupt file: " + w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorClass::kData, "I/O error: " + w) {}
};
struct EmptyInputError : Error {
  explicit EmptyInputError(const std::string& w) : Error(ErrorClass::kData, "empty input: " + w) {}
};
struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& w)
      : Error(ErrorClass::kData, "degenerate input: " + w) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorClass::kData, "dimension error: " + w) {}
};
struct MissingEntryError : Error {
  explicit MissingEntryError(const std::string& w) : Error(ErrorClass::kData, "missing entry: " + w) {}
};
struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& w)
      : Error(ErrorClass::kData, "insufficient data: " + w) {}
};
struct InvalidInputError : Error {
  explicit InvalidInputError(const std::string& w) : Error(ErrorClass::kData, "invalid input: " + w) {}
};
struct InvalidProportionError : Error {
  explicit InvalidProportionError(const std::string& w)
      : Error(ErrorClass::kData, "invalid proportion: " + w) {}
};
struct RateError : Error {
  explicit RateError(const std::string& w) : Error(ErrorClass::kData, "sample rate mismatch: " + w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorClass::kConfiguration, "configuration error: " + w) {}
};

struct AbortedRunError : Error {
  explicit AbortedRunError(const std::string& w) : Error(ErrorClass::kAborted, "aborted run: " + w) {}
};

inline int exit_code_for(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::kConfiguration: return 2;
    case ErrorClass::kData: return 3;
    case ErrorClass::kAborted: return 4;
  }
  return 1;
}

}  // namespace mira
