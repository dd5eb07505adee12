#pragma once

#include <stdexcept>
#include <string>

namespace visaw {

// Broad failure categories; the message carries the specifics.
enum class ErrorKind {
  Dimension,    // shape/arity mismatch
  Numeric,      // non-finite values, zero-norm normalization
  Contract,     // precondition violated (empty input, non-scalar loss, ...)
  Config,       // invalid configuration value
  Vocab,        // token id outside the vocabulary
  Ingestion,    // duplicate/missing ids while building data structures
  Parse,        // malformed file content
  Referential,  // dangling id reference between corpus files
  Integrity,    // checkpoint payload does not match its manifest
  Version,      // unsupported format version
  Evaluation,   // metric cannot be computed (missing gold id, ...)
  Io,           // file not readable/writable
  Usage,        // bad command line
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace visaw
