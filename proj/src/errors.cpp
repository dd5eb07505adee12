#include "visaw/errors.hpp"

namespace visaw {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Config: return "config";
    case ErrorKind::Vocab: return "vocab";
    case ErrorKind::Ingestion: return "ingestion";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Referential: return "referential";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Version: return "version";
    case ErrorKind::Evaluation: return "evaluation";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

}  // namespace visaw
