#include "jeanie/error.hpp"

namespace jeanie {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Config: return "config";
    case ErrorKind::Layout: return "layout";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::SequenceTooShort: return "sequence-too-short";
    case ErrorKind::Encoder: return "encoder";
    case ErrorKind::Ambiguity: return "ambiguity";
    case ErrorKind::OracleScope: return "oracle-scope";
    case ErrorKind::Normalization: return "normalization";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Training: return "training";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::CheckpointMismatch: return "checkpoint-mismatch";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + " error: " + message);
}

}  // namespace jeanie
