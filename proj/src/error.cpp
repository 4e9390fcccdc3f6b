#include "lowmt/error.hpp"

namespace lowmt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::encoding: return "encoding";
    case ErrorKind::size: return "size";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::model_kind: return "model_kind";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::parse: return "parse";
    case ErrorKind::degenerate_reference: return "degenerate_reference";
    case ErrorKind::search: return "search";
    case ErrorKind::range: return "range";
    case ErrorKind::validation: return "validation";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::completeness: return "completeness";
    case ErrorKind::ingestion: return "ingestion";
    case ErrorKind::startup: return "startup";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace lowmt
