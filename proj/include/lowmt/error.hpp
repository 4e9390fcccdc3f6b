#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lowmt {

enum class ErrorKind {
  alignment,
  encoding,
  size,
  empty_input,
  configuration,
  model_kind,
  coverage,
  parse,
  degenerate_reference,
  search,
  range,
  validation,
  conflict,
  completeness,
  ingestion,
  startup,
  not_found,
  io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the toolkit carries a kind so the CLI and the HTTP
// layer can render it as a single machine-parsable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// A validation failure that names the offending request field.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(ErrorKind::validation, message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace lowmt
