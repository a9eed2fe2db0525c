#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbt {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown format tag, unknown template, missing key.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A malformed input record. Carries the record index and the offending field path.
class RecordError : public Error {
public:
  RecordError(std::size_t index, std::string field_path, const std::string& what)
      : Error("record " + std::to_string(index) + ", field '" + field_path + "': " + what),
        index_(index),
        field_path_(std::move(field_path)) {}

  std::size_t index() const noexcept { return index_; }
  const std::string& field_path() const noexcept { return field_path_; }

private:
  std::size_t index_;
  std::string field_path_;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class TemplateError : public Error {
public:
  TemplateError(std::string placeholder, const std::string& what)
      : Error(what), placeholder_(std::move(placeholder)) {}

  const std::string& placeholder() const noexcept { return placeholder_; }

private:
  std::string placeholder_;
};

/// Raised by the gateway. `attempts` holds one line per attempt made.
class TransportError : public Error {
public:
  TransportError(const std::string& what, int status, bool retryable,
                 std::vector<std::string> attempts = {})
      : Error(what), status_(status), retryable_(retryable), attempts_(std::move(attempts)) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }
  const std::vector<std::string>& attempts() const noexcept { return attempts_; }

private:
  int status_;
  bool retryable_;
  std::vector<std::string> attempts_;
};

class MissingFixtureError : public Error {
public:
  MissingFixtureError(std::string digest, std::vector<std::string> nearest);

  const std::string& digest() const noexcept { return digest_; }
  const std::vector<std::string>& nearest() const noexcept { return nearest_; }

private:
  std::string digest_;
  std::vector<std::string> nearest_;
};

/// A judge reply that stayed unparseable after the re-ask. Keeps the last reply.
class JudgeParseError : public Error {
public:
  JudgeParseError(const std::string& what, std::string reply = {})
      : Error(what), reply_(std::move(reply)) {}

  const std::string& reply() const noexcept { return reply_; }

private:
  std::string reply_;
};

class ConstructionError : public Error {
public:
  using Error::Error;
};

/// Wraps a per-example failure; the original exception is nested inside.
class ExampleError : public Error {
public:
  ExampleError(std::string example_id, const std::string& what)
      : Error("example " + example_id + ": " + what), example_id_(std::move(example_id)) {}

  const std::string& example_id() const noexcept { return example_id_; }

private:
  std::string example_id_;
};

}  // namespace mbt
