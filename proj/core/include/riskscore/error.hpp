#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace riskscore {

enum class ErrorKind {
  io,
  empty_corpus,
  malformed_record,
  invalid_input,
  degenerate_table,
  insufficient_pool,
  degenerate_training,
  undefined_metric,
  unsplittable,
  rule_compilation,
  leakage,
  config,
};

const char* to_string(ErrorKind kind);

// Base of every error thrown by the library. The kind is what the CLI maps
// to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class EmptyCorpusError : public Error {
 public:
  explicit EmptyCorpusError(const std::string& what)
      : Error(ErrorKind::empty_corpus, what) {}
};

class MalformedRecordError : public Error {
 public:
  explicit MalformedRecordError(const std::string& what)
      : Error(ErrorKind::malformed_record, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what)
      : Error(ErrorKind::invalid_input, what) {}
};

class DegenerateTableError : public Error {
 public:
  explicit DegenerateTableError(const std::string& what)
      : Error(ErrorKind::degenerate_table, what) {}
};

// Carries the shortfall per stratum key so callers can report it.
class InsufficientPoolError : public Error {
 public:
  InsufficientPoolError(const std::string& what,
                        std::map<std::string, std::size_t> deficits = {})
      : Error(ErrorKind::insufficient_pool, what),
        deficits_(std::move(deficits)) {}

  const std::map<std::string, std::size_t>& deficits() const noexcept {
    return deficits_;
  }

 private:
  std::map<std::string, std::size_t> deficits_;
};

class DegenerateTrainingError : public Error {
 public:
  explicit DegenerateTrainingError(const std::string& what)
      : Error(ErrorKind::degenerate_training, what) {}
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& what)
      : Error(ErrorKind::undefined_metric, what) {}
};

class UnsplittableError : public Error {
 public:
  explicit UnsplittableError(const std::string& what)
      : Error(ErrorKind::unsplittable, what) {}
};

class RuleCompilationError : public Error {
 public:
  RuleCompilationError(std::string rule, const std::string& what)
      : Error(ErrorKind::rule_compilation, "rule '" + rule + "': " + what),
        rule_(std::move(rule)) {}

  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string rule_;
};

class LeakageError : public Error {
 public:
  explicit LeakageError(const std::string& what)
      : Error(ErrorKind::leakage, what) {}
};

// Raised by configuration validation; field() names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(ErrorKind::config, field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace riskscore
