#include "riskscore/error.hpp"

namespace riskscore {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::empty_corpus: return "empty-corpus";
    case ErrorKind::malformed_record: return "malformed-record";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::degenerate_table: return "degenerate-table";
    case ErrorKind::insufficient_pool: return "insufficient-pool";
    case ErrorKind::degenerate_training: return "degenerate-training";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::unsplittable: return "unsplittable";
    case ErrorKind::rule_compilation: return "rule-compilation";
    case ErrorKind::leakage: return "leakage";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

}  // namespace riskscore
