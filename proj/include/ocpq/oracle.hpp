#pragma once

#include <cstdint>

#include "ocpq/engine.hpp"
#include "ocpq/oced.hpp"
#include "ocpq/query.hpp"

namespace ocpq {

struct OracleOptions {
  /// Upper bound on candidate assignments visited before giving up.
  std::uint64_t max_work = 10'000'000;
};

/// Reference evaluator working directly on the Oced: for every node and
/// parent binding, tries each type-correct value for each new variable and
/// checks predicates against the raw E2O / O2O references and time_of. Same
/// result layout as evaluate_tree (entity codes are Oced positions).
/// Single-threaded.
/// Throws Error(TooLargeForOracle) once max_work is exceeded.
EvaluationResult brute_force_evaluate(const QueryTree& tree, const Oced& log, const OracleOptions& options = {});

}  // namespace ocpq
