#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ocpq/engine.hpp"
#include "ocpq/index.hpp"
#include "ocpq/query.hpp"

namespace ocpq {

struct CsvOptions {
  /// Also emit CBS-excluded rows and rows below them, with a cbs_excluded column.
  bool include_basic_only = false;
  bool include_labels = true;
};

/// RFC 4180 table of one node: variables in declaration order, then labels,
/// then "satisfied" when the node has constraints, then "cbs_excluded" when
/// requested. Entity ids are the original strings; duration labels are
/// integer milliseconds. Throws Error(UnknownNode).
std::string export_csv(const EvaluationResult& result, const QueryTree& tree, const IndexedLog& idx,
                       std::string_view node_id, const CsvOptions& options = {});

/// Indices of the rows export_csv writes, in order.
std::vector<std::size_t> visible_rows(const NodeResult& node, bool include_basic_only);

struct NodeSummary {
  std::string node_id;
  std::uint64_t total_basic = 0;
  std::uint64_t satisfied = 0;
  std::uint64_t violated = 0;
  /// violated / (satisfied + violated) * 100, or 0 when nothing carries a verdict.
  double violation_percent = 0;
};

std::vector<NodeSummary> summarize(const EvaluationResult& result);

/// Two decimals, e.g. "50.00".
std::string format_percent(double percent);

/// [{"node", "totalBasic", "satisfied", "violated", "violationPercent"}] with
/// the percentage rounded to two decimals.
std::string summary_json(const std::vector<NodeSummary>& summary);

}  // namespace ocpq
