#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ocpq/index.hpp"
#include "ocpq/query.hpp"

namespace ocpq {

/// Enumerate every entity of the variable's types.
struct BindFromType {
  std::string var;
  VarKind kind = VarKind::Event;
  std::set<std::string> types;

  bool operator==(const BindFromType&) const = default;
};

/// Enumerate the neighbors of the already bound `source` along `relation`,
/// keeping those of the variable's types. Consumes the E2O / O2O predicate
/// it was derived from.
struct BindFromRelation {
  std::string var;
  VarKind kind = VarKind::Event;
  std::set<std::string> types;
  Relation relation = Relation::E2O;
  Qualifier qual;
  std::string source;

  bool operator==(const BindFromRelation&) const = default;
};

/// Drop the partial binding unless the (fully bound) BASIC predicate holds.
struct Filter {
  Predicate predicate;

  bool operator==(const Filter&) const = default;
};

using BindingStep = std::variant<BindFromType, BindFromRelation, Filter>;

std::string to_string(const BindingStep& s);

/// Greedy binding order: relation expansions from bound variables first (by
/// mean adjacency length, then variable name), type scans otherwise (by
/// bucket size, then name); each BASIC predicate becomes a Filter at the
/// first step where all its variables are bound. CBS predicates in
/// delta_preds are ignored. Throws Error(UnboundVariableInPredicate).
std::vector<BindingStep> plan(const std::vector<VarDecl>& delta_vars, const std::vector<Predicate>& delta_preds,
                              const std::set<std::string>& bound, const IndexedLog& idx);

/// Binds variables in the given order (relation expansion whenever an
/// unconsumed E2O / O2O predicate connects the variable to a bound one), with
/// filters as early as possible. `order` must be a permutation of delta_vars.
std::vector<BindingStep> plan_with_order(const std::vector<VarDecl>& delta_vars,
                                         const std::vector<Predicate>& delta_preds,
                                         const std::set<std::string>& bound, const std::vector<std::string>& order);

/// All extensions of `parent` produced by `steps`, ascending. Variable names
/// resolve through `scope`.
std::vector<Binding> expand(const Binding& parent, const std::vector<BindingStep>& steps, const IndexedLog& idx,
                            const Scope& scope);

struct NodeCounts {
  std::uint64_t total_basic = 0;
  std::uint64_t satisfied = 0;
  std::uint64_t violated = 0;

  bool operator==(const NodeCounts&) const = default;
};

/// Binding table of one node, stored column-wise by row. Rows are sorted
/// lexicographically by their cells; every row satisfies the node's BASIC
/// predicates. A row whose pred CBS fails is flagged cbs_excluded (and carries
/// all-false verdicts); ancestor_excluded marks rows below such a row.
struct NodeResult {
  static constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

  std::string node_id;
  std::vector<VarCode> columns;  // ascending
  std::vector<VarKind> kinds;
  std::size_t constraint_count = 0;
  std::size_t label_count = 0;

  std::vector<Code> cells;  // rows() * columns.size()
  std::vector<std::uint32_t> parent;
  std::vector<std::uint8_t> cbs_excluded;
  std::vector<std::uint8_t> ancestor_excluded;
  std::vector<std::uint8_t> verdicts;  // rows() * constraint_count
  std::vector<std::optional<std::int64_t>> labels;  // rows() * label_count

  std::chrono::nanoseconds elapsed{};

  std::size_t rows() const { return parent.size(); }
  std::span<const Code> row(std::size_t i) const {
    return {cells.data() + i * columns.size(), columns.size()};
  }
  Binding binding(std::size_t i) const;
  std::span<const std::uint8_t> row_verdicts(std::size_t i) const {
    return {verdicts.data() + i * constraint_count, constraint_count};
  }
  std::span<const std::optional<std::int64_t>> row_labels(std::size_t i) const {
    return {labels.data() + i * label_count, label_count};
  }
  /// Not CBS-excluded and every constraint holds.
  bool satisfied(std::size_t i) const;
  /// total_basic counts every row; satisfied / violated only rows that are
  /// not themselves CBS-excluded.
  NodeCounts counts() const;

  /// Ignores elapsed.
  bool operator==(const NodeResult& o) const;
};

struct EvaluationResult {
  std::vector<NodeResult> nodes;  // in QueryTree::nodes order
  std::chrono::nanoseconds wall_time{};

  const NodeResult* find(std::string_view node_id) const;
  /// Ignores timings.
  bool operator==(const EvaluationResult& o) const { return nodes == o.nodes; }
};

struct EvaluationOptions {
  /// 0 = hardware concurrency.
  unsigned threads = 0;
  std::size_t max_rows_per_node = 10'000'000;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Throws QueryInvalidError for an invalid tree, Error(ResultTooLarge) when a
/// node exceeds max_rows_per_node, Error(Timeout) past the deadline.
EvaluationResult evaluate_tree(const QueryTree& tree, const IndexedLog& idx, const EvaluationOptions& options = {});

struct NodeEvaluation {
  std::vector<Binding> satisfied;   // full box holds
  std::vector<Binding> basic_only;  // BASIC holds, some pred CBS fails
};

/// Output of one node for one binding of its parent's variables (codes from
/// VariableTable(tree)); for the root pass the empty binding.
NodeEvaluation evaluate_node(const QueryTree& tree, std::string_view node_id, const Binding& parent,
                             const IndexedLog& idx, const EvaluationOptions& options = {});

/// Verdict per constraint of `box` for one row, with child_counts[edge label]
/// the size of the row's child set under that edge.
std::vector<bool> evaluate_constraints(const BindingBox& box, const Binding& row,
                                       const std::unordered_map<std::string, std::uint64_t>& child_counts,
                                       const IndexedLog& idx, const Scope& scope);

/// Aggregate over a child set: COUNT is child_count; duration aggregates use
/// `durations` (one per child row) and are absent for an empty child set.
/// MEAN truncates toward zero.
std::optional<std::int64_t> compute_label(LabelAgg agg, std::span<const Duration> durations,
                                          std::uint64_t child_count);

}  // namespace ocpq
