#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ocpq/error.hpp"
#include "ocpq/index.hpp"
#include "ocpq/oced.hpp"

namespace ocpq {

enum class VarKind : std::uint8_t { Event, Object };

std::string_view to_string(VarKind k);

using VarCode = std::uint32_t;

/// Partial assignment of variables to events / objects. Each entry packs
/// (variable, kind, entity) into one 64-bit word; entries stay sorted by word,
/// hence by variable.
class Binding {
 public:
  static constexpr std::uint64_t pack(VarCode var, VarKind kind, Code entity) {
    return (std::uint64_t{var} << 33) | (std::uint64_t{kind == VarKind::Object} << 32) | entity;
  }
  static constexpr VarCode var_of(std::uint64_t w) { return static_cast<VarCode>(w >> 33); }
  static constexpr VarKind kind_of(std::uint64_t w) { return (w >> 32) & 1 ? VarKind::Object : VarKind::Event; }
  static constexpr Code entity_of(std::uint64_t w) { return static_cast<Code>(w); }

  Binding() = default;

  /// Adds or replaces the entry for `var`.
  void set(VarCode var, VarKind kind, Code entity);
  std::optional<Code> get(VarCode var) const;
  std::optional<Code> get(VarCode var, VarKind kind) const;
  bool contains(VarCode var) const { return get(var).has_value(); }

  std::span<const std::uint64_t> words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  auto operator<=>(const Binding&) const = default;

 private:
  std::vector<std::uint64_t> words_;
};

/// parent ⊑ child: every entry of parent occurs identically in child.
bool is_child(const Binding& parent, const Binding& child);

struct E2OPred {
  std::string ev;
  std::string ob;
  Qualifier qual;

  bool operator==(const E2OPred&) const = default;
  auto operator<=>(const E2OPred&) const = default;
};

struct O2OPred {
  std::string from;
  std::string to;
  Qualifier qual;

  bool operator==(const O2OPred&) const = default;
  auto operator<=>(const O2OPred&) const = default;
};

/// min <= time(to) - time(from) <= max; nullopt bounds are infinite.
struct TBEPred {
  std::string from;
  std::string to;
  std::optional<Duration> min;
  std::optional<Duration> max;

  bool operator==(const TBEPred&) const = default;
  auto operator<=>(const TBEPred&) const = default;
};

/// min <= |child set under edge| <= max; nullopt max is unbounded.
struct CBSPred {
  std::string edge;
  std::uint64_t min = 0;
  std::optional<std::uint64_t> max;

  bool operator==(const CBSPred&) const = default;
  auto operator<=>(const CBSPred&) const = default;
};

using Predicate = std::variant<E2OPred, O2OPred, TBEPred, CBSPred>;

bool is_basic(const Predicate& p);
std::string to_string(const Predicate& p);
/// Variable names referenced by p, in argument order.
std::vector<std::string> variables_of(const Predicate& p);

struct VarDecl {
  std::string name;
  VarKind kind = VarKind::Event;
  std::set<std::string> types;

  bool operator==(const VarDecl&) const = default;
};

enum class LabelAgg : std::uint8_t { Count, MinDur, MaxDur, MeanDur };

std::string_view to_string(LabelAgg a);
std::optional<LabelAgg> parse_label_agg(std::string_view s);

/// Computed column over the child set under `edge`. Duration aggregates use
/// time(to) - time(from) of two event variables bound in the child node.
struct LabelSpec {
  std::string name;
  LabelAgg agg = LabelAgg::Count;
  std::string edge;
  std::string from;
  std::string to;

  bool operator==(const LabelSpec&) const = default;
};

struct BindingBox {
  std::vector<VarDecl> vars;
  std::vector<Predicate> predicates;
  std::vector<Predicate> constraints;
  std::vector<LabelSpec> labels;

  const VarDecl* find_var(std::string_view name) const;

  bool operator==(const BindingBox&) const = default;
};

/// a ⪯ b on the BASIC part: a's variables (with equal kinds and type sets) and
/// a's BASIC predicates all occur in b. CBS predicates, constraints and labels
/// are ignored.
bool is_refinement(const BindingBox& a, const BindingBox& b);

/// Same variables, BASIC predicates only.
BindingBox restrict_to_basic(const BindingBox& box);

struct QueryNode {
  std::string id;
  BindingBox box;

  bool operator==(const QueryNode&) const = default;
};

struct QueryEdge {
  std::string from;
  std::string to;
  std::string label;

  bool operator==(const QueryEdge&) const = default;
};

/// Rooted tree of binding boxes. Every box lists its full variable and
/// predicate sets, including those inherited from its ancestors.
struct QueryTree {
  std::vector<QueryNode> nodes;
  std::vector<QueryEdge> edges;
  std::string root;

  const QueryNode* find_node(std::string_view id) const;
  const QueryEdge* find_edge(std::string_view label) const;
  const QueryEdge* parent_edge(std::string_view node_id) const;
  std::vector<const QueryEdge*> out_edges(std::string_view node_id) const;
  /// Node ids reachable from the root, parents before children, children in edge order.
  std::vector<std::string> preorder() const;

  bool operator==(const QueryTree&) const = default;
};

/// Structural findings; empty iff the tree is well formed. Codes: EmptyTree,
/// UnknownRoot, DuplicateNodeId, UnknownEdgeEndpoint, DuplicateEdgeLabel,
/// NotATree, DuplicateVariable, EmptyTypeSet, RefinementViolation,
/// UnboundVariable, KindMismatch, InvalidBounds, UnknownEdge, InvalidLabel,
/// DuplicateLabelName.
std::vector<Finding> validate_tree(const QueryTree& t);

class QueryInvalidError : public Error {
 public:
  explicit QueryInvalidError(std::vector<Finding> findings);

  const std::vector<Finding>& findings() const noexcept { return findings_; }

 private:
  std::vector<Finding> findings_;
};

/// Variable codes of a validated tree. Nodes are visited in preorder; each
/// variable a node declares beyond its parent's gets the next fresh code, so
/// ancestors' variables always have smaller codes than a node's own.
class VariableTable {
 public:
  struct Entry {
    std::string name;
    VarKind kind;
    std::string node;  // declaring node
  };

  explicit VariableTable(const QueryTree& t);

  std::size_t size() const { return entries_.size(); }
  const Entry& operator[](VarCode c) const { return entries_[c]; }
  /// Code of `name` as seen from node `node_id`.
  std::optional<VarCode> find(std::string_view node_id, std::string_view name) const;
  /// All variable codes visible in a node, ascending.
  const std::vector<VarCode>& columns(std::string_view node_id) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::unordered_map<std::string, VarCode>> scopes_;
  std::unordered_map<std::string, std::vector<VarCode>> columns_;
};

/// Variable name -> (code, kind) as seen from one node.
struct Scope {
  const VariableTable* table = nullptr;
  std::string node;

  std::optional<VarCode> code(std::string_view name) const { return table->find(node, name); }
};

/// Literal check of one BASIC predicate. Unbound variables, unknown
/// qualifiers and CBS predicates yield false.
bool satisfies_basic(const Binding& b, const Predicate& p, const IndexedLog& idx, const Scope& scope);

/// "{o1↦o_3, e1↦e_3}" with entity ids resolved through idx.
std::string to_string(const Binding& b, const VariableTable& vars, const IndexedLog& idx);

}  // namespace ocpq
