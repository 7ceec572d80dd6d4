#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ocpq/oced.hpp"

namespace ocpq {

using Code = std::uint32_t;

/// Dense string <-> code table; codes are assigned in first-seen order from 0.
class Interner {
 public:
  Interner() = default;
  Interner(const Interner& other);
  Interner& operator=(const Interner& other);
  Interner(Interner&&) noexcept = default;
  Interner& operator=(Interner&&) noexcept = default;

  Code intern(std::string_view s);
  std::optional<Code> find(std::string_view s) const;
  const std::string& name(Code c) const { return names_[c]; }
  std::size_t size() const { return names_.size(); }

 private:
  std::deque<std::string> names_;  // stable addresses back the string_view keys
  std::unordered_map<std::string_view, Code> codes_;
};

enum class Relation : std::uint8_t { E2O, E2O_REV, O2O, O2O_REV };

std::string_view to_string(Relation r);

struct Adjacent {
  Code neighbor;
  Code qualifier;

  bool operator==(const Adjacent&) const = default;
};

/// Compressed adjacency: the neighbors of `from` are entries[offsets[from], offsets[from + 1]),
/// sorted by neighbor then qualifier, without repeated (neighbor, qualifier) pairs.
struct Csr {
  std::vector<std::uint32_t> offsets;
  std::vector<Adjacent> entries;

  std::span<const Adjacent> of(Code from) const {
    return {entries.data() + offsets[from], entries.data() + offsets[from + 1]};
  }
};

/// Read-only interned view of an Oced. Event and object codes are the
/// positions in Oced::events() / Oced::objects().
struct IndexedLog {
  Interner event_ids;
  Interner object_ids;
  Interner event_types;
  Interner object_types;
  Interner qualifiers;
  Interner attribute_names;

  std::vector<Code> event_type_of;
  std::vector<Code> object_type_of;
  std::vector<Timestamp> times;

  /// Per event type, event codes sorted by (time, code).
  std::vector<std::vector<Code>> events_by_type;
  /// Per object type, object codes ascending.
  std::vector<std::vector<Code>> objects_by_type;

  Csr e2o;
  Csr e2o_rev;
  Csr o2o;
  Csr o2o_rev;

  std::size_t num_events() const { return times.size(); }
  std::size_t num_objects() const { return object_type_of.size(); }

  const Csr& adjacency(Relation r) const;
  /// Number of valid source codes for r.
  std::size_t domain_size(Relation r) const;
};

/// Throws Error(DanglingRef) when a relationship names an unknown object.
IndexedLog build_index(const Oced& log);

/// Distinct neighbor codes of `from`, ascending, restricted to `qualifier`
/// (std::nullopt = any qualifier). Throws Error(UnknownRef) for an invalid code.
std::vector<Code> related(const IndexedLog& idx, Code from, Relation r, std::optional<Code> qualifier);

bool is_related(const IndexedLog& idx, Code from, Relation r, Code to, std::optional<Code> qualifier);

}  // namespace ocpq
