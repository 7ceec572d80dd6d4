#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ocpq/time.hpp"

namespace ocpq {

/// Attribute value universe: null, string, number, boolean or timestamp.
using AttributeValue = std::variant<std::monostate, std::string, double, bool, Timestamp>;

/// Ordering is only defined between values carrying the same tag; mixed tags
/// compare as unordered.
std::partial_ordering compare_values(const AttributeValue& a, const AttributeValue& b);

std::string to_display_string(const AttributeValue& v);

/// A relationship qualifier, or the wildcard (std::nullopt) matching every qualifier.
using Qualifier = std::optional<std::string>;
inline constexpr std::nullopt_t kWildcard = std::nullopt;

struct QualifiedRef {
  std::string qualifier;
  std::string object_id;

  bool operator==(const QualifiedRef&) const = default;
};

struct Event {
  std::string id;
  std::string activity;
  Timestamp time{};
  std::map<std::string, AttributeValue> attributes;
  std::vector<QualifiedRef> e2o;

  bool operator==(const Event&) const = default;
};

struct ObjectAttribute {
  std::string name;
  Timestamp time{};
  AttributeValue value;

  bool operator==(const ObjectAttribute&) const = default;
};

struct Object {
  std::string id;
  std::string otype;
  std::vector<QualifiedRef> o2o;
  std::vector<ObjectAttribute> attributes;

  bool operator==(const Object&) const = default;
};

/// Immutable object-centric event data: events and objects with their
/// attributes and qualified E2O / O2O references. Event and object ids live
/// in separate spaces; id uniqueness is enforced per space on construction.
class Oced {
 public:
  Oced() = default;
  /// Throws Error(DuplicateId) when an id repeats within events or within objects.
  Oced(std::vector<Event> events, std::vector<Object> objects);

  std::span<const Event> events() const { return events_; }
  std::span<const Object> objects() const { return objects_; }

  const Event* find_event(std::string_view id) const;
  const Object* find_object(std::string_view id) const;
  std::optional<std::size_t> event_position(std::string_view id) const;
  std::optional<std::size_t> object_position(std::string_view id) const;

  bool operator==(const Oced& other) const {
    return events_ == other.events_ && objects_ == other.objects_;
  }

 private:
  std::vector<Event> events_;
  std::vector<Object> objects_;
  std::unordered_map<std::string, std::size_t> event_pos_;
  std::unordered_map<std::string, std::size_t> object_pos_;
};

/// Event type (activity) for events, object type for objects. Events are
/// looked up first. Throws Error(UnknownRef).
std::string type_of(const Oced& log, std::string_view id);

/// Throws Error(UnknownRef) for unknown ids and for objects.
Timestamp time_of(const Oced& log, std::string_view event_id);

/// Object references of an event (E2O) or object (O2O), filtered by qualifier.
std::set<std::string> objects_of(const Oced& log, std::string_view id, const Qualifier& qualifier);

/// Value written last at or before `t`; nullopt when there is no such write.
std::optional<AttributeValue> attribute_at(const Oced& log, std::string_view object_id,
                                           std::string_view attribute, Timestamp t);

}  // namespace ocpq
