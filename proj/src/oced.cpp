#include "ocpq/oced.hpp"

#include <sstream>

#include "ocpq/error.hpp"

namespace ocpq {

std::partial_ordering compare_values(const AttributeValue& a, const AttributeValue& b) {
  if (a.index() != b.index()) return std::partial_ordering::unordered;
  return std::visit(
      [&](const auto& lhs) -> std::partial_ordering {
        using T = std::decay_t<decltype(lhs)>;
        const auto& rhs = std::get<T>(b);
        if constexpr (std::is_same_v<T, std::monostate>) {
          return std::partial_ordering::equivalent;
        } else {
          return lhs <=> rhs;
        }
      },
      a);
}

std::string to_display_string(const AttributeValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "null";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream os;
          os << x;
          return os.str();
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else {
          return format_rfc3339(x);
        }
      },
      v);
}

Oced::Oced(std::vector<Event> events, std::vector<Object> objects)
    : events_(std::move(events)), objects_(std::move(objects)) {
  event_pos_.reserve(events_.size());
  object_pos_.reserve(objects_.size());
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (!event_pos_.emplace(events_[i].id, i).second) {
      throw Error(ErrorCode::DuplicateId, "event id '" + events_[i].id + "' occurs more than once");
    }
  }
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (!object_pos_.emplace(objects_[i].id, i).second) {
      throw Error(ErrorCode::DuplicateId, "object id '" + objects_[i].id + "' occurs more than once");
    }
  }
}

std::optional<std::size_t> Oced::event_position(std::string_view id) const {
  auto it = event_pos_.find(std::string(id));
  if (it == event_pos_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Oced::object_position(std::string_view id) const {
  auto it = object_pos_.find(std::string(id));
  if (it == object_pos_.end()) return std::nullopt;
  return it->second;
}

const Event* Oced::find_event(std::string_view id) const {
  auto pos = event_position(id);
  return pos ? &events_[*pos] : nullptr;
}

const Object* Oced::find_object(std::string_view id) const {
  auto pos = object_position(id);
  return pos ? &objects_[*pos] : nullptr;
}

namespace {

[[noreturn]] void unknown(std::string_view id) {
  throw Error(ErrorCode::UnknownRef, "no event or object with id '" + std::string(id) + "'");
}

std::set<std::string> filter_refs(const std::vector<QualifiedRef>& refs, const Qualifier& q) {
  std::set<std::string> out;
  for (const auto& r : refs) {
    if (!q || *q == r.qualifier) out.insert(r.object_id);
  }
  return out;
}

}  // namespace

std::string type_of(const Oced& log, std::string_view id) {
  if (const auto* e = log.find_event(id)) return e->activity;
  if (const auto* o = log.find_object(id)) return o->otype;
  unknown(id);
}

Timestamp time_of(const Oced& log, std::string_view event_id) {
  if (const auto* e = log.find_event(event_id)) return e->time;
  throw Error(ErrorCode::UnknownRef, "no event with id '" + std::string(event_id) + "'");
}

std::set<std::string> objects_of(const Oced& log, std::string_view id, const Qualifier& qualifier) {
  if (const auto* e = log.find_event(id)) return filter_refs(e->e2o, qualifier);
  if (const auto* o = log.find_object(id)) return filter_refs(o->o2o, qualifier);
  unknown(id);
}

std::optional<AttributeValue> attribute_at(const Oced& log, std::string_view object_id,
                                           std::string_view attribute, Timestamp t) {
  const auto* o = log.find_object(object_id);
  if (!o) throw Error(ErrorCode::UnknownRef, "no object with id '" + std::string(object_id) + "'");
  const ObjectAttribute* best = nullptr;
  for (const auto& a : o->attributes) {
    if (a.name != attribute || a.time > t) continue;
    if (!best || a.time > best->time) best = &a;
  }
  if (!best) return std::nullopt;
  return best->value;
}

}  // namespace ocpq
