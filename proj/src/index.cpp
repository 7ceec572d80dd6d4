#include "ocpq/index.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "ocpq/error.hpp"

namespace ocpq {

Interner::Interner(const Interner& other) {
  for (const auto& n : other.names_) intern(n);
}

Interner& Interner::operator=(const Interner& other) {
  if (this != &other) {
    names_.clear();
    codes_.clear();
    for (const auto& n : other.names_) intern(n);
  }
  return *this;
}

Code Interner::intern(std::string_view s) {
  if (auto it = codes_.find(s); it != codes_.end()) return it->second;
  Code c = static_cast<Code>(names_.size());
  names_.emplace_back(s);
  codes_.emplace(names_.back(), c);
  return c;
}

std::optional<Code> Interner::find(std::string_view s) const {
  auto it = codes_.find(s);
  if (it == codes_.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::E2O: return "E2O";
    case Relation::E2O_REV: return "E2O_REV";
    case Relation::O2O: return "O2O";
    case Relation::O2O_REV: return "O2O_REV";
  }
  return "?";
}

const Csr& IndexedLog::adjacency(Relation r) const {
  switch (r) {
    case Relation::E2O: return e2o;
    case Relation::E2O_REV: return e2o_rev;
    case Relation::O2O: return o2o;
    case Relation::O2O_REV: return o2o_rev;
  }
  return e2o;
}

std::size_t IndexedLog::domain_size(Relation r) const {
  return r == Relation::E2O ? num_events() : num_objects();
}

namespace {

struct Edge {
  Code from;
  Code to;
  Code qualifier;
};

Csr build_csr(std::size_t domain, std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.from, a.to, a.qualifier) < std::tie(b.from, b.to, b.qualifier);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) {
                            return a.from == b.from && a.to == b.to && a.qualifier == b.qualifier;
                          }),
              edges.end());
  Csr csr;
  csr.offsets.assign(domain + 1, 0);
  csr.entries.reserve(edges.size());
  for (const auto& e : edges) {
    ++csr.offsets[e.from + 1];
    csr.entries.push_back({e.to, e.qualifier});
  }
  std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
  return csr;
}

std::vector<Edge> reversed(const std::vector<Edge>& edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.push_back({e.to, e.from, e.qualifier});
  return out;
}

}  // namespace

IndexedLog build_index(const Oced& log) {
  IndexedLog idx;
  const auto events = log.events();
  const auto objects = log.objects();

  idx.object_type_of.reserve(objects.size());
  for (const auto& o : objects) {
    idx.object_ids.intern(o.id);
    Code t = idx.object_types.intern(o.otype);
    idx.object_type_of.push_back(t);
    if (idx.objects_by_type.size() <= t) idx.objects_by_type.resize(t + 1);
    idx.objects_by_type[t].push_back(static_cast<Code>(idx.object_type_of.size() - 1));
    for (const auto& a : o.attributes) idx.attribute_names.intern(a.name);
  }

  idx.event_type_of.reserve(events.size());
  idx.times.reserve(events.size());
  std::vector<Edge> e2o;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    idx.event_ids.intern(e.id);
    Code t = idx.event_types.intern(e.activity);
    idx.event_type_of.push_back(t);
    idx.times.push_back(e.time);
    if (idx.events_by_type.size() <= t) idx.events_by_type.resize(t + 1);
    idx.events_by_type[t].push_back(static_cast<Code>(i));
    for (const auto& [name, value] : e.attributes) idx.attribute_names.intern(name);
    for (const auto& r : e.e2o) {
      auto target = idx.object_ids.find(r.object_id);
      if (!target) throw Error(ErrorCode::DanglingRef, "event '" + e.id + "' references unknown object '" + r.object_id + "'");
      e2o.push_back({static_cast<Code>(i), *target, idx.qualifiers.intern(r.qualifier)});
    }
  }

  std::vector<Edge> o2o;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (const auto& r : objects[i].o2o) {
      auto target = idx.object_ids.find(r.object_id);
      if (!target) {
        throw Error(ErrorCode::DanglingRef,
                    "object '" + objects[i].id + "' references unknown object '" + r.object_id + "'");
      }
      o2o.push_back({static_cast<Code>(i), *target, idx.qualifiers.intern(r.qualifier)});
    }
  }

  for (auto& bucket : idx.events_by_type) {
    std::stable_sort(bucket.begin(), bucket.end(), [&](Code a, Code b) { return idx.times[a] < idx.times[b]; });
  }

  idx.e2o_rev = build_csr(objects.size(), reversed(e2o));
  idx.e2o = build_csr(events.size(), std::move(e2o));
  idx.o2o_rev = build_csr(objects.size(), reversed(o2o));
  idx.o2o = build_csr(objects.size(), std::move(o2o));
  return idx;
}

std::vector<Code> related(const IndexedLog& idx, Code from, Relation r, std::optional<Code> qualifier) {
  if (from >= idx.domain_size(r)) {
    throw Error(ErrorCode::UnknownRef, "code " + std::to_string(from) + " is out of range for " + std::string(to_string(r)));
  }
  std::vector<Code> out;
  for (const auto& a : idx.adjacency(r).of(from)) {
    if (qualifier && a.qualifier != *qualifier) continue;
    if (out.empty() || out.back() != a.neighbor) out.push_back(a.neighbor);
  }
  return out;
}

bool is_related(const IndexedLog& idx, Code from, Relation r, Code to, std::optional<Code> qualifier) {
  if (from >= idx.domain_size(r)) return false;
  auto adj = idx.adjacency(r).of(from);
  auto it = std::lower_bound(adj.begin(), adj.end(), to, [](const Adjacent& a, Code c) { return a.neighbor < c; });
  for (; it != adj.end() && it->neighbor == to; ++it) {
    if (!qualifier || it->qualifier == *qualifier) return true;
  }
  return false;
}

}  // namespace ocpq
