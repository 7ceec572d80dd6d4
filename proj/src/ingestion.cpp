#include "ocpq/ingestion.hpp"

#include <map>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "ocpq/error.hpp"

namespace ocpq {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void parse_error(const std::string& msg) { throw Error(ErrorCode::ParseError, msg); }

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_error(where + ": missing required field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) parse_error(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

Timestamp require_time(const json& obj, const char* key, const std::string& where) {
  std::string text = require_string(obj, key, where);
  auto t = parse_rfc3339(text);
  if (!t) parse_error(where + ": '" + text + "' is not an RFC 3339 timestamp");
  return *t;
}

// (type name, attribute name) -> declared OCEL attribute type
using TypeDecls = std::map<std::pair<std::string, std::string>, std::string>;

TypeDecls read_type_decls(const json& doc, const char* key) {
  TypeDecls decls;
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) return decls;
  for (const auto& t : *it) {
    if (!t.is_object() || !t.contains("name") || !t["name"].is_string()) continue;
    auto attrs = t.find("attributes");
    if (attrs == t.end() || !attrs->is_array()) continue;
    for (const auto& a : *attrs) {
      if (a.contains("name") && a.contains("type") && a["name"].is_string() && a["type"].is_string()) {
        decls[{t["name"].get<std::string>(), a["name"].get<std::string>()}] = a["type"].get<std::string>();
      }
    }
  }
  return decls;
}

AttributeValue to_value(const json& v, const std::string& declared) {
  if (v.is_null()) return std::monostate{};
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (declared == "time" || declared == "date" || declared == "datetime") {
      if (auto t = parse_rfc3339(s)) return *t;
    }
    return s;
  }
  return v.dump();
}

std::vector<QualifiedRef> read_relationships(const json& entry, const std::string& where) {
  std::vector<QualifiedRef> refs;
  auto it = entry.find("relationships");
  if (it == entry.end() || it->is_null()) return refs;
  if (!it->is_array()) parse_error(where + ": 'relationships' must be an array");
  for (const auto& r : *it) {
    if (!r.is_object()) parse_error(where + ": relationship entries must be objects");
    QualifiedRef ref;
    ref.object_id = require_string(r, "objectId", where);
    auto q = r.find("qualifier");
    if (q != r.end() && q->is_string()) ref.qualifier = q->get<std::string>();
    refs.push_back(std::move(ref));
  }
  return refs;
}

const json& require_array(const json& doc, const char* key) {
  const json& v = require(doc, key, "log");
  if (!v.is_array()) parse_error(std::string("log: '") + key + "' must be an array");
  return v;
}

}  // namespace

Oced import_ocel2_json(std::string_view bytes, const ImportOptions& options) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    parse_error(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) parse_error("log: top level must be a JSON object");
  const json& jobjects = require_array(doc, "objects");
  const json& jevents = require_array(doc, "events");
  TypeDecls event_decls = read_type_decls(doc, "eventTypes");
  TypeDecls object_decls = read_type_decls(doc, "objectTypes");

  std::vector<Object> objects;
  objects.reserve(jobjects.size());
  for (const auto& jo : jobjects) {
    if (!jo.is_object()) parse_error("objects: entries must be JSON objects");
    Object o;
    o.id = require_string(jo, "id", "object");
    std::string where = "object '" + o.id + "'";
    o.otype = require_string(jo, "type", where);
    o.o2o = read_relationships(jo, where);
    if (auto attrs = jo.find("attributes"); attrs != jo.end() && attrs->is_array()) {
      for (const auto& a : *attrs) {
        ObjectAttribute attr;
        attr.name = require_string(a, "name", where);
        // OCEL writes initial values at the epoch; a missing time means the same.
        attr.time = a.contains("time") ? require_time(a, "time", where) : Timestamp{};
        auto decl = object_decls.find({o.otype, attr.name});
        attr.value = to_value(a.value("value", json()), decl == object_decls.end() ? "" : decl->second);
        o.attributes.push_back(std::move(attr));
      }
    }
    objects.push_back(std::move(o));
  }

  std::vector<Event> events;
  events.reserve(jevents.size());
  for (const auto& je : jevents) {
    if (!je.is_object()) parse_error("events: entries must be JSON objects");
    Event e;
    e.id = require_string(je, "id", "event");
    std::string where = "event '" + e.id + "'";
    e.activity = require_string(je, "type", where);
    e.time = require_time(je, "time", where);
    e.e2o = read_relationships(je, where);
    if (auto attrs = je.find("attributes"); attrs != je.end() && attrs->is_array()) {
      for (const auto& a : *attrs) {
        std::string name = require_string(a, "name", where);
        auto decl = event_decls.find({e.activity, name});
        e.attributes[name] = to_value(a.value("value", json()), decl == event_decls.end() ? "" : decl->second);
      }
    }
    events.push_back(std::move(e));
  }

  Oced log(std::move(events), std::move(objects));
  if (options.strict) {
    auto report = validate(log, true);
    if (!report.ok()) {
      const Finding& f = report.errors.front();
      ErrorCode code = ErrorCode::ParseError;
      if (f.code == "DanglingRef") code = ErrorCode::DanglingRef;
      else if (f.code == "EventWithoutObjects") code = ErrorCode::EventWithoutObjects;
      else if (f.code == "AmbiguousId") code = ErrorCode::DuplicateId;
      throw Error(code, f.ref + ": " + f.message);
    }
  }
  return log;
}

namespace {

const char* type_name(const AttributeValue& v) {
  switch (v.index()) {
    case 2: return "float";
    case 3: return "boolean";
    case 4: return "time";
    default: return "string";
  }
}

ordered_json value_json(const AttributeValue& v) {
  return std::visit(
      [](const auto& x) -> ordered_json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else if constexpr (std::is_same_v<T, Timestamp>) return format_rfc3339(x);
        else return x;
      },
      v);
}

ordered_json relationships_json(const std::vector<QualifiedRef>& refs) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : refs) arr.push_back({{"objectId", r.object_id}, {"qualifier", r.qualifier}});
  return arr;
}

// Keeps the first non-null tag seen, upgrading to "time" when any value is a timestamp.
void declare(std::map<std::string, std::map<std::string, std::string>>& decls, const std::string& type,
             const std::string& attr, const AttributeValue& v) {
  auto& slot = decls[type];
  auto it = slot.find(attr);
  if (it == slot.end() || (it->second == "string" && v.index() == 4)) slot[attr] = type_name(v);
}

ordered_json types_json(const std::map<std::string, std::map<std::string, std::string>>& decls) {
  ordered_json arr = ordered_json::array();
  for (const auto& [type, attrs] : decls) {
    ordered_json jattrs = ordered_json::array();
    for (const auto& [name, t] : attrs) jattrs.push_back({{"name", name}, {"type", t}});
    arr.push_back({{"name", type}, {"attributes", jattrs}});
  }
  return arr;
}

}  // namespace

std::string export_ocel2_json(const Oced& log) {
  std::map<std::string, std::map<std::string, std::string>> event_decls;
  std::map<std::string, std::map<std::string, std::string>> object_decls;

  ordered_json jobjects = ordered_json::array();
  for (const auto& o : log.objects()) {
    object_decls[o.otype];
    ordered_json attrs = ordered_json::array();
    for (const auto& a : o.attributes) {
      declare(object_decls, o.otype, a.name, a.value);
      attrs.push_back({{"name", a.name}, {"time", format_rfc3339(a.time)}, {"value", value_json(a.value)}});
    }
    jobjects.push_back({{"id", o.id}, {"type", o.otype}, {"attributes", attrs},
                        {"relationships", relationships_json(o.o2o)}});
  }
  ordered_json jevents = ordered_json::array();
  for (const auto& e : log.events()) {
    event_decls[e.activity];
    ordered_json attrs = ordered_json::array();
    for (const auto& [name, v] : e.attributes) {
      declare(event_decls, e.activity, name, v);
      attrs.push_back({{"name", name}, {"value", value_json(v)}});
    }
    jevents.push_back({{"id", e.id}, {"type", e.activity}, {"time", format_rfc3339(e.time)},
                       {"attributes", attrs}, {"relationships", relationships_json(e.e2o)}});
  }
  ordered_json doc;
  doc["objectTypes"] = types_json(object_decls);
  doc["eventTypes"] = types_json(event_decls);
  doc["objects"] = std::move(jobjects);
  doc["events"] = std::move(jevents);
  return doc.dump(1);
}

ValidationReport validate(const Oced& log, bool strict) {
  ValidationReport report;
  auto& ambiguity_sink = strict ? report.errors : report.warnings;
  auto& empty_sink = strict ? report.errors : report.warnings;

  for (const auto& e : log.events()) {
    if (e.activity.empty()) report.errors.push_back({"MissingEventType", e.id, "event has an empty activity"});
    if (e.e2o.empty()) {
      empty_sink.push_back({"EventWithoutObjects", e.id, "event has no qualified object reference"});
    }
    for (const auto& r : e.e2o) {
      if (!log.find_object(r.object_id)) {
        report.errors.push_back({"DanglingRef", e.id, "references unknown object '" + r.object_id + "'"});
      }
    }
    if (log.find_object(e.id)) {
      ambiguity_sink.push_back({"AmbiguousId", e.id, "id is used by both an event and an object"});
    }
  }
  for (const auto& o : log.objects()) {
    if (o.otype.empty()) report.errors.push_back({"MissingObjectType", o.id, "object has an empty type"});
    for (const auto& r : o.o2o) {
      if (!log.find_object(r.object_id)) {
        report.errors.push_back({"DanglingRef", o.id, "references unknown object '" + r.object_id + "'"});
      }
    }
    std::set<std::pair<std::string, Timestamp>> seen;
    for (const auto& a : o.attributes) {
      if (!seen.emplace(a.name, a.time).second) {
        report.errors.push_back({"DuplicateAttributeTimestamp", o.id,
                                 "attribute '" + a.name + "' has two values at " + format_rfc3339(a.time)});
      }
    }
  }
  return report;
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  bool chance(double p) { return std::bernoulli_distribution(p)(engine_); }

  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(between(0, static_cast<std::int64_t>(n) - 1)); }

 private:
  std::mt19937_64 engine_;
};

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

constexpr std::int64_t kHourMs = 3'600'000;

Timestamp generator_epoch() { return *parse_rfc3339("2023-01-02T08:00:00Z"); }

class LogBuilder {
 public:
  Event& event(std::string activity, Timestamp t) {
    Event e;
    e.id = "e" + std::to_string(events_.size() + 1);
    e.activity = std::move(activity);
    e.time = t;
    events_.push_back(std::move(e));
    return events_.back();
  }

  std::size_t object(std::string id, std::string type) {
    Object o;
    o.id = std::move(id);
    o.otype = std::move(type);
    objects_.push_back(std::move(o));
    return objects_.size() - 1;
  }

  Object& at(std::size_t i) { return objects_[i]; }

  Oced build() { return Oced(std::move(events_), std::move(objects_)); }

 private:
  std::vector<Event> events_;
  std::vector<Object> objects_;
};

}  // namespace

Oced generate_synthetic(const SyntheticConfig& cfg) {
  check_probability(cfg.reminder_probability, "reminder_probability");
  check_probability(cfg.skip_payment_probability, "skip_payment_probability");
  check_probability(cfg.confirm_probability, "confirm_probability");
  Rng rng(cfg.seed);
  LogBuilder b;
  const Timestamp epoch = generator_epoch();

  for (std::size_t c = 0; c < cfg.num_customers; ++c) {
    std::string customer = "c" + std::to_string(c + 1);
    std::size_t customer_slot = b.object(customer, "customers");
    Timestamp t = epoch + Duration{rng.between(0, 30 * 24 * kHourMs)};
    for (std::size_t o = 0; o < cfg.orders_per_customer; ++o) {
      std::string order = "o" + std::to_string(c + 1) + "-" + std::to_string(o + 1);
      std::size_t order_slot = b.object(order, "orders");
      b.at(customer_slot).o2o.push_back({"places", order});
      std::vector<std::string> items;
      for (std::size_t i = 0; i < cfg.items_per_order; ++i) {
        items.push_back("i" + std::to_string(c + 1) + "-" + std::to_string(o + 1) + "-" + std::to_string(i + 1));
        b.object(items.back(), "items");
        b.at(order_slot).o2o.push_back({"contains", items.back()});
      }
      auto step = [&] { t += Duration{kHourMs + rng.between(0, 48 * kHourMs)}; };

      step();
      auto& place = b.event("place order", t);
      place.e2o.push_back({"customer", customer});
      place.e2o.push_back({"order", order});
      for (const auto& item : items) place.e2o.push_back({"item", item});
      if (rng.chance(cfg.confirm_probability)) {
        step();
        b.event("confirm order", t).e2o.push_back({"order", order});
      }
      for (const auto& item : items) {
        step();
        b.event("pack item", t).e2o.push_back({"item", item});
      }
      if (!items.empty()) {
        step();
        auto& ship = b.event("ship items", t);
        for (const auto& item : items) ship.e2o.push_back({"ships", item});
      }
      for (int r = 0; r < 3 && rng.chance(cfg.reminder_probability); ++r) {
        step();
        auto& reminder = b.event("payment reminder", t);
        reminder.e2o.push_back({"recipient", customer});
        reminder.e2o.push_back({"order", order});
        reminder.attributes["fee"] = 15.0;
      }
      if (!rng.chance(cfg.skip_payment_probability)) {
        step();
        b.event("pay order", t).e2o.push_back({"order", order});
      }
    }
  }
  return b.build();
}

Oced generate_loan_log(const LoanConfig& cfg) {
  if (cfg.resources == 0 && cfg.applications > 0) throw std::invalid_argument("loan log needs at least one resource");
  if (cfg.min_workflow_events > cfg.max_workflow_events) {
    throw std::invalid_argument("min_workflow_events exceeds max_workflow_events");
  }
  Rng rng(cfg.seed);
  LogBuilder b;
  const Timestamp epoch = generator_epoch();

  std::vector<std::string> resources;
  for (std::size_t r = 0; r < cfg.resources; ++r) {
    resources.push_back("User_" + std::to_string(r + 1));
    b.object(resources.back(), "Resource");
  }
  static const char* const kWorkflow[] = {"W_Complete application", "W_Call after offers",
                                          "W_Validate application", "W_Handle leads"};

  for (std::size_t a = 0; a < cfg.applications; ++a) {
    std::string app = "Application_" + std::to_string(a + 1);
    std::size_t app_slot = b.object(app, "Application");
    Timestamp t = epoch + Duration{rng.between(0, 365 * 24 * kHourMs)};
    auto step = [&] { t += Duration{rng.between(60'000, 36 * kHourMs)}; };
    auto pick = [&] { return resources[rng.index(resources.size())]; };
    auto app_event = [&](const char* activity, const std::string& resource) {
      step();
      auto& e = b.event(activity, t);
      e.e2o.push_back({"application", app});
      e.e2o.push_back({"resource", resource});
    };

    std::string owner = pick();
    app_event("A_Create Application", owner);
    // Mostly one submission; occasionally none or a duplicate.
    std::int64_t roll = rng.between(0, 99);
    int submissions = roll < 4 ? 0 : roll < 8 ? 2 : 1;
    for (int s = 0; s < submissions; ++s) app_event("A_Submitted", owner);
    app_event("A_Concept", pick());

    bool accepted = rng.chance(0.85);
    bool late_acceptance = accepted && rng.chance(0.1);
    std::string acceptor = pick();
    if (accepted && !late_acceptance) app_event("A_Accepted", acceptor);

    std::size_t workflow = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(cfg.min_workflow_events), static_cast<std::int64_t>(cfg.max_workflow_events)));
    std::size_t offers = cfg.max_offers_per_application == 0
                             ? 0
                             : static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(cfg.max_offers_per_application)));
    std::vector<std::string> offer_ids;
    for (std::size_t o = 0; o < offers; ++o) {
      offer_ids.push_back("Offer_" + std::to_string(a + 1) + "_" + std::to_string(o + 1));
      b.object(offer_ids.back(), "Offer");
      b.at(app_slot).o2o.push_back({"offer", offer_ids.back()});
    }
    std::size_t accepted_offer = offers == 0 ? 0 : rng.index(offers);
    bool offer_accepted = accepted && offers > 0 && rng.chance(0.6);

    for (std::size_t o = 0; o < offers; ++o) {
      const std::string& offer = offer_ids[o];
      if (workflow > 0 && rng.chance(0.5)) {
        app_event(kWorkflow[rng.index(4)], pick());
        --workflow;
      }
      step();
      auto& create = b.event("O_Create Offer", t);
      create.e2o.push_back({"offer", offer});
      create.e2o.push_back({"application", app});
      create.e2o.push_back({"resource", rng.chance(0.9) ? acceptor : pick()});
      step();
      b.event("O_Created", t).e2o.push_back({"offer", offer});
      step();
      auto& sent = b.event("O_Sent (mail and online)", t);
      sent.e2o.push_back({"offer", offer});
      sent.e2o.push_back({"resource", pick()});
      int returns = rng.chance(0.65) ? (rng.chance(0.1) ? 2 : 1) : 0;
      for (int r = 0; r < returns; ++r) {
        step();
        auto& ret = b.event("O_Returned", t);
        ret.e2o.push_back({"offer", offer});
        if (offers > 1 && rng.chance(0.05)) ret.e2o.push_back({"offer", offer_ids[(o + 1) % offers]});
      }
    }
    for (std::size_t o = 0; o < offers; ++o) {
      step();
      bool is_accepted = offer_accepted && o == accepted_offer;
      auto& fin = b.event(is_accepted ? "O_Accepted" : (rng.chance(0.5) ? "O_Cancelled" : "O_Refused"), t);
      fin.e2o.push_back({"offer", offer_ids[o]});
      fin.e2o.push_back({"resource", pick()});
    }
    if (late_acceptance) app_event("A_Accepted", acceptor);
    for (; workflow > 0; --workflow) app_event(kWorkflow[rng.index(4)], pick());
    app_event("A_Complete", pick());
    std::int64_t outcome = rng.between(0, 2);
    app_event(outcome == 0 ? "A_Pending" : outcome == 1 ? "A_Denied" : "A_Cancelled", pick());
  }
  return b.build();
}

}  // namespace ocpq
