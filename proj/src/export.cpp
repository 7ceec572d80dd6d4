#include "ocpq/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace ocpq {

namespace {

void put_field(std::string& out, std::string_view field) {
  bool quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!quote) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void put_row(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    put_field(out, fields[i]);
  }
  out += "\r\n";
}

}  // namespace

std::vector<std::size_t> visible_rows(const NodeResult& node, bool include_basic_only) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < node.rows(); ++i) {
    if (include_basic_only || (!node.cbs_excluded[i] && !node.ancestor_excluded[i])) out.push_back(i);
  }
  return out;
}

std::string export_csv(const EvaluationResult& result, const QueryTree& tree, const IndexedLog& idx,
                       std::string_view node_id, const CsvOptions& options) {
  const NodeResult* node = result.find(node_id);
  const QueryNode* qn = tree.find_node(node_id);
  if (!node || !qn) throw Error(ErrorCode::UnknownNode, "no node '" + std::string(node_id) + "'");
  VariableTable vars(tree);

  std::vector<std::string> header;
  std::vector<std::size_t> var_cols;
  for (const auto& v : qn->box.vars) {
    auto code = vars.find(node_id, v.name);
    auto it = code ? std::find(node->columns.begin(), node->columns.end(), *code) : node->columns.end();
    if (it == node->columns.end()) throw Error(ErrorCode::UnknownNode, "result does not match the query tree");
    header.push_back(v.name);
    var_cols.push_back(static_cast<std::size_t>(it - node->columns.begin()));
  }
  const bool labels = options.include_labels && node->label_count > 0;
  if (labels) {
    for (const auto& l : qn->box.labels) header.push_back(l.name);
  }
  const bool verdicts = node->constraint_count > 0;
  if (verdicts) header.push_back("satisfied");
  if (options.include_basic_only) header.push_back("cbs_excluded");

  std::string out;
  put_row(out, header);
  std::vector<std::string> fields;
  for (std::size_t i : visible_rows(*node, options.include_basic_only)) {
    fields.clear();
    auto cells = node->row(i);
    for (std::size_t c : var_cols) {
      Code e = cells[c];
      fields.push_back(node->kinds[c] == VarKind::Event ? idx.event_ids.name(e) : idx.object_ids.name(e));
    }
    if (labels) {
      for (const auto& l : node->row_labels(i)) fields.push_back(l ? std::to_string(*l) : "");
    }
    if (verdicts) fields.push_back(node->cbs_excluded[i] ? "" : node->satisfied(i) ? "true" : "false");
    if (options.include_basic_only) fields.push_back(node->cbs_excluded[i] ? "true" : "false");
    put_row(out, fields);
  }
  return out;
}

std::vector<NodeSummary> summarize(const EvaluationResult& result) {
  std::vector<NodeSummary> out;
  for (const auto& n : result.nodes) {
    NodeCounts c = n.counts();
    NodeSummary s{n.node_id, c.total_basic, c.satisfied, c.violated, 0.0};
    std::uint64_t denom = c.satisfied + c.violated;
    if (denom > 0) s.violation_percent = 100.0 * static_cast<double>(c.violated) / static_cast<double>(denom);
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_percent(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", percent);
  return buf;
}

std::string summary_json(const std::vector<NodeSummary>& summary) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : summary) {
    arr.push_back({{"node", s.node_id},
                   {"totalBasic", s.total_basic},
                   {"satisfied", s.satisfied},
                   {"violated", s.violated},
                   {"violationPercent", std::round(s.violation_percent * 100.0) / 100.0}});
  }
  return arr.dump();
}

}  // namespace ocpq
