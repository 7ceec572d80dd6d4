#pragma once

#include <string>
#include <string_view>

#include "ocpq/query.hpp"

namespace ocpq {

/// Parses and validates a query tree. Throws Error(ParseError) for malformed
/// JSON, schema violations and inverted bounds, and QueryInvalidError when
/// validate_tree reports findings.
QueryTree parse_query_json(std::string_view bytes);

/// Like parse_query_json but skips validate_tree.
QueryTree parse_query_json_unchecked(std::string_view bytes);

/// Canonical form: two-space indentation, fixed key order, durations in
/// shorthand ("4w"), wildcard qualifiers and infinite bounds as null.
std::string serialize_query(const QueryTree& t);

}  // namespace ocpq
