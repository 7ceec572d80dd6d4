#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ocpq/error.hpp"
#include "ocpq/oced.hpp"

namespace ocpq {

/// Errors are violations of the mandatory OCED properties; warnings are
/// tolerated deviations (lenient mode only).
struct ValidationReport {
  std::vector<Finding> errors;
  std::vector<Finding> warnings;

  bool ok() const { return errors.empty(); }
};

struct ImportOptions {
  /// Reject dangling references and events without objects instead of
  /// leaving them for validate() to report.
  bool strict = false;
};

/// OCEL 2.0 JSON (events[], objects[], optional eventTypes[] / objectTypes[]
/// attribute declarations). Relationships without a qualifier get the empty
/// qualifier. Throws Error(ParseError) on malformed input, and in strict mode
/// Error(DanglingRef) / Error(EventWithoutObjects).
Oced import_ocel2_json(std::string_view bytes, const ImportOptions& options = {});

/// Serializes in the layout accepted by import_ocel2_json, with attribute
/// types declared per event / object type.
std::string export_ocel2_json(const Oced& log);

ValidationReport validate(const Oced& log, bool strict);

/// Order-management process: customers place orders containing items; the
/// events are place order, confirm order, pack item, ship items, payment
/// reminder and pay order.
struct SyntheticConfig {
  std::size_t num_customers = 10;
  std::size_t orders_per_customer = 2;
  std::size_t items_per_order = 2;
  double reminder_probability = 0.2;
  double skip_payment_probability = 0.1;
  /// Not part of the minimal trace; 0 keeps the activity set of the
  /// reference example.
  double confirm_probability = 0.0;
  std::uint64_t seed = 0;
};

/// Deterministic in cfg. Timestamps strictly increase along every order trace.
/// Throws std::invalid_argument for probabilities outside [0, 1].
Oced generate_synthetic(const SyntheticConfig& cfg);

/// Loan-application process modeled on the BPI Challenge 2017 object types
/// (Application, Offer, Resource) and activity names.
struct LoanConfig {
  std::size_t applications = 100;
  std::size_t resources = 10;
  std::size_t max_offers_per_application = 3;
  std::size_t min_workflow_events = 2;
  std::size_t max_workflow_events = 6;
  std::uint64_t seed = 0;
};

Oced generate_loan_log(const LoanConfig& cfg);

}  // namespace ocpq
