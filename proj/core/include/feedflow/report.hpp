#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "feedflow/experiment.hpp"

namespace feedflow {

struct ReportRow {
  std::string method;
  BandwidthClass cls = BandwidthClass::kLow;
  double qoe_norm = 0.0;
  double rebuf_s = 0.0;
  double bw_mb = 0.0;
  double wastage_pct = 0.0;
  double objective = 0.0;
  std::size_t episodes = 0;
};

using Cell = std::pair<std::string, BandwidthClass>;

// Drops repeated (policy, class, scenario, seed) rows, keeping the first.
std::vector<MetricsRow> deduplicate(std::span<const MetricsRow> rows);

// Means per (policy, class). With `cells`, exactly those groups are
// reported in that order and any empty one is a ValidationError naming it;
// otherwise groups follow first appearance of the policy, then class order.
std::vector<ReportRow> aggregate(std::span<const MetricsRow> rows,
                                 const std::optional<std::vector<Cell>>& cells = {});

// Means over every class for one policy.
ReportRow aggregate_policy(std::span<const MetricsRow> rows, const std::string& policy);

struct PairedComparison {
  std::string a;
  std::string b;
  std::size_t pairs = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  // Share of (scenario, seed) pairs where a's objective beats b's.
  double win_rate = 0.0;
};

// Objective of `a` against `b` on the (scenario, seed) pairs both have.
// Throws ValidationError if they share none.
PairedComparison compare_policies(std::span<const MetricsRow> rows, const std::string& a,
                                  const std::string& b);

// Markdown: per-class table, then the multi/single and personalized/fixed
// comparisons when the needed policies are present.
std::string render_report(std::span<const MetricsRow> rows,
                          const std::optional<std::vector<Cell>>& cells = {});

}  // namespace feedflow
