#include "feedflow/report.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "feedflow/errors.hpp"

namespace feedflow {

namespace {

struct Sum {
  double qoe_norm = 0.0;
  double rebuf_s = 0.0;
  double bw_mb = 0.0;
  double wastage_pct = 0.0;
  double objective = 0.0;
  std::size_t n = 0;

  void add(const MetricsRow& r) {
    qoe_norm += r.qoe_norm;
    rebuf_s += r.rebuf_s;
    bw_mb += r.bw_mb;
    wastage_pct += r.wastage_pct;
    objective += r.objective;
    ++n;
  }

  ReportRow mean(std::string method, BandwidthClass cls) const {
    const double d = static_cast<double>(n);
    return {std::move(method), cls,  qoe_norm / d, rebuf_s / d, bw_mb / d, wastage_pct / d,
            objective / d,     n};
  }
};

std::string cell_name(const Cell& c) { return fmt::format("({}, {})", c.first, to_string(c.second)); }

}  // namespace

std::vector<MetricsRow> deduplicate(std::span<const MetricsRow> rows) {
  std::set<std::tuple<std::string, BandwidthClass, std::string, std::uint64_t>> seen;
  std::vector<MetricsRow> out;
  for (const auto& r : rows) {
    if (seen.emplace(r.policy, r.cls, r.scenario_id, r.seed).second) out.push_back(r);
  }
  return out;
}

std::vector<ReportRow> aggregate(std::span<const MetricsRow> rows,
                                 const std::optional<std::vector<Cell>>& cells) {
  std::map<Cell, Sum> sums;
  std::vector<std::string> policy_order;
  for (const auto& r : rows) {
    sums[{r.policy, r.cls}].add(r);
    if (std::find(policy_order.begin(), policy_order.end(), r.policy) == policy_order.end()) {
      policy_order.push_back(r.policy);
    }
  }

  std::vector<Cell> order;
  if (cells) {
    order = *cells;
    std::vector<std::string> missing;
    for (const auto& c : order) {
      if (!sums.contains(c)) missing.push_back(cell_name(c));
    }
    if (!missing.empty()) {
      throw ValidationError(fmt::format("no episodes for {}", fmt::join(missing, ", ")));
    }
  } else {
    for (const auto& p : policy_order) {
      for (auto cls : {BandwidthClass::kLow, BandwidthClass::kMedium, BandwidthClass::kHigh}) {
        if (sums.contains({p, cls})) order.emplace_back(p, cls);
      }
    }
  }

  std::vector<ReportRow> out;
  out.reserve(order.size());
  for (const auto& c : order) out.push_back(sums.at(c).mean(c.first, c.second));
  return out;
}

ReportRow aggregate_policy(std::span<const MetricsRow> rows, const std::string& policy) {
  Sum sum;
  for (const auto& r : rows) {
    if (r.policy == policy) sum.add(r);
  }
  if (sum.n == 0) throw ValidationError("no episodes for policy " + policy);
  return sum.mean(policy, BandwidthClass::kLow);
}

PairedComparison compare_policies(std::span<const MetricsRow> rows, const std::string& a,
                                  const std::string& b) {
  std::map<std::pair<std::string, std::uint64_t>, double> b_values;
  for (const auto& r : rows) {
    if (r.policy == b) b_values.emplace(std::pair{r.scenario_id, r.seed}, r.objective);
  }
  PairedComparison cmp{a, b};
  std::size_t wins = 0;
  for (const auto& r : rows) {
    if (r.policy != a) continue;
    const auto it = b_values.find({r.scenario_id, r.seed});
    if (it == b_values.end()) continue;
    ++cmp.pairs;
    cmp.mean_a += r.objective;
    cmp.mean_b += it->second;
    if (r.objective > it->second) ++wins;
  }
  if (cmp.pairs == 0) throw ValidationError(fmt::format("{} and {} share no episodes", a, b));
  const double n = static_cast<double>(cmp.pairs);
  cmp.mean_a /= n;
  cmp.mean_b /= n;
  cmp.win_rate = static_cast<double>(wins) / n;
  return cmp;
}

std::string render_report(std::span<const MetricsRow> input,
                          const std::optional<std::vector<Cell>>& cells) {
  const auto rows = deduplicate(input);
  if (rows.empty()) throw ValidationError("no metrics rows to report");
  const auto table = aggregate(rows, cells);

  std::string md = "# Streaming results\n\n";
  md += "QoE is normalized per episode to [0, 1] between zero quality with the full rebuffer "
        "budget and every watched chunk at the top bitrate without stalls.\n\n";
  md += "## Performance by bandwidth class\n\n";
  md += "| Method | Class | QoE | Rebuffer (s) | Bandwidth (MB) | Wastage (%) | Objective | Episodes |\n";
  md += "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : table) {
    md += fmt::format("| {} | {} | {:.2f} | {:.2f} | {:.1f} | {:.1f} | {:.3f} | {} |\n", r.method,
                      to_string(r.cls), r.qoe_norm, r.rebuf_s, r.bw_mb, r.wastage_pct,
                      r.objective, r.episodes);
  }

  const auto has = [&](const std::string& p) {
    return std::any_of(rows.begin(), rows.end(), [&](const auto& r) { return r.policy == p; });
  };
  const auto comparison = [&](const std::string& title, const std::string& a,
                              const std::string& b) {
    const auto cmp = compare_policies(rows, a, b);
    const auto ra = aggregate_policy(rows, a);
    const auto rb = aggregate_policy(rows, b);
    md += fmt::format("\n## {}\n\n", title);
    md += "| Method | QoE | Rebuffer (s) | Bandwidth (MB) | Objective |\n|---|---|---|---|---|\n";
    for (const auto* r : {&rb, &ra}) {
      md += fmt::format("| {} | {:.2f} | {:.2f} | {:.1f} | {:.3f} |\n", r->method, r->qoe_norm,
                        r->rebuf_s, r->bw_mb, r->objective);
    }
    md += fmt::format("\n{} has the higher objective on {:.0f}% of {} paired episodes.\n", a,
                      100.0 * cmp.win_rate, cmp.pairs);
  };
  if (has("gfn-multi") && has("gfn-single")) {
    comparison("Multi-candidate vs single-candidate", "gfn-multi", "gfn-single");
  }
  if (has("gfn-multi") && has("gfn-fixed")) {
    comparison("Personalized vs fixed preferences", "gfn-multi", "gfn-fixed");
  }
  return md;
}

}  // namespace feedflow
