#include "feedflow/objective.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "feedflow/errors.hpp"

namespace feedflow {

QoeResult qoe(std::span<const double> bitrates_kbps, std::span<const double> rebuffer_s,
              const PreferenceParams& prefs, const QualityMap& quality) {
  if (bitrates_kbps.size() != rebuffer_s.size()) {
    throw ValidationError(fmt::format("qoe: {} watched chunks but {} rebuffer entries",
                                      bitrates_kbps.size(), rebuffer_s.size()));
  }
  QoeResult r;
  double prev_q = 0.0;
  for (std::size_t n = 0; n < bitrates_kbps.size(); ++n) {
    const double q = quality(bitrates_kbps[n]);
    r.terms.quality_sum += q;
    r.terms.rebuffer_sum_s += rebuffer_s[n];
    if (n > 0) r.terms.smoothness_sum += std::abs(q - prev_q);
    prev_q = q;
  }
  r.raw = prefs.alpha * r.terms.quality_sum - prefs.beta * r.terms.rebuffer_sum_s -
          prefs.gamma * r.terms.smoothness_sum;
  return r;
}

QoeResult qoe(const SessionState& state, const BitrateLadder& ladder,
              const PreferenceParams& prefs, const QualityMap& quality) {
  std::vector<double> bitrates;
  std::vector<double> stalls;
  bitrates.reserve(state.watch_log.size());
  stalls.reserve(state.watch_log.size());
  for (const auto& w : state.watch_log) {
    bitrates.push_back(ladder.kbps(w.level));
    stalls.push_back(w.rebuffer_s);
  }
  return qoe(bitrates, stalls, prefs, quality);
}

double bandwidth_cost_mb(const SessionState& state) {
  return static_cast<double>(state.downloaded_bytes) / 1e6;
}

double combined_objective(double qoe_raw, double bandwidth_mb, double theta) {
  return qoe_raw - theta * bandwidth_mb;
}

SessionMetrics session_metrics(const SessionState& state, const BitrateLadder& ladder,
                               const PreferenceParams& prefs, const QualityMap& quality) {
  SessionMetrics m;
  const auto q = qoe(state, ladder, prefs, quality);
  m.qoe_terms = q.terms;
  m.qoe_terms.rebuffer_sum_s += state.pending_stall_s;
  m.qoe_raw = q.raw - prefs.beta * state.pending_stall_s;
  m.bandwidth_mb = bandwidth_cost_mb(state);
  m.wastage_fraction = state.downloaded_bytes > 0
                           ? static_cast<double>(state.wasted_bytes) /
                                 static_cast<double>(state.downloaded_bytes)
                           : 0.0;
  m.objective = combined_objective(m.qoe_raw, m.bandwidth_mb, prefs.theta);
  return m;
}

double step_objective_delta(const SessionMetrics& before, const SessionMetrics& after) {
  return after.objective - before.objective;
}

QoeBounds qoe_bounds(std::size_t watched_chunks, const BitrateLadder& ladder,
                     const PreferenceParams& prefs, const QualityMap& quality,
                     double rebuffer_budget_s) {
  QoeBounds b;
  b.max = prefs.alpha * static_cast<double>(watched_chunks) * quality(ladder.top_kbps());
  b.min = -prefs.beta * rebuffer_budget_s;
  if (b.max <= b.min) b.max = b.min + 1.0;
  return b;
}

double normalize_qoe(double raw, const QoeBounds& bounds) {
  return std::clamp((raw - bounds.min) / (bounds.max - bounds.min), 0.0, 1.0);
}

}  // namespace feedflow
