#pragma once

#include <span>

#include "feedflow/media.hpp"
#include "feedflow/sim.hpp"
#include "feedflow/traces.hpp"

namespace feedflow {

struct QoeTerms {
  double quality_sum = 0.0;
  double rebuffer_sum_s = 0.0;
  double smoothness_sum = 0.0;
};

struct QoeResult {
  double raw = 0.0;
  QoeTerms terms;
};

// alpha * sum q(B_n) - beta * sum T_n - gamma * sum |q(B_{n+1}) - q(B_n)|
// over watched chunks in play order. The smoothness sum runs across video
// boundaries. Throws ValidationError if the two spans differ in length.
QoeResult qoe(std::span<const double> bitrates_kbps, std::span<const double> rebuffer_s,
              const PreferenceParams& prefs, const QualityMap& quality);

// Same, reading bitrates and per-chunk stalls from the session's watch log.
QoeResult qoe(const SessionState& state, const BitrateLadder& ladder,
              const PreferenceParams& prefs, const QualityMap& quality);

// Downloaded megabytes (1 MB = 1e6 bytes).
double bandwidth_cost_mb(const SessionState& state);

double combined_objective(double qoe_raw, double bandwidth_mb, double theta);

struct SessionMetrics {
  double qoe_raw = 0.0;
  QoeTerms qoe_terms;
  double bandwidth_mb = 0.0;
  double wastage_fraction = 0.0;
  double objective = 0.0;
};

// Metrics of the session so far. A stall still in progress counts toward
// the rebuffer term already, so the objective only ever moves by what a
// step actually did.
SessionMetrics session_metrics(const SessionState& state, const BitrateLadder& ladder,
                               const PreferenceParams& prefs, const QualityMap& quality);

// objective(after) - objective(before); sums telescope to the episode
// objective.
double step_objective_delta(const SessionMetrics& before, const SessionMetrics& after);

// Reporting bounds for QoE normalization: the best case is every watched
// chunk at the top ladder level with no stalls; the worst case is zero
// quality with the full rebuffer budget.
struct QoeBounds {
  double min = 0.0;
  double max = 1.0;
};

QoeBounds qoe_bounds(std::size_t watched_chunks, const BitrateLadder& ladder,
                     const PreferenceParams& prefs, const QualityMap& quality,
                     double rebuffer_budget_s);

// (raw - min) / (max - min) clamped to [0, 1].
double normalize_qoe(double raw, const QoeBounds& bounds);

}  // namespace feedflow
