#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace feedflow {

struct BandwidthSample {
  double time_s = 0.0;
  double mbps = 0.0;

  friend bool operator==(const BandwidthSample&, const BandwidthSample&) = default;
};

// Piecewise-constant bandwidth over time. Past the final sample the trace
// repeats; the final segment is taken to be as long as the one before it
// (or 1 s for a single-sample trace, which is constant anyway).
class NetworkTrace {
 public:
  // Throws ValidationError unless timestamps start at 0 and strictly
  // increase and every bandwidth is positive.
  explicit NetworkTrace(std::vector<BandwidthSample> samples);

  static NetworkTrace constant(double mbps);

  std::span<const BandwidthSample> samples() const { return samples_; }
  double period() const { return period_; }

  double bandwidth_at(double t) const;

  // Time-weighted mean over one period.
  double mean_mbps() const { return mean_; }

  // Seconds needed to move `megabits` starting at time `start`.
  double transfer_time(double start, double megabits) const;

  friend bool operator==(const NetworkTrace&, const NetworkTrace&) = default;

 private:
  std::size_t segment_index(double phase) const;
  double segment_end(std::size_t i) const;

  std::vector<BandwidthSample> samples_;
  double period_ = 1.0;
  double mean_ = 0.0;
};

enum class BandwidthClass { kLow, kMedium, kHigh };

inline constexpr double kLowMediumThresholdMbps = 1.5;
inline constexpr double kMediumHighThresholdMbps = 3.0;

// Mean below 1.5 Mbps is Low, [1.5, 3) Medium, 3 and above High.
BandwidthClass classify_trace(const NetworkTrace& trace);
BandwidthClass classify_mean(double mean_mbps);

// Cold-start throughput guess for a trace class: the class midpoint, with
// High (unbounded above) using 1.5x its lower threshold.
double class_prior_mbps(BandwidthClass cls);

std::string_view to_string(BandwidthClass cls);
// Accepts low/medium/high in any case; throws ParseError otherwise.
BandwidthClass parse_bandwidth_class(std::string_view text);

// Text format: one "<seconds> <Mbps>" pair per line. Blank lines and lines
// starting with '#' are skipped.
NetworkTrace load_network_trace(std::istream& in);
NetworkTrace load_network_trace_file(const std::string& path);
// Writes the canonical form: shortest round-trip decimal, single space,
// '\n' line endings.
void save_network_trace(const NetworkTrace& trace, std::ostream& out);

// Intended watch time per queue position, in seconds.
struct UserTrace {
  std::vector<double> watch_durations;

  void validate() const;
};

// Per-user objective weights: alpha quality, beta rebuffering (per second),
// gamma smoothness, theta bandwidth (per MB).
struct PreferenceParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double theta = 0.0;

  void validate() const;

  friend bool operator==(const PreferenceParams&, const PreferenceParams&) = default;
};

}  // namespace feedflow
