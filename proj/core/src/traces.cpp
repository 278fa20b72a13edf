#include "feedflow/traces.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "feedflow/errors.hpp"

namespace feedflow {

NetworkTrace::NetworkTrace(std::vector<BandwidthSample> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw ValidationError("network trace has no samples");
  if (samples_.front().time_s != 0.0) {
    throw ValidationError("network trace must start at t=0");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.time_s) || !std::isfinite(s.mbps)) {
      throw ValidationError(fmt::format("sample {} is not finite", i));
    }
    if (s.mbps <= 0.0) {
      throw ValidationError(fmt::format("sample {}: bandwidth {} must be > 0", i, s.mbps));
    }
    if (i > 0 && s.time_s <= samples_[i - 1].time_s) {
      throw ValidationError(fmt::format("sample {}: timestamps must strictly increase", i));
    }
  }
  if (samples_.size() == 1) {
    period_ = 1.0;
  } else {
    const auto n = samples_.size();
    period_ = samples_[n - 1].time_s + (samples_[n - 1].time_s - samples_[n - 2].time_s);
  }
  double area = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    area += samples_[i].mbps * (segment_end(i) - samples_[i].time_s);
  }
  mean_ = area / period_;
}

NetworkTrace NetworkTrace::constant(double mbps) {
  return NetworkTrace({BandwidthSample{0.0, mbps}});
}

double NetworkTrace::segment_end(std::size_t i) const {
  return i + 1 < samples_.size() ? samples_[i + 1].time_s : period_;
}

std::size_t NetworkTrace::segment_index(double phase) const {
  // Last sample with time <= phase.
  auto it = std::upper_bound(samples_.begin(), samples_.end(), phase,
                             [](double t, const BandwidthSample& s) { return t < s.time_s; });
  return it == samples_.begin() ? 0 : static_cast<std::size_t>(it - samples_.begin()) - 1;
}

double NetworkTrace::bandwidth_at(double t) const {
  if (samples_.size() == 1) return samples_.front().mbps;
  double phase = std::fmod(std::max(t, 0.0), period_);
  return samples_[segment_index(phase)].mbps;
}

double NetworkTrace::transfer_time(double start, double megabits) const {
  if (megabits <= 0.0) return 0.0;
  if (samples_.size() == 1) return megabits / samples_.front().mbps;

  double cycle = std::floor(start / period_);
  double phase = start - cycle * period_;
  if (phase >= period_) {
    cycle += 1.0;
    phase = 0.0;
  }
  std::size_t idx = segment_index(phase);
  double t = start;
  double remaining = megabits;
  for (;;) {
    const double bw = samples_[idx].mbps;
    const double end = cycle * period_ + segment_end(idx);
    const double capacity = bw * std::max(end - t, 0.0);
    if (capacity >= remaining) return t + remaining / bw - start;
    remaining -= capacity;
    t = end;
    if (++idx == samples_.size()) {
      idx = 0;
      cycle += 1.0;
    }
  }
}

BandwidthClass classify_mean(double mean_mbps) {
  if (mean_mbps < kLowMediumThresholdMbps) return BandwidthClass::kLow;
  if (mean_mbps < kMediumHighThresholdMbps) return BandwidthClass::kMedium;
  return BandwidthClass::kHigh;
}

BandwidthClass classify_trace(const NetworkTrace& trace) {
  return classify_mean(trace.mean_mbps());
}

double class_prior_mbps(BandwidthClass cls) {
  switch (cls) {
    case BandwidthClass::kLow:
      return kLowMediumThresholdMbps / 2.0;
    case BandwidthClass::kMedium:
      return (kLowMediumThresholdMbps + kMediumHighThresholdMbps) / 2.0;
    case BandwidthClass::kHigh:
      return 1.5 * kMediumHighThresholdMbps;
  }
  return kLowMediumThresholdMbps;
}

std::string_view to_string(BandwidthClass cls) {
  switch (cls) {
    case BandwidthClass::kLow:
      return "Low";
    case BandwidthClass::kMedium:
      return "Medium";
    case BandwidthClass::kHigh:
      return "High";
  }
  return "?";
}

BandwidthClass parse_bandwidth_class(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "low") return BandwidthClass::kLow;
  if (lower == "medium") return BandwidthClass::kMedium;
  if (lower == "high") return BandwidthClass::kHigh;
  throw ParseError(fmt::format("unknown bandwidth class '{}'", text));
}

namespace {

bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace

NetworkTrace load_network_trace(std::istream& in) {
  std::vector<BandwidthSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string_view> tokens;
    std::string_view rest(line);
    while (!rest.empty()) {
      auto start = rest.find_first_not_of(" \t");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      auto end = rest.find_first_of(" \t");
      tokens.push_back(rest.substr(0, end));
      rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
    }
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.size() != 2) {
      throw ParseError("expected '<seconds> <Mbps>'", line_no);
    }
    BandwidthSample s;
    if (!parse_double(tokens[0], s.time_s) || !parse_double(tokens[1], s.mbps)) {
      throw ParseError("expected '<seconds> <Mbps>'", line_no);
    }
    samples.push_back(s);
  }
  return NetworkTrace(std::move(samples));
}

NetworkTrace load_network_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file " + path);
  return load_network_trace(in);
}

void save_network_trace(const NetworkTrace& trace, std::ostream& out) {
  for (const auto& s : trace.samples()) {
    out << fmt::format("{} {}\n", s.time_s, s.mbps);
  }
}

void UserTrace::validate() const {
  for (std::size_t i = 0; i < watch_durations.size(); ++i) {
    const double w = watch_durations[i];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError(fmt::format("watch duration {} at position {} must be >= 0", w, i));
    }
  }
}

void PreferenceParams::validate() const {
  for (double v : {alpha, beta, gamma, theta}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError(fmt::format(
          "preference weights must be finite and >= 0 (alpha={}, beta={}, gamma={}, theta={})",
          alpha, beta, gamma, theta));
    }
  }
}

}  // namespace feedflow
