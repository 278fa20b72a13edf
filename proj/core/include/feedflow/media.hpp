#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace feedflow {

// Available encodings in kbps, strictly increasing.
class BitrateLadder {
 public:
  explicit BitrateLadder(std::vector<double> kbps);

  std::size_t size() const { return kbps_.size(); }
  double kbps(std::size_t level) const;
  double mbps(std::size_t level) const { return kbps(level) / 1000.0; }
  double lowest_kbps() const { return kbps_.front(); }
  double top_kbps() const { return kbps_.back(); }
  const std::vector<double>& levels() const { return kbps_; }

  // Highest level whose bitrate is <= `mbps`; level 0 when none is.
  std::size_t highest_level_at_most(double mbps) const;

  friend bool operator==(const BitrateLadder&, const BitrateLadder&) = default;

 private:
  std::vector<double> kbps_;
};

struct Video {
  std::string id;
  double chunk_duration_s = 2.0;
  // [chunk][level] in bytes.
  std::vector<std::vector<std::int64_t>> chunk_sizes;

  std::size_t chunk_count() const { return chunk_sizes.size(); }
  double length_s() const { return chunk_duration_s * static_cast<double>(chunk_sizes.size()); }

  // Throws std::out_of_range for bad indices.
  std::int64_t chunk_size(std::size_t chunk, std::size_t level) const;

  // Checks positivity and per-chunk level monotonicity against a ladder of
  // `levels` entries.
  void validate(std::size_t levels) const;
};

struct RecommendationQueue {
  std::vector<Video> videos;

  std::size_t size() const { return videos.size(); }
  const Video& operator[](std::size_t i) const { return videos[i]; }

  // Non-empty, unique ids, every video valid for the ladder.
  void validate(std::size_t levels) const;
};

enum class QualityMode { kLinear, kLog };

std::string_view to_string(QualityMode mode);
QualityMode parse_quality_mode(std::string_view text);

// Bitrate-to-quality mapping. Linear: kbps / 1000. Log: ln(kbps / min_kbps).
class QualityMap {
 public:
  QualityMap() = default;
  QualityMap(QualityMode mode, double min_kbps);

  // Throws DomainError for non-positive bitrates.
  double operator()(double kbps) const;

  QualityMode mode() const { return mode_; }
  double min_kbps() const { return min_kbps_; }

 private:
  QualityMode mode_ = QualityMode::kLinear;
  double min_kbps_ = 1.0;
};

}  // namespace feedflow
