#include "feedflow/media.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "feedflow/errors.hpp"

namespace feedflow {

BitrateLadder::BitrateLadder(std::vector<double> kbps) : kbps_(std::move(kbps)) {
  if (kbps_.size() < 2) throw ValidationError("bitrate ladder needs at least 2 levels");
  for (std::size_t i = 0; i < kbps_.size(); ++i) {
    if (!(kbps_[i] > 0.0) || !std::isfinite(kbps_[i])) {
      throw ValidationError(fmt::format("ladder level {} must be positive", i));
    }
    if (i > 0 && kbps_[i] <= kbps_[i - 1]) {
      throw ValidationError("bitrate ladder must be strictly increasing");
    }
  }
}

double BitrateLadder::kbps(std::size_t level) const {
  if (level >= kbps_.size()) {
    throw std::out_of_range(fmt::format("ladder level {} out of range", level));
  }
  return kbps_[level];
}

std::size_t BitrateLadder::highest_level_at_most(double mbps) const {
  std::size_t best = 0;
  for (std::size_t i = 0; i < kbps_.size(); ++i) {
    if (kbps_[i] / 1000.0 <= mbps) best = i;
  }
  return best;
}

std::int64_t Video::chunk_size(std::size_t chunk, std::size_t level) const {
  if (chunk >= chunk_sizes.size()) {
    throw std::out_of_range(fmt::format("video {}: chunk {} out of range", id, chunk));
  }
  const auto& row = chunk_sizes[chunk];
  if (level >= row.size()) {
    throw std::out_of_range(fmt::format("video {}: level {} out of range", id, level));
  }
  return row[level];
}

void Video::validate(std::size_t levels) const {
  if (!(chunk_duration_s > 0.0)) {
    throw ValidationError(fmt::format("video {}: chunk duration must be > 0", id));
  }
  if (chunk_sizes.empty()) throw ValidationError(fmt::format("video {} has no chunks", id));
  for (std::size_t c = 0; c < chunk_sizes.size(); ++c) {
    const auto& row = chunk_sizes[c];
    if (row.size() != levels) {
      throw ValidationError(
          fmt::format("video {}: chunk {} has {} sizes, expected {}", id, c, row.size(), levels));
    }
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (row[l] <= 0) {
        throw ValidationError(fmt::format("video {}: chunk {} level {} size must be > 0", id, c, l));
      }
      if (l > 0 && row[l] < row[l - 1]) {
        throw ValidationError(
            fmt::format("video {}: chunk {} sizes must not decrease with level", id, c));
      }
    }
  }
}

void RecommendationQueue::validate(std::size_t levels) const {
  if (videos.empty()) throw ValidationError("recommendation queue is empty");
  std::unordered_set<std::string> ids;
  for (const auto& v : videos) {
    if (!ids.insert(v.id).second) {
      throw ValidationError(fmt::format("duplicate video id '{}' in queue", v.id));
    }
    v.validate(levels);
  }
}

std::string_view to_string(QualityMode mode) {
  return mode == QualityMode::kLinear ? "linear" : "log";
}

QualityMode parse_quality_mode(std::string_view text) {
  if (text == "linear") return QualityMode::kLinear;
  if (text == "log") return QualityMode::kLog;
  throw ConfigError(fmt::format("unknown quality mode '{}'", text));
}

QualityMap::QualityMap(QualityMode mode, double min_kbps) : mode_(mode), min_kbps_(min_kbps) {
  if (!(min_kbps > 0.0)) throw DomainError("quality map reference bitrate must be > 0");
}

double QualityMap::operator()(double kbps) const {
  if (!(kbps > 0.0)) throw DomainError(fmt::format("bitrate {} must be > 0", kbps));
  return mode_ == QualityMode::kLinear ? kbps / 1000.0 : std::log(kbps / min_kbps_);
}

}  // namespace feedflow
