#pragma once

#include <cstdint>
#include <vector>

#include "feedflow/gfn/flow_model.hpp"

namespace feedflow::gfn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over the flat parameter vector and log Z together.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t param_count, AdamConfig config = {});

  // Throws std::invalid_argument when the gradient, model and optimizer
  // disagree on the parameter count.
  void step(FlowModel& model, const Gradient& gradient);

  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  // Moments for params followed by log Z.
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace feedflow::gfn
