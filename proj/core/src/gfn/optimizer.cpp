#include "feedflow/gfn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace feedflow::gfn {

AdamOptimizer::AdamOptimizer(std::size_t param_count, AdamConfig config)
    : config_(config), m_(param_count + 1, 0.0), v_(param_count + 1, 0.0) {}

void AdamOptimizer::step(FlowModel& model, const Gradient& gradient) {
  auto params = model.params();
  if (gradient.params.size() != params.size() || params.size() + 1 != m_.size()) {
    throw std::invalid_argument("adam: gradient, model and optimizer sizes differ");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto update = [&](std::size_t i, double g) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    return config_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
  };
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= update(i, gradient.params[i]);
  model.set_log_z(model.log_z() - update(params.size(), gradient.log_z));
  model.set_step_count(model.step_count() + 1);
}

}  // namespace feedflow::gfn
