#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace feedflow::gfn {

// Layer widths: input, hidden..., output. A two-entry architecture is a
// single affine map; {0, n} degenerates to n free log-flows (a table).
struct Architecture {
  std::vector<std::size_t> layers;

  std::size_t input_dim() const { return layers.front(); }
  std::size_t output_dim() const { return layers.back(); }
  std::size_t param_count() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Gradient over (network parameters, log Z).
struct Gradient {
  std::vector<double> params;
  double log_z = 0.0;

  double norm() const;
};

// Multilayer perceptron mapping an observation to log edge-flows, tanh on
// hidden layers and a linear output, plus the learnable log partition
// function used by trajectory balance. Parameters are stored flat, layer by
// layer, each as a row-major [out][in] weight block followed by the bias.
class FlowModel {
 public:
  // Per-evaluation activations kept for the backward pass.
  struct Cache {
    std::vector<std::vector<double>> activations;
  };

  // Glorot-uniform hidden weights; the output layer is scaled by
  // `output_scale` so a fresh model starts near the uniform policy.
  FlowModel(Architecture arch, std::uint64_t seed, double output_scale = 0.1);
  FlowModel(Architecture arch, std::vector<double> params, double log_z);

  const Architecture& architecture() const { return arch_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  double log_z() const { return log_z_; }
  void set_log_z(double v) { log_z_ = v; }
  std::int64_t step_count() const { return steps_; }
  void set_step_count(std::int64_t n) { steps_ = n; }

  Gradient zero_gradient() const;

  // Throws std::invalid_argument if input has the wrong size.
  std::vector<double> forward(std::span<const double> input, Cache* cache = nullptr) const;

  // Adds d(loss)/d(params) to `d_params`, given d(loss)/d(output).
  void backward(const Cache& cache, std::span<const double> d_output,
                std::span<double> d_params) const;

 private:
  Architecture arch_;
  std::vector<double> params_;
  double log_z_ = 0.0;
  std::int64_t steps_ = 0;
};

}  // namespace feedflow::gfn
