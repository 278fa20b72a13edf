#include "feedflow/gfn/flow_model.hpp"

#include <cmath>
#include <stdexcept>

#include "feedflow/rng.hpp"

namespace feedflow::gfn {

std::size_t Architecture::param_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) n += (layers[i] + 1) * layers[i + 1];
  return n;
}

double Gradient::norm() const {
  double s = log_z * log_z;
  for (double g : params) s += g * g;
  return std::sqrt(s);
}

FlowModel::FlowModel(Architecture arch, std::uint64_t seed, double output_scale)
    : arch_(std::move(arch)) {
  if (arch_.layers.size() < 2) throw std::invalid_argument("architecture needs >= 2 layers");
  params_.resize(arch_.param_count());
  Rng rng(seed);
  std::size_t offset = 0;
  for (std::size_t i = 0; i + 1 < arch_.layers.size(); ++i) {
    const auto in = arch_.layers[i];
    const auto out = arch_.layers[i + 1];
    const bool last = i + 2 == arch_.layers.size();
    const double limit =
        std::sqrt(6.0 / static_cast<double>(in + out)) * (last ? output_scale : 1.0);
    for (std::size_t k = 0; k < in * out; ++k) params_[offset++] = rng.uniform(-limit, limit);
    offset += out;  // biases start at zero
  }
}

FlowModel::FlowModel(Architecture arch, std::vector<double> params, double log_z)
    : arch_(std::move(arch)), params_(std::move(params)), log_z_(log_z) {
  if (arch_.layers.size() < 2) throw std::invalid_argument("architecture needs >= 2 layers");
  if (params_.size() != arch_.param_count()) {
    throw std::invalid_argument("parameter vector does not match architecture");
  }
}

Gradient FlowModel::zero_gradient() const {
  return Gradient{std::vector<double>(params_.size(), 0.0), 0.0};
}

std::vector<double> FlowModel::forward(std::span<const double> input, Cache* cache) const {
  if (input.size() != arch_.input_dim()) {
    throw std::invalid_argument("flow model input has wrong dimension");
  }
  std::vector<double> x(input.begin(), input.end());
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  std::size_t offset = 0;
  const std::size_t n_layers = arch_.layers.size() - 1;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto in = arch_.layers[i];
    const auto out = arch_.layers[i + 1];
    const double* w = params_.data() + offset;
    const double* b = w + in * out;
    std::vector<double> y(out);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = b[r];
      const double* row = w + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
      y[r] = i + 1 < n_layers ? std::tanh(acc) : acc;
    }
    offset += (in + 1) * out;
    x = std::move(y);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

void FlowModel::backward(const Cache& cache, std::span<const double> d_output,
                         std::span<double> d_params) const {
  if (d_params.size() != params_.size() || d_output.size() != arch_.output_dim()) {
    throw std::invalid_argument("flow model backward: shape mismatch");
  }
  const std::size_t n_layers = arch_.layers.size() - 1;
  std::vector<std::size_t> offsets(n_layers);
  for (std::size_t i = 0, off = 0; i < n_layers; ++i) {
    offsets[i] = off;
    off += (arch_.layers[i] + 1) * arch_.layers[i + 1];
  }
  // delta = d(loss)/d(pre-activation) of the current layer.
  std::vector<double> delta(d_output.begin(), d_output.end());
  for (std::size_t i = n_layers; i-- > 0;) {
    const auto in = arch_.layers[i];
    const auto out = arch_.layers[i + 1];
    const auto& x = cache.activations[i];
    const double* w = params_.data() + offsets[i];
    double* dw = d_params.data() + offsets[i];
    double* db = dw + in * out;
    for (std::size_t r = 0; r < out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      double* row = dw + r * in;
      for (std::size_t c = 0; c < in; ++c) row[c] += d * x[c];
      db[r] += d;
    }
    if (i == 0) break;
    std::vector<double> prev(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = w + r * in;
      for (std::size_t c = 0; c < in; ++c) prev[c] += row[c] * d;
    }
    // x holds tanh outputs of layer i-1.
    for (std::size_t c = 0; c < in; ++c) prev[c] *= 1.0 - x[c] * x[c];
    delta = std::move(prev);
  }
}

}  // namespace feedflow::gfn
