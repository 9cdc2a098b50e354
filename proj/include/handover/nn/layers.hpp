#pragma once

// Forward primitives for the 1D torque CNN. All arithmetic is double.

#include <cstddef>
#include <span>
#include <vector>

namespace handover::nn {

/// channels x length activations, row-major (channel-major).
struct Tensor1D {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> data;

  Tensor1D() = default;
  Tensor1D(std::size_t c, std::size_t l) : channels(c), length(l), data(c * l, 0.0) {}
  Tensor1D(std::size_t c, std::size_t l, std::vector<double> values);

  double& at(std::size_t c, std::size_t t) { return data[c * length + t]; }
  double at(std::size_t c, std::size_t t) const { return data[c * length + t]; }
  std::span<double> channel(std::size_t c) { return {data.data() + c * length, length}; }
  std::span<const double> channel(std::size_t c) const { return {data.data() + c * length, length}; }

  bool all_finite() const noexcept;
  friend bool operator==(const Tensor1D&, const Tensor1D&) = default;
};

struct Conv1DLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 3;
  std::vector<double> kernels;  // out x in x kernel_size
  std::vector<double> bias;     // out

  Conv1DLayer() = default;
  Conv1DLayer(std::size_t in, std::size_t out, std::size_t ksize);

  double& weight(std::size_t o, std::size_t i, std::size_t k) {
    return kernels[(o * in_channels + i) * kernel_size + k];
  }
  double weight(std::size_t o, std::size_t i, std::size_t k) const {
    return kernels[(o * in_channels + i) * kernel_size + k];
  }
  void validate() const;
  friend bool operator==(const Conv1DLayer&, const Conv1DLayer&) = default;
};

// Same padding, stride 1: output length equals input length.
Tensor1D conv1d_forward(const Tensor1D& input, const Conv1DLayer& layer);

enum class Mode { Train, Infer };

struct BatchNorm1DLayer {
  std::size_t channels = 0;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;

  BatchNorm1DLayer() = default;
  explicit BatchNorm1DLayer(std::size_t c);
  void validate() const;
  friend bool operator==(const BatchNorm1DLayer&, const BatchNorm1DLayer&) = default;
};

// Per-channel statistics over batch x length. var is the biased estimate.
struct BatchStatistics {
  std::vector<double> mean;
  std::vector<double> var;
  std::size_t count = 0;  // values per channel
};

BatchStatistics batch_statistics(std::span<const Tensor1D> batch);

// Normalizes with the given statistics without touching the layer.
std::vector<Tensor1D> batchnorm_apply(std::span<const Tensor1D> batch, const BatchNorm1DLayer& layer,
                                      std::span<const double> mean, std::span<const double> var);

// running = (1 - momentum) * running + momentum * batch, unbiased variance.
void update_running_statistics(BatchNorm1DLayer& layer, const BatchStatistics& stats);

// Train: batch statistics, then running-stat update. Infer: running stats.
std::vector<Tensor1D> batchnorm_forward(std::span<const Tensor1D> batch, BatchNorm1DLayer& layer,
                                        Mode mode);

Tensor1D relu(const Tensor1D& input);

std::vector<double> global_avg_pool(const Tensor1D& input);

// Max-subtracted for stability.
std::vector<double> softmax(std::span<const double> logits);

// -log(max(p[target], 1e-12))
double cross_entropy_loss(std::span<const double> probabilities, std::size_t target);

struct DenseLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<double> weights;  // out x in
  std::vector<double> bias;     // out

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out);
  double& weight(std::size_t o, std::size_t i) { return weights[o * in_features + i]; }
  double weight(std::size_t o, std::size_t i) const { return weights[o * in_features + i]; }
  void validate() const;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

std::vector<double> dense_forward(std::span<const double> input, const DenseLayer& layer);

}  // namespace handover::nn
