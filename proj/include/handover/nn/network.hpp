#pragma once

// Conv -> batchnorm -> ReLU blocks, global average pooling, one dense map to
// logits, softmax. Forward and backward are pure functions of the parameters
// and the batch; running batchnorm statistics change only through
// commit_batch_statistics().

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "handover/nn/layers.hpp"
#include "json.hpp"

namespace handover::nn {

struct ConvBlock {
  Conv1DLayer conv;
  BatchNorm1DLayer norm;
  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

struct Network {
  std::vector<ConvBlock> blocks;
  DenseLayer head;

  std::size_t input_channels() const;
  std::size_t classes() const noexcept { return head.out_features; }
  void validate() const;
  friend bool operator==(const Network&, const Network&) = default;
};

struct NetworkShape {
  std::size_t input_channels = 1;
  std::vector<std::size_t> filters{64, 64, 64};
  std::size_t kernel_size = 3;
  std::size_t classes = 6;
};

// Conv weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)) with fan_in = in * k,
// dense weights ~ U(-1/sqrt(in), 1/sqrt(in)); biases 0, gamma 1, beta 0.
Network make_network(const NetworkShape& shape, std::uint64_t seed);

// Trainable parameters only, or also the batchnorm running statistics.
std::size_t parameter_count(const Network& net, bool include_running_stats);

// Inference: batchnorm uses running statistics. Returns class probabilities.
std::vector<double> predict(const Network& net, const Tensor1D& input);
std::vector<double> predict_logits(const Network& net, const Tensor1D& input);

struct BlockCache {
  std::vector<Tensor1D> input;     // conv input
  std::vector<Tensor1D> xhat;      // normalized conv output
  std::vector<Tensor1D> pre_relu;  // gamma * xhat + beta
  BatchStatistics stats;
};

// Everything backward() needs from a training-mode forward pass.
struct ForwardCache {
  std::vector<BlockCache> blocks;
  std::vector<Tensor1D> last_activation;
  std::vector<std::vector<double>> features;  // pooled, batch x channels
  std::vector<std::vector<double>> probabilities;
};

ForwardCache forward_train(const Network& net, std::span<const Tensor1D> batch);

double mean_cross_entropy(const ForwardCache& cache, std::span<const std::size_t> targets);

struct BlockGradient {
  std::vector<double> kernels;
  std::vector<double> bias;
  std::vector<double> gamma;
  std::vector<double> beta;
};

/// Gradients mirroring every trainable parameter of a Network.
struct GradientTape {
  std::vector<BlockGradient> blocks;
  std::vector<double> head_weights;
  std::vector<double> head_bias;

  static GradientTape zeros_like(const Network& net);
  std::vector<std::span<double>> views();
  std::vector<std::span<const double>> views() const;
  double norm() const;
};

// Trainable parameter arrays in the same order as GradientTape::views().
std::vector<std::span<double>> parameter_views(Network& net);

// Gradient of the batch-mean cross-entropy. The cache must come from
// forward_train on the same network and batch.
GradientTape backward(const Network& net, const ForwardCache& cache,
                      std::span<const std::size_t> targets);
GradientTape backward(const Network& net, std::span<const Tensor1D> batch,
                      std::span<const std::size_t> targets);

// Folds the cached batch statistics into each block's running statistics.
void commit_batch_statistics(Network& net, const ForwardCache& cache);

// parameter <- parameter - learning_rate * gradient
void sgd_step(Network& net, const GradientTape& tape, double learning_rate);

// velocity <- momentum * velocity + gradient; then sgd_step with velocity.
class MomentumSgd {
 public:
  MomentumSgd(const Network& net, double learning_rate, double momentum);
  void step(Network& net, const GradientTape& tape);

 private:
  GradientTape velocity_;
  double learning_rate_;
  double momentum_;
};

// "tcnn-v1" document: {"version", "layers": [...]} with shape-tagged arrays.
nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& doc);

}  // namespace handover::nn
