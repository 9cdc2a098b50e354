#include "handover/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "handover/nn/kernels.hpp"

namespace handover::nn {

Tensor1D::Tensor1D(std::size_t c, std::size_t l, std::vector<double> values)
    : channels(c), length(l), data(std::move(values)) {
  if (data.size() != c * l) {
    throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                " does not match shape " + std::to_string(c) + "x" +
                                std::to_string(l));
  }
}

bool Tensor1D::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Conv1DLayer::Conv1DLayer(std::size_t in, std::size_t out, std::size_t ksize)
    : in_channels(in), out_channels(out), kernel_size(ksize), kernels(in * out * ksize, 0.0),
      bias(out, 0.0) {
  validate();
}

void Conv1DLayer::validate() const {
  if (in_channels == 0 || out_channels == 0) {
    throw std::invalid_argument("conv1d needs at least one input and output channel");
  }
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw std::invalid_argument("conv1d kernel size must be odd for same padding");
  }
  if (kernels.size() != in_channels * out_channels * kernel_size || bias.size() != out_channels) {
    throw std::invalid_argument("conv1d parameter arrays do not match the layer shape");
  }
}

Tensor1D conv1d_forward(const Tensor1D& input, const Conv1DLayer& layer) {
  layer.validate();
  if (input.channels != layer.in_channels) {
    throw std::invalid_argument("conv1d expects " + std::to_string(layer.in_channels) +
                                " input channels, got " + std::to_string(input.channels));
  }
  Tensor1D out(layer.out_channels, input.length);
  if (input.length == 0) return out;
  kernels::active_kernels().conv1d(input.data.data(), input.channels, input.length,
                                   layer.kernels.data(), layer.kernel_size, layer.bias.data(),
                                   layer.out_channels, out.data.data());
  return out;
}

BatchNorm1DLayer::BatchNorm1DLayer(std::size_t c)
    : channels(c), gamma(c, 1.0), beta(c, 0.0), running_mean(c, 0.0), running_var(c, 1.0) {}

void BatchNorm1DLayer::validate() const {
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw std::invalid_argument("batchnorm parameter arrays do not match channel count");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("batchnorm epsilon must be positive");
  for (double v : running_var) {
    if (!(v >= 0.0)) throw std::invalid_argument("batchnorm running variance must be >= 0");
  }
}

namespace {

void check_batch(std::span<const Tensor1D> batch) {
  if (batch.empty()) throw std::invalid_argument("batch must not be empty");
  for (const auto& x : batch) {
    if (x.channels != batch.front().channels || x.length != batch.front().length) {
      throw std::invalid_argument("batch members must share one shape");
    }
  }
}

}  // namespace

BatchStatistics batch_statistics(std::span<const Tensor1D> batch) {
  check_batch(batch);
  const std::size_t c = batch.front().channels;
  const std::size_t len = batch.front().length;
  BatchStatistics s;
  s.count = batch.size() * len;
  if (s.count == 0) throw std::invalid_argument("batch statistics need at least one value");
  s.mean.assign(c, 0.0);
  s.var.assign(c, 0.0);
  const double inv = 1.0 / static_cast<double>(s.count);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (const auto& x : batch) {
      for (double v : x.channel(ch)) sum += v;
    }
    const double mean = sum * inv;
    double sq = 0.0;
    for (const auto& x : batch) {
      for (double v : x.channel(ch)) sq += (v - mean) * (v - mean);
    }
    s.mean[ch] = mean;
    s.var[ch] = sq * inv;
  }
  return s;
}

std::vector<Tensor1D> batchnorm_apply(std::span<const Tensor1D> batch, const BatchNorm1DLayer& layer,
                                      std::span<const double> mean, std::span<const double> var) {
  check_batch(batch);
  layer.validate();
  if (batch.front().channels != layer.channels) {
    throw std::invalid_argument("batchnorm channel mismatch");
  }
  std::vector<Tensor1D> out;
  out.reserve(batch.size());
  for (const auto& x : batch) {
    Tensor1D y(x.channels, x.length);
    for (std::size_t ch = 0; ch < x.channels; ++ch) {
      const double scale = layer.gamma[ch] / std::sqrt(var[ch] + layer.epsilon);
      const double mu = mean[ch];
      const double shift = layer.beta[ch];
      auto src = x.channel(ch);
      auto dst = y.channel(ch);
      for (std::size_t t = 0; t < x.length; ++t) dst[t] = (src[t] - mu) * scale + shift;
    }
    out.push_back(std::move(y));
  }
  return out;
}

void update_running_statistics(BatchNorm1DLayer& layer, const BatchStatistics& stats) {
  const double m = layer.momentum;
  const double unbias = stats.count > 1
                            ? static_cast<double>(stats.count) / static_cast<double>(stats.count - 1)
                            : 1.0;
  for (std::size_t ch = 0; ch < layer.channels; ++ch) {
    layer.running_mean[ch] = (1.0 - m) * layer.running_mean[ch] + m * stats.mean[ch];
    layer.running_var[ch] = (1.0 - m) * layer.running_var[ch] + m * stats.var[ch] * unbias;
  }
}

std::vector<Tensor1D> batchnorm_forward(std::span<const Tensor1D> batch, BatchNorm1DLayer& layer,
                                        Mode mode) {
  if (mode == Mode::Infer) {
    if (batch.empty()) return {};
    return batchnorm_apply(batch, layer, layer.running_mean, layer.running_var);
  }
  if (batch.empty()) throw std::invalid_argument("batchnorm training needs a non-empty batch");
  const BatchStatistics stats = batch_statistics(batch);
  auto out = batchnorm_apply(batch, layer, stats.mean, stats.var);
  update_running_statistics(layer, stats);
  return out;
}

Tensor1D relu(const Tensor1D& input) {
  Tensor1D out = input;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

std::vector<double> global_avg_pool(const Tensor1D& input) {
  if (input.length == 0) throw std::invalid_argument("global average pooling needs length >= 1");
  std::vector<double> out(input.channels, 0.0);
  const double inv = 1.0 / static_cast<double>(input.length);
  for (std::size_t c = 0; c < input.channels; ++c) {
    double sum = 0.0;
    for (double v : input.channel(c)) sum += v;
    out[c] = sum * inv;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double cross_entropy_loss(std::span<const double> probabilities, std::size_t target) {
  if (target >= probabilities.size()) {
    throw std::out_of_range("cross-entropy target " + std::to_string(target) +
                            " outside " + std::to_string(probabilities.size()) + " classes");
  }
  return -std::log(std::max(probabilities[target], 1e-12));
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : in_features(in), out_features(out), weights(in * out, 0.0), bias(out, 0.0) {}

void DenseLayer::validate() const {
  if (weights.size() != in_features * out_features || bias.size() != out_features) {
    throw std::invalid_argument("dense parameter arrays do not match the layer shape");
  }
}

std::vector<double> dense_forward(std::span<const double> input, const DenseLayer& layer) {
  layer.validate();
  if (input.size() != layer.in_features) {
    throw std::invalid_argument("dense layer input size mismatch");
  }
  std::vector<double> out(layer.bias);
  for (std::size_t o = 0; o < layer.out_features; ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < layer.in_features; ++i) acc += layer.weight(o, i) * input[i];
    out[o] += acc;
  }
  return out;
}

}  // namespace handover::nn
