#include "handover/nn/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "handover/nn/kernels.hpp"

namespace handover::nn {

std::size_t Network::input_channels() const {
  if (blocks.empty()) throw std::logic_error("network has no conv blocks");
  return blocks.front().conv.in_channels;
}

void Network::validate() const {
  if (blocks.empty()) throw std::invalid_argument("network needs at least one conv block");
  std::size_t channels = blocks.front().conv.in_channels;
  for (const auto& b : blocks) {
    b.conv.validate();
    b.norm.validate();
    if (b.conv.in_channels != channels) {
      throw std::invalid_argument("conv block input channels do not chain");
    }
    if (b.norm.channels != b.conv.out_channels) {
      throw std::invalid_argument("batchnorm width must equal conv output channels");
    }
    channels = b.conv.out_channels;
  }
  head.validate();
  if (head.in_features != channels) {
    throw std::invalid_argument("dense head input must equal last conv width");
  }
  if (head.out_features == 0) throw std::invalid_argument("dense head needs at least one class");
}

Network make_network(const NetworkShape& shape, std::uint64_t seed) {
  if (shape.filters.empty()) throw std::invalid_argument("network needs at least one block");
  if (shape.input_channels == 0 || shape.classes == 0) {
    throw std::invalid_argument("network needs input channels and classes");
  }
  std::mt19937_64 rng(seed);
  Network net;
  std::size_t in = shape.input_channels;
  for (std::size_t filters : shape.filters) {
    ConvBlock block{Conv1DLayer(in, filters, shape.kernel_size), BatchNorm1DLayer(filters)};
    const double limit = std::sqrt(6.0 / static_cast<double>(in * shape.kernel_size));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : block.conv.kernels) w = dist(rng);
    net.blocks.push_back(std::move(block));
    in = filters;
  }
  net.head = DenseLayer(in, shape.classes);
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : net.head.weights) w = dist(rng);
  net.validate();
  return net;
}

std::size_t parameter_count(const Network& net, bool include_running_stats) {
  std::size_t n = 0;
  for (const auto& b : net.blocks) {
    n += b.conv.kernels.size() + b.conv.bias.size();
    n += b.norm.gamma.size() + b.norm.beta.size();
    if (include_running_stats) n += b.norm.running_mean.size() + b.norm.running_var.size();
  }
  n += net.head.weights.size() + net.head.bias.size();
  return n;
}

std::vector<double> predict_logits(const Network& net, const Tensor1D& input) {
  if (input.channels != net.input_channels()) {
    throw std::invalid_argument("network expects " + std::to_string(net.input_channels()) +
                                " input channels, got " + std::to_string(input.channels));
  }
  Tensor1D act = input;
  for (const auto& b : net.blocks) {
    const Tensor1D z = conv1d_forward(act, b.conv);
    auto normed = batchnorm_apply(std::span(&z, 1), b.norm, b.norm.running_mean, b.norm.running_var);
    act = relu(normed.front());
  }
  return dense_forward(global_avg_pool(act), net.head);
}

std::vector<double> predict(const Network& net, const Tensor1D& input) {
  return softmax(predict_logits(net, input));
}

ForwardCache forward_train(const Network& net, std::span<const Tensor1D> batch) {
  if (batch.empty()) throw std::invalid_argument("training forward pass needs a non-empty batch");
  for (const auto& x : batch) {
    if (x.channels != net.input_channels() || x.length != batch.front().length) {
      throw std::invalid_argument("batch does not match the network input shape");
    }
  }
  ForwardCache cache;
  cache.blocks.resize(net.blocks.size());
  std::vector<Tensor1D> act(batch.begin(), batch.end());
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    const auto& block = net.blocks[b];
    auto& bc = cache.blocks[b];
    std::vector<Tensor1D> z;
    z.reserve(act.size());
    for (const auto& x : act) z.push_back(conv1d_forward(x, block.conv));
    bc.input = std::move(act);
    bc.stats = batch_statistics(z);

    BatchNorm1DLayer unit(block.norm.channels);
    unit.epsilon = block.norm.epsilon;
    bc.xhat = batchnorm_apply(z, unit, bc.stats.mean, bc.stats.var);
    bc.pre_relu.reserve(z.size());
    act.clear();
    act.reserve(z.size());
    for (const auto& xh : bc.xhat) {
      Tensor1D y(xh.channels, xh.length);
      for (std::size_t c = 0; c < xh.channels; ++c) {
        const double g = block.norm.gamma[c];
        const double be = block.norm.beta[c];
        auto src = xh.channel(c);
        auto dst = y.channel(c);
        for (std::size_t t = 0; t < xh.length; ++t) dst[t] = g * src[t] + be;
      }
      act.push_back(relu(y));
      bc.pre_relu.push_back(std::move(y));
    }
  }
  for (const auto& a : act) {
    cache.features.push_back(global_avg_pool(a));
    cache.probabilities.push_back(softmax(dense_forward(cache.features.back(), net.head)));
  }
  cache.last_activation = std::move(act);
  return cache;
}

double mean_cross_entropy(const ForwardCache& cache, std::span<const std::size_t> targets) {
  if (targets.size() != cache.probabilities.size()) {
    throw std::invalid_argument("target count does not match batch size");
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    sum += cross_entropy_loss(cache.probabilities[n], targets[n]);
  }
  return sum / static_cast<double>(targets.size());
}

GradientTape GradientTape::zeros_like(const Network& net) {
  GradientTape tape;
  for (const auto& b : net.blocks) {
    tape.blocks.push_back({std::vector<double>(b.conv.kernels.size(), 0.0),
                           std::vector<double>(b.conv.bias.size(), 0.0),
                           std::vector<double>(b.norm.gamma.size(), 0.0),
                           std::vector<double>(b.norm.beta.size(), 0.0)});
  }
  tape.head_weights.assign(net.head.weights.size(), 0.0);
  tape.head_bias.assign(net.head.bias.size(), 0.0);
  return tape;
}

std::vector<std::span<double>> GradientTape::views() {
  std::vector<std::span<double>> out;
  for (auto& b : blocks) {
    out.emplace_back(b.kernels);
    out.emplace_back(b.bias);
    out.emplace_back(b.gamma);
    out.emplace_back(b.beta);
  }
  out.emplace_back(head_weights);
  out.emplace_back(head_bias);
  return out;
}

std::vector<std::span<const double>> GradientTape::views() const {
  std::vector<std::span<const double>> out;
  for (const auto& b : blocks) {
    out.emplace_back(b.kernels);
    out.emplace_back(b.bias);
    out.emplace_back(b.gamma);
    out.emplace_back(b.beta);
  }
  out.emplace_back(head_weights);
  out.emplace_back(head_bias);
  return out;
}

double GradientTape::norm() const {
  double sq = 0.0;
  for (auto v : views()) {
    for (double g : v) sq += g * g;
  }
  return std::sqrt(sq);
}

std::vector<std::span<double>> parameter_views(Network& net) {
  std::vector<std::span<double>> out;
  for (auto& b : net.blocks) {
    out.emplace_back(b.conv.kernels);
    out.emplace_back(b.conv.bias);
    out.emplace_back(b.norm.gamma);
    out.emplace_back(b.norm.beta);
  }
  out.emplace_back(net.head.weights);
  out.emplace_back(net.head.bias);
  return out;
}

GradientTape backward(const Network& net, const ForwardCache& cache,
                      std::span<const std::size_t> targets) {
  const std::size_t batch = cache.probabilities.size();
  if (batch == 0 || targets.size() != batch || cache.blocks.size() != net.blocks.size()) {
    throw std::invalid_argument("backward: cache, targets and network do not agree");
  }
  const std::size_t classes = net.classes();
  const std::size_t width = net.head.in_features;
  GradientTape tape = GradientTape::zeros_like(net);
  const double inv_batch = 1.0 / static_cast<double>(batch);

  // Head: dL/dlogits = (softmax - onehot) / batch.
  std::vector<Tensor1D> grad(batch);
  const std::size_t len = cache.last_activation.front().length;
  for (std::size_t n = 0; n < batch; ++n) {
    if (targets[n] >= classes) throw std::out_of_range("backward: target class out of range");
    std::vector<double> d(cache.probabilities[n]);
    d[targets[n]] -= 1.0;
    for (double& v : d) v *= inv_batch;
    Tensor1D g(width, len);
    for (std::size_t o = 0; o < classes; ++o) {
      tape.head_bias[o] += d[o];
      for (std::size_t i = 0; i < width; ++i) {
        tape.head_weights[o * width + i] += d[o] * cache.features[n][i];
      }
    }
    for (std::size_t i = 0; i < width; ++i) {
      double df = 0.0;
      for (std::size_t o = 0; o < classes; ++o) df += net.head.weight(o, i) * d[o];
      const double spread = df / static_cast<double>(len);
      for (double& v : g.channel(i)) v = spread;
    }
    grad[n] = std::move(g);
  }

  const auto& kset = kernels::active_kernels();
  for (std::size_t b = net.blocks.size(); b-- > 0;) {
    const auto& block = net.blocks[b];
    const auto& bc = cache.blocks[b];
    auto& tb = tape.blocks[b];
    const std::size_t channels = block.conv.out_channels;

    // ReLU mask.
    for (std::size_t n = 0; n < batch; ++n) {
      auto& g = grad[n].data;
      const auto& pre = bc.pre_relu[n].data;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(pre[k] > 0.0)) g[k] = 0.0;
      }
    }

    // Batchnorm with batch statistics.
    const double count = static_cast<double>(bc.stats.count);
    for (std::size_t c = 0; c < channels; ++c) {
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        auto dy = grad[n].channel(c);
        auto xh = bc.xhat[n].channel(c);
        for (std::size_t t = 0; t < dy.size(); ++t) {
          sum_dy += dy[t];
          sum_dy_xhat += dy[t] * xh[t];
        }
      }
      tb.gamma[c] += sum_dy_xhat;
      tb.beta[c] += sum_dy;
      const double inv_std = 1.0 / std::sqrt(bc.stats.var[c] + block.norm.epsilon);
      const double scale = block.norm.gamma[c] * inv_std / count;
      for (std::size_t n = 0; n < batch; ++n) {
        auto dy = grad[n].channel(c);
        auto xh = bc.xhat[n].channel(c);
        for (std::size_t t = 0; t < dy.size(); ++t) {
          dy[t] = scale * (count * dy[t] - sum_dy - xh[t] * sum_dy_xhat);
        }
      }
    }

    // Convolution.
    const auto& conv = block.conv;
    for (std::size_t n = 0; n < batch; ++n) {
      const auto& dz = grad[n];
      for (std::size_t o = 0; o < channels; ++o) {
        double s = 0.0;
        for (double v : dz.channel(o)) s += v;
        tb.bias[o] += s;
      }
      kset.conv1d_weight_grad(bc.input[n].data.data(), conv.in_channels, dz.length, dz.data.data(),
                              conv.out_channels, conv.kernel_size, tb.kernels.data());
    }
    if (b == 0) break;

    // dx = correlation of dz with the transposed, flipped kernels.
    const std::size_t ks = conv.kernel_size;
    std::vector<double> flipped(conv.kernels.size());
    for (std::size_t o = 0; o < conv.out_channels; ++o) {
      for (std::size_t i = 0; i < conv.in_channels; ++i) {
        for (std::size_t k = 0; k < ks; ++k) {
          flipped[(i * conv.out_channels + o) * ks + (ks - 1 - k)] = conv.weight(o, i, k);
        }
      }
    }
    for (std::size_t n = 0; n < batch; ++n) {
      Tensor1D dx(conv.in_channels, grad[n].length);
      kset.conv1d(grad[n].data.data(), conv.out_channels, grad[n].length, flipped.data(), ks,
                  nullptr, conv.in_channels, dx.data.data());
      grad[n] = std::move(dx);
    }
  }
  return tape;
}

GradientTape backward(const Network& net, std::span<const Tensor1D> batch,
                      std::span<const std::size_t> targets) {
  return backward(net, forward_train(net, batch), targets);
}

void commit_batch_statistics(Network& net, const ForwardCache& cache) {
  if (cache.blocks.size() != net.blocks.size()) {
    throw std::invalid_argument("cache does not belong to this network");
  }
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    update_running_statistics(net.blocks[b].norm, cache.blocks[b].stats);
  }
}

void sgd_step(Network& net, const GradientTape& tape, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  auto params = parameter_views(net);
  const auto grads = tape.views();
  if (params.size() != grads.size()) throw std::invalid_argument("gradient tape shape mismatch");
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (params[a].size() != grads[a].size()) {
      throw std::invalid_argument("gradient tape shape mismatch");
    }
    for (std::size_t k = 0; k < params[a].size(); ++k) params[a][k] -= learning_rate * grads[a][k];
  }
}

MomentumSgd::MomentumSgd(const Network& net, double learning_rate, double momentum)
    : velocity_(GradientTape::zeros_like(net)), learning_rate_(learning_rate), momentum_(momentum) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
}

void MomentumSgd::step(Network& net, const GradientTape& tape) {
  auto vel = velocity_.views();
  const auto grads = tape.views();
  if (vel.size() != grads.size()) throw std::invalid_argument("gradient tape shape mismatch");
  for (std::size_t a = 0; a < vel.size(); ++a) {
    if (vel[a].size() != grads[a].size()) throw std::invalid_argument("gradient tape shape mismatch");
    for (std::size_t k = 0; k < vel[a].size(); ++k) vel[a][k] = momentum_ * vel[a][k] + grads[a][k];
  }
  sgd_step(net, velocity_, learning_rate_);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json tagged(const std::vector<double>& data, std::vector<std::size_t> shape) {
  return json{{"shape", std::move(shape)}, {"data", data}};
}

std::vector<double> untag(const json& j, const std::vector<std::size_t>& shape) {
  const auto got = j.at("shape").get<std::vector<std::size_t>>();
  if (got != shape) throw std::invalid_argument("parameter array has an unexpected shape");
  auto data = j.at("data").get<std::vector<double>>();
  std::size_t expect = 1;
  for (auto s : shape) expect *= s;
  if (data.size() != expect) throw std::invalid_argument("parameter array size does not match shape");
  return data;
}

void expect_type(const json& layer, const char* type) {
  if (layer.at("type").get<std::string>() != type) {
    throw std::invalid_argument(std::string("expected layer type ") + type + ", got " +
                                layer.at("type").get<std::string>());
  }
}

}  // namespace

json network_to_json(const Network& net) {
  net.validate();
  json layers = json::array();
  for (const auto& b : net.blocks) {
    const auto& c = b.conv;
    layers.push_back({{"type", "conv1d"},
                      {"in_channels", c.in_channels},
                      {"out_channels", c.out_channels},
                      {"kernel_size", c.kernel_size},
                      {"padding", "same"},
                      {"stride", 1},
                      {"weights", tagged(c.kernels, {c.out_channels, c.in_channels, c.kernel_size})},
                      {"bias", tagged(c.bias, {c.out_channels})}});
    const auto& n = b.norm;
    layers.push_back({{"type", "batchnorm1d"},
                      {"channels", n.channels},
                      {"epsilon", n.epsilon},
                      {"momentum", n.momentum},
                      {"gamma", tagged(n.gamma, {n.channels})},
                      {"beta", tagged(n.beta, {n.channels})},
                      {"running_mean", tagged(n.running_mean, {n.channels})},
                      {"running_var", tagged(n.running_var, {n.channels})}});
    layers.push_back({{"type", "relu"}});
  }
  layers.push_back({{"type", "global_avg_pool"}});
  const auto& h = net.head;
  layers.push_back({{"type", "dense"},
                    {"in_features", h.in_features},
                    {"out_features", h.out_features},
                    {"weights", tagged(h.weights, {h.out_features, h.in_features})},
                    {"bias", tagged(h.bias, {h.out_features})}});
  layers.push_back({{"type", "softmax"}});
  return json{{"version", "tcnn-v1"}, {"layers", std::move(layers)}};
}

Network network_from_json(const json& doc) {
  if (doc.at("version").get<std::string>() != "tcnn-v1") {
    throw std::invalid_argument("unsupported network version: " + doc.at("version").dump());
  }
  const auto& layers = doc.at("layers");
  Network net;
  std::size_t k = 0;
  while (k < layers.size() && layers[k].at("type").get<std::string>() == "conv1d") {
    const auto& cj = layers[k];
    ConvBlock block;
    block.conv.in_channels = cj.at("in_channels").get<std::size_t>();
    block.conv.out_channels = cj.at("out_channels").get<std::size_t>();
    block.conv.kernel_size = cj.at("kernel_size").get<std::size_t>();
    if (cj.value("padding", std::string("same")) != "same" || cj.value("stride", 1) != 1) {
      throw std::invalid_argument("only same-padded stride-1 convolutions are supported");
    }
    block.conv.kernels = untag(cj.at("weights"), {block.conv.out_channels, block.conv.in_channels,
                                                  block.conv.kernel_size});
    block.conv.bias = untag(cj.at("bias"), {block.conv.out_channels});
    if (k + 2 >= layers.size()) throw std::invalid_argument("truncated conv block");
    const auto& nj = layers[k + 1];
    expect_type(nj, "batchnorm1d");
    const auto ch = nj.at("channels").get<std::size_t>();
    block.norm.channels = ch;
    block.norm.epsilon = nj.at("epsilon").get<double>();
    block.norm.momentum = nj.at("momentum").get<double>();
    block.norm.gamma = untag(nj.at("gamma"), {ch});
    block.norm.beta = untag(nj.at("beta"), {ch});
    block.norm.running_mean = untag(nj.at("running_mean"), {ch});
    block.norm.running_var = untag(nj.at("running_var"), {ch});
    expect_type(layers[k + 2], "relu");
    net.blocks.push_back(std::move(block));
    k += 3;
  }
  if (k + 3 != layers.size()) throw std::invalid_argument("unexpected layer sequence");
  expect_type(layers[k], "global_avg_pool");
  const auto& hj = layers[k + 1];
  expect_type(hj, "dense");
  net.head.in_features = hj.at("in_features").get<std::size_t>();
  net.head.out_features = hj.at("out_features").get<std::size_t>();
  net.head.weights = untag(hj.at("weights"), {net.head.out_features, net.head.in_features});
  net.head.bias = untag(hj.at("bias"), {net.head.out_features});
  expect_type(layers[k + 2], "softmax");
  net.validate();
  return net;
}

}  // namespace handover::nn
