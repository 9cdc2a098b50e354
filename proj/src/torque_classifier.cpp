#include "handover/torque_classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace handover::classifier {

using nlohmann::json;

bool TorqueNetConfig::is_reference_preset() const noexcept {
  return blocks == 3 && filters_per_block == 64 && kernel_size == 3 && classes == kActionCount &&
         input_channels == 1 && input_length == kFlatWindowSize;
}

void TorqueNetConfig::validate() const {
  if (blocks == 0 || filters_per_block == 0) throw std::invalid_argument("need at least one conv block");
  if (kernel_size % 2 == 0) throw std::invalid_argument("kernel size must be odd");
  if (classes != kActionCount) throw std::invalid_argument("classifier must have six classes");
  if (input_channels != 1 || input_length != kFlatWindowSize) {
    throw std::invalid_argument("classifier input must be 1 channel x 280 samples");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2 for batchnorm");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw std::invalid_argument("holdout fraction must lie in (0,1)");
  }
}

InputStats compute_input_stats(std::span<const LabeledWindow> windows) {
  if (windows.empty()) throw std::invalid_argument("input statistics need at least one window");
  InputStats s;
  const double n = static_cast<double>(windows.size() * kWindowSamples);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    double sum = 0.0;
    for (const auto& w : windows) {
      for (double v : w.window.samples()[j]) sum += v;
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& w : windows) {
      for (double v : w.window.samples()[j]) sq += (v - mean) * (v - mean);
    }
    s.mean[j] = mean;
    s.stddev[j] = std::sqrt(sq / n);
  }
  return s;
}

nn::Tensor1D normalize_input(const TorqueWindow& window, const InputStats& stats) {
  nn::Tensor1D out(1, kFlatWindowSize);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const double inv = 1.0 / std::max(stats.stddev[j], kMinInputStd);
    for (std::size_t t = 0; t < kWindowSamples; ++t) {
      out.data[j * kWindowSamples + t] = (window.at(j, t) - stats.mean[j]) * inv;
    }
  }
  return out;
}

nn::Network build_network(const TorqueNetConfig& config) {
  config.validate();
  nn::NetworkShape shape;
  shape.input_channels = config.input_channels;
  shape.filters.assign(config.blocks, config.filters_per_block);
  shape.kernel_size = config.kernel_size;
  shape.classes = config.classes;
  return nn::make_network(shape, config.seed);
}

namespace {

std::size_t argmax(std::span<const double> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

Split stratified_split(std::span<const LabeledWindow> data, double fraction, std::mt19937_64& rng) {
  std::array<std::vector<std::size_t>, kActionCount> by_class;
  for (std::size_t k = 0; k < data.size(); ++k) by_class[code(data[k].label)].push_back(k);
  Split split;
  for (std::size_t c = 0; c < kActionCount; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) {
      throw std::invalid_argument("training needs at least two examples of class '" +
                                  std::string(to_string(static_cast<ActionClass>(c))) + "', found " +
                                  std::to_string(idx.size()));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto held = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size()))), 1,
        idx.size() - 1);
    split.heldout.insert(split.heldout.end(), idx.begin(), idx.begin() + static_cast<long>(held));
    split.train.insert(split.train.end(), idx.begin() + static_cast<long>(held), idx.end());
  }
  std::sort(split.heldout.begin(), split.heldout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace

TrainingResult train(std::span<const LabeledWindow> dataset, const TorqueNetConfig& config,
                     const EpochCallback& on_epoch) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
  const Split split = stratified_split(dataset, config.holdout_fraction, rng);

  std::vector<LabeledWindow> train_windows;
  train_windows.reserve(split.train.size());
  for (auto k : split.train) train_windows.push_back(dataset[k]);

  TrainingResult result;
  TorqueModel& model = result.model;
  model.config = config;
  model.stats = compute_input_stats(train_windows);
  model.network = build_network(config);

  std::vector<nn::Tensor1D> inputs(dataset.size());
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    inputs[k] = normalize_input(dataset[k].window, model.stats);
  }

  nn::MomentumSgd optimizer(model.network, config.learning_rate, config.momentum);
  std::vector<std::size_t> order = split.train;
  std::vector<nn::Tensor1D> batch;
  std::vector<std::size_t> targets;
  auto& report = result.report;
  report.train_count = split.train.size();
  report.heldout_count = split.heldout.size();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      if (stop - start < 2) break;  // batch statistics need two samples
      batch.clear();
      targets.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(inputs[order[k]]);
        targets.push_back(static_cast<std::size_t>(code(dataset[order[k]].label)));
      }
      const nn::ForwardCache cache = nn::forward_train(model.network, batch);
      loss_sum += nn::mean_cross_entropy(cache, targets) * static_cast<double>(batch.size());
      for (std::size_t n = 0; n < batch.size(); ++n) {
        if (argmax(cache.probabilities[n]) == targets[n]) ++correct;
      }
      seen += batch.size();
      const nn::GradientTape tape = nn::backward(model.network, cache, targets);
      nn::commit_batch_statistics(model.network, cache);
      optimizer.step(model.network, tape);
    }

    std::size_t held_correct = 0;
    for (auto k : split.heldout) {
      if (argmax(nn::predict(model.network, inputs[k])) ==
          static_cast<std::size_t>(code(dataset[k].label))) {
        ++held_correct;
      }
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    m.train_accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    m.heldout_accuracy = static_cast<double>(held_correct) / static_cast<double>(split.heldout.size());
    report.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }

  for (auto k : split.heldout) {
    const auto pred = argmax(nn::predict(model.network, inputs[k]));
    ++report.confusion[code(dataset[k].label)][pred];
  }
  report.heldout_accuracy = confusion_accuracy(report.confusion);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

ActionScores classify_window(const TorqueModel& model, const TorqueWindow& window) {
  const auto probs = nn::predict(model.network, normalize_input(window, model.stats));
  return ActionScores::from_probabilities(probs);
}

bool torque_vote(const ActionScores& scores) noexcept {
  return expected_decision(scores.predicted) == Decision::Release;
}

EvaluationReport evaluate(const TorqueModel& model, std::span<const LabeledWindow> dataset) {
  EvaluationReport r;
  for (const auto& item : dataset) {
    const auto scores = classify_window(model, item.window);
    ++r.confusion[code(item.label)][code(scores.predicted)];
    ++r.total;
    if (scores.predicted == item.label) ++r.correct;
  }
  return r;
}

double confusion_accuracy(const ConfusionMatrix& m) noexcept {
  std::size_t total = 0;
  std::size_t trace = 0;
  for (std::size_t r = 0; r < kActionCount; ++r) {
    trace += m[r][r];
    for (auto v : m[r]) total += v;
  }
  return total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(total);
}

std::string format_confusion(const ConfusionMatrix& m) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s", "true\\pred");
  os << buf;
  for (auto a : kAllActions) {
    std::snprintf(buf, sizeof buf, "%10s", std::string(display_name(a)).c_str());
    os << buf;
  }
  os << '\n';
  for (auto a : kAllActions) {
    std::snprintf(buf, sizeof buf, "%-12s", std::string(display_name(a)).c_str());
    os << buf;
    for (auto v : m[code(a)]) {
      std::snprintf(buf, sizeof buf, "%10zu", v);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

json config_to_json(const TorqueNetConfig& c) {
  return json{{"blocks", c.blocks},
              {"filters_per_block", c.filters_per_block},
              {"kernel_size", c.kernel_size},
              {"classes", c.classes},
              {"input_shape", {c.input_channels, c.input_length}},
              {"seed", c.seed},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"batch_size", c.batch_size},
              {"holdout_fraction", c.holdout_fraction}};
}

TorqueNetConfig config_from_json(const json& j) {
  TorqueNetConfig c;
  c.blocks = j.value("blocks", c.blocks);
  c.filters_per_block = j.value("filters_per_block", c.filters_per_block);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.classes = j.value("classes", c.classes);
  if (j.contains("input_shape")) {
    c.input_channels = j.at("input_shape").at(0).get<std::size_t>();
    c.input_length = j.at("input_shape").at(1).get<std::size_t>();
  }
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.validate();
  return c;
}

json model_to_json(const TorqueModel& model) {
  json doc = nn::network_to_json(model.network);
  doc["config"] = config_to_json(model.config);
  doc["input_stats"] = {{"mean", model.stats.mean}, {"std", model.stats.stddev}};
  return doc;
}

TorqueModel model_from_json(const json& doc) {
  TorqueModel m;
  m.network = nn::network_from_json(doc);
  m.config = config_from_json(doc.at("config"));
  m.stats.mean = doc.at("input_stats").at("mean").get<std::array<double, kJointCount>>();
  m.stats.stddev = doc.at("input_stats").at("std").get<std::array<double, kJointCount>>();
  if (m.network.input_channels() != m.config.input_channels || m.network.classes() != kActionCount) {
    throw std::invalid_argument("model network does not match its config");
  }
  return m;
}

void save_model(const TorqueModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << model_to_json(model).dump() << '\n';
}

TorqueModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file " + path.string());
  return model_from_json(json::parse(in));
}

namespace {

json confusion_json(const ConfusionMatrix& m) {
  json rows = json::array();
  for (const auto& r : m) rows.push_back(r);
  return rows;
}

}  // namespace

json report_to_json(const TrainingReport& report) {
  json epochs = json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"train_accuracy", e.train_accuracy},
                      {"heldout_accuracy", e.heldout_accuracy}});
  }
  std::vector<std::string> labels;
  for (auto a : kAllActions) labels.emplace_back(to_string(a));
  return json{{"epochs", std::move(epochs)},
              {"classes", labels},
              {"confusion", confusion_json(report.confusion)},
              {"heldout_accuracy", report.heldout_accuracy},
              {"train_count", report.train_count},
              {"heldout_count", report.heldout_count},
              {"wall_clock_seconds", report.wall_clock_seconds}};
}

json evaluation_to_json(const EvaluationReport& report) {
  std::vector<std::string> labels;
  for (auto a : kAllActions) labels.emplace_back(to_string(a));
  return json{{"classes", labels},
              {"confusion", confusion_json(report.confusion)},
              {"total", report.total},
              {"correct", report.correct},
              {"accuracy", report.accuracy()}};
}

}  // namespace handover::classifier
