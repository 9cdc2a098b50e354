#pragma once

// Torque-window action classifier: three conv blocks (64 filters, kernel 3)
// over the flattened 280-sample window, global average pooling, a dense map
// to six logits and softmax. Includes the seeded training loop.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "handover/core.hpp"
#include "handover/nn/network.hpp"
#include "json.hpp"

namespace handover::classifier {

struct TorqueNetConfig {
  std::size_t blocks = 3;
  std::size_t filters_per_block = 64;
  std::size_t kernel_size = 3;
  std::size_t classes = kActionCount;
  std::size_t input_channels = 1;
  std::size_t input_length = kFlatWindowSize;
  std::uint64_t seed = 20210;
  std::size_t epochs = 30;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  double holdout_fraction = 0.2;

  static TorqueNetConfig reference_preset() { return {}; }
  bool is_reference_preset() const noexcept;
  void validate() const;
};

struct LabeledWindow {
  TorqueWindow window;
  ActionClass label = ActionClass::NoAction;
  friend bool operator==(const LabeledWindow&, const LabeledWindow&) = default;
};

// Per-joint z-score parameters, estimated on the training split only.
struct InputStats {
  std::array<double, kJointCount> mean{};
  std::array<double, kJointCount> stddev{};
  friend bool operator==(const InputStats&, const InputStats&) = default;
};

inline constexpr double kMinInputStd = 1e-6;

InputStats compute_input_stats(std::span<const LabeledWindow> windows);

// (x - mean) / max(std, 1e-6) per joint, then flattened to 1 x 280.
nn::Tensor1D normalize_input(const TorqueWindow& window, const InputStats& stats);

nn::Network build_network(const TorqueNetConfig& config);

using ConfusionMatrix = std::array<std::array<std::size_t, kActionCount>, kActionCount>;

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
};

struct TrainingReport {
  std::vector<EpochMetrics> epochs;
  ConfusionMatrix confusion{};  // rows: true class, columns: predicted
  double heldout_accuracy = 0.0;
  std::size_t train_count = 0;
  std::size_t heldout_count = 0;
  double wall_clock_seconds = 0.0;
};

struct TorqueModel {
  nn::Network network;
  InputStats stats;
  TorqueNetConfig config;
};

struct TrainingResult {
  TorqueModel model;
  TrainingReport report;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Stratified split (holdout_fraction per class, seeded), per-epoch shuffles,
// momentum SGD. Throws if any class has fewer than two examples.
TrainingResult train(std::span<const LabeledWindow> dataset, const TorqueNetConfig& config,
                     const EpochCallback& on_epoch = {});

// Pure: batchnorm uses the frozen running statistics.
ActionScores classify_window(const TorqueModel& model, const TorqueWindow& window);

// Release-type action: Hold, Pull or PullUp.
bool torque_vote(const ActionScores& scores) noexcept;

struct EvaluationReport {
  ConfusionMatrix confusion{};
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

EvaluationReport evaluate(const TorqueModel& model, std::span<const LabeledWindow> dataset);

double confusion_accuracy(const ConfusionMatrix& m) noexcept;
std::string format_confusion(const ConfusionMatrix& m);

nlohmann::json config_to_json(const TorqueNetConfig& c);
TorqueNetConfig config_from_json(const nlohmann::json& j);

// tcnn-v1 network document plus "config" and "input_stats".
nlohmann::json model_to_json(const TorqueModel& model);
TorqueModel model_from_json(const nlohmann::json& doc);
void save_model(const TorqueModel& model, const std::filesystem::path& path);
TorqueModel load_model(const std::filesystem::path& path);

nlohmann::json report_to_json(const TrainingReport& report);
nlohmann::json evaluation_to_json(const EvaluationReport& report);

}  // namespace handover::classifier
