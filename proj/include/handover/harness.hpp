#pragma once

// Trial loop over actions x trials x pipelines, the per-action results
// table, and the acceptance gates on it.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "handover/fusion.hpp"
#include "handover/synth.hpp"
#include "handover/torque_classifier.hpp"
#include "json.hpp"

namespace handover::harness {

using fusion::Pipeline;

struct GateConfig {
  bool vision_push_zero = true;    // vision-only never succeeds on push
  double fused_min_rate = 0.95;    // fused overall success rate floor
  bool fused_dominates = true;     // fused >= torque-only and >= vision-only
};

struct ExperimentConfig {
  std::size_t trials_per_action = 30;
  std::vector<ActionClass> actions{kAllActions.begin(), kAllActions.end()};
  std::vector<Pipeline> pipelines{fusion::kAllPipelines.begin(), fusion::kAllPipelines.end()};
  std::uint64_t seed = 2021;
  synth::FaultProfile faults;
  fusion::EpisodeConfig episode;
  GateConfig gates;

  std::string model_path;  // empty: train one unless training is disabled
  std::string out_dir = "out";
  bool train_if_missing = true;
  // Used when no trained model is supplied.
  std::size_t training_per_class = 300;
  std::size_t training_epochs = 30;

  void validate() const;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& c);
// Missing keys keep the values already in base.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

struct TrialRecord {
  ActionClass action = ActionClass::NoAction;
  std::size_t trial = 0;
  Pipeline pipeline = Pipeline::Fused;
  std::uint64_t seed = 0;
  bool released = false;
  bool success = false;
  std::optional<TimestampMs> release_time;
  std::size_t steps = 0;
  std::size_t dropped = 0;
  std::string trial_id;  // episodes.jsonl lines carry this id and the pipeline
};

nlohmann::json trial_record_json(const TrialRecord& r);

struct CellCounts {
  std::size_t success = 0;
  std::size_t failure = 0;
  std::size_t total() const noexcept { return success + failure; }
};

struct ReportTable {
  std::size_t trials_per_action = 0;
  std::vector<ActionClass> actions;
  std::vector<Pipeline> pipelines;
  std::array<std::array<CellCounts, 3>, kActionCount> cells{};

  const CellCounts& at(ActionClass a, Pipeline p) const {
    return cells[code(a)][static_cast<std::size_t>(p)];
  }
  CellCounts& at(ActionClass a, Pipeline p) { return cells[code(a)][static_cast<std::size_t>(p)]; }
  bool has(Pipeline p) const;
  bool has(ActionClass a) const;
  CellCounts overall(Pipeline p) const;
  double rate(Pipeline p) const;  // overall success fraction
};

ReportTable tabulate(const std::vector<TrialRecord>& trials, const ExperimentConfig& config);

struct GateResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<GateResult> evaluate_gates(const ReportTable& table, const GateConfig& gates);
bool all_passed(const std::vector<GateResult>& gates) noexcept;

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  ReportTable table;
  std::vector<GateResult> gates;
  fusion::EpisodeLog log;
};

// One scenario per (action, trial) shared by every pipeline. Deterministic
// given the config and the model.
ExperimentResult run_experiment(const ExperimentConfig& config, const classifier::TorqueModel& model);

// Synthesizes a balanced dataset from the config seed and trains on it.
struct TrainedModel {
  classifier::TorqueModel model;
  classifier::TrainingReport report;
  std::vector<classifier::LabeledWindow> dataset;
};
TrainedModel train_default_model(const ExperimentConfig& config);

// Loads config.model_path, or trains when it is empty and training is
// allowed; throws otherwise. dataset is filled only when training ran.
TrainedModel obtain_model(const ExperimentConfig& config);

// "79%": whole percent, half away from zero.
std::string format_percent(std::size_t successes, std::size_t trials);

std::string render_report_text(const ReportTable& table, const std::vector<GateResult>& gates);
nlohmann::json render_report_json(const ReportTable& table, const std::vector<GateResult>& gates);

// trials.jsonl, episodes.jsonl, report.txt, report.json under out_dir.
void write_artifacts(const std::filesystem::path& out_dir, const ExperimentResult& result);

}  // namespace handover::harness
