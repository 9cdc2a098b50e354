#pragma once

// Time alignment of torque and vision verdicts, the release state machine,
// and episode execution for the torque-only, vision-only and fused pipelines.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "handover/core.hpp"
#include "handover/synth.hpp"
#include "handover/torque_classifier.hpp"
#include "handover/vision_gate.hpp"
#include "json.hpp"

namespace handover::fusion {

struct SyncConfig {
  TimestampMs pairing_window_ms = 100;
  std::uint32_t debounce_frames = 3;

  void validate() const;
  friend bool operator==(const SyncConfig&, const SyncConfig&) = default;
};

struct TorqueEvent {
  TimestampMs timestamp = 0;  // time of the window's last sample
  ActionScores scores;
  friend bool operator==(const TorqueEvent&, const TorqueEvent&) = default;
};

struct VisionEvent {
  TimestampMs timestamp = 0;
  vision::VisionVerdict verdict;
  friend bool operator==(const VisionEvent&, const VisionEvent&) = default;
};

struct FusedSample {
  TorqueEvent torque;
  VisionEvent vision;
  bool fused_vote = false;  // torque_vote AND vision vote
  TimestampMs skew_ms = 0;  // torque time minus vision time, >= 0
  friend bool operator==(const FusedSample&, const FusedSample&) = default;
};

FusedSample fuse(const TorqueEvent& torque, const VisionEvent& vision);

struct SyncResult {
  std::vector<FusedSample> samples;
  std::size_t dropped = 0;  // torque events with no vision verdict in reach
};

// Causal pairing: each torque event takes the latest vision event with
// t_v <= t_torque and t_torque - t_v <= pairing_window_ms; unpaired torque
// events are counted and dropped. Both inputs must be sorted by time.
SyncResult synchronize(std::span<const TorqueEvent> torque, std::span<const VisionEvent> vision,
                       const SyncConfig& config);

enum class FsmState : std::uint8_t { HoldingIdle, ContactPending, ReleaseArmed, Released };

std::string_view to_string(FsmState s) noexcept;
FsmState fsm_state_from_string(std::string_view name);

struct FsmStatus {
  FsmState state = FsmState::HoldingIdle;
  std::uint32_t streak = 0;  // consecutive positive votes since contact
  friend bool operator==(const FsmStatus&, const FsmStatus&) = default;
};

// What one state-machine step consumes.
struct GateInput {
  TimestampMs timestamp = 0;
  bool contact = false;  // any fingertip in the slab
  bool torque_vote = false;
  bool vision_vote = false;
  ActionClass action = ActionClass::NoAction;
};

GateInput gate_input(const FusedSample& sample);

struct Transition {
  FsmState from = FsmState::HoldingIdle;
  FsmState to = FsmState::HoldingIdle;
  TimestampMs at = 0;
  friend bool operator==(const Transition&, const Transition&) = default;
};

struct StepResult {
  FsmStatus status;
  std::vector<Transition> transitions;
  std::optional<ReleaseDecision> decision;  // set on the step that releases
};

// HoldingIdle -> ContactPending on contact (the same step's vote counts).
// Each positive vote extends the streak, a negative one resets it; reaching
// debounce_frames passes through ReleaseArmed to Released and emits the
// decision. Released is terminal: stepping it throws std::logic_error.
StepResult fsm_step(const FsmStatus& status, const GateInput& input, const SyncConfig& config);
StepResult fsm_step(const FsmStatus& status, const FusedSample& sample, const SyncConfig& config);

enum class Pipeline : std::uint8_t { TorqueOnly, VisionOnly, Fused };

inline constexpr std::array<Pipeline, 3> kAllPipelines{Pipeline::TorqueOnly, Pipeline::VisionOnly,
                                                       Pipeline::Fused};

std::string_view to_string(Pipeline p) noexcept;
Pipeline pipeline_from_string(std::string_view name);

struct EpisodeConfig {
  SyncConfig sync;
  std::size_t stride_samples = 5;  // torque classification every 125 ms
  double min_confidence = vision::kDefaultMinConfidence;

  void validate() const;
};

// Sliding one-second windows over the torque stream.
std::vector<TorqueEvent> classify_stream(const synth::ScenarioScript& script,
                                         const classifier::TorqueModel& model,
                                         std::size_t stride_samples);

std::vector<VisionEvent> evaluate_stream(const synth::ScenarioScript& script,
                                         double min_confidence);

struct EpisodeOutcome {
  Pipeline pipeline = Pipeline::Fused;
  ActionClass action = ActionClass::NoAction;  // ground truth
  std::optional<ReleaseDecision> decision;
  std::size_t steps = 0;
  std::size_t dropped = 0;

  bool released() const noexcept { return decision.has_value() && decision->release; }
  bool success() const noexcept {
    return released() == (expected_decision(action) == Decision::Release);
  }
};

// Collects JSONL episode events. Lines carry the trial id and pipeline, so
// several episodes can share one log.
class EpisodeLog {
 public:
  void begin(const std::string& trial_id, Pipeline p, ActionClass truth, const SyncConfig& sync);
  void sample(const nlohmann::json& payload, const GateInput& gate);
  void transition(const Transition& t);
  void decision(const ReleaseDecision& d);
  void end(const EpisodeOutcome& outcome);

  const std::vector<nlohmann::json>& lines() const noexcept { return lines_; }
  void write(std::ostream& out) const;

 private:
  nlohmann::json stamp(const char* event) const;

  std::vector<nlohmann::json> lines_;
  std::string trial_id_;
  Pipeline pipeline_ = Pipeline::Fused;
  std::size_t index_ = 0;
};

// Runs one pipeline over precomputed streams until release or the end of
// the episode. The streams the pipeline reads must be non-empty.
EpisodeOutcome run_pipeline(Pipeline pipeline, ActionClass truth,
                            std::span<const TorqueEvent> torque, std::span<const VisionEvent> vision,
                            const SyncConfig& sync, EpisodeLog* log = nullptr,
                            const std::string& trial_id = "trial");

EpisodeOutcome run_episode(const synth::ScenarioScript& script, const classifier::TorqueModel& model,
                           const EpisodeConfig& config, Pipeline pipeline = Pipeline::Fused,
                           EpisodeLog* log = nullptr, const std::string& trial_id = "trial");

struct ReplayEpisode {
  std::string trial_id;
  Pipeline pipeline = Pipeline::Fused;
  bool matches = false;
  std::optional<ReleaseDecision> logged;
  std::optional<ReleaseDecision> replayed;
};

struct ReplayReport {
  std::vector<ReplayEpisode> episodes;
  std::size_t mismatches = 0;
};

// Re-runs the state machine from the logged samples and compares decisions
// and transitions with the logged ones.
ReplayReport replay_log(std::istream& in);

nlohmann::json torque_event_json(const TorqueEvent& e);
nlohmann::json vision_event_json(const VisionEvent& e);
nlohmann::json fused_sample_json(const FusedSample& s);
TorqueEvent torque_event_from_json(const nlohmann::json& j);
VisionEvent vision_event_from_json(const nlohmann::json& j);
FusedSample fused_sample_from_json(const nlohmann::json& j);

}  // namespace handover::fusion
