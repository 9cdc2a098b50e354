#pragma once

// Seeded synthetic sensor data: labeled torque windows for training, and
// three-second handover episodes (40 Hz torque, 30 Hz fingertip detections)
// for the pipeline experiments. The signature shapes are invented stand-ins
// for recorded human actions.

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "handover/core.hpp"
#include "handover/torque_classifier.hpp"
#include "json.hpp"

namespace handover::synth {

using classifier::LabeledWindow;
using JointVector = std::array<double, kJointCount>;

enum class ProfileShape : std::uint8_t { Null, Step, Ramp, Impulse };

struct ActionTemplate {
  ProfileShape shape = ProfileShape::Null;
  JointVector amplitude{};     // N·m at full deflection
  double onset_ms = 0.0;       // relative to the window start
  double onset_jitter_ms = 0.0;  // onset drawn uniformly from onset +/- jitter
  double duration_ms = 0.0;    // ramp rise time or impulse width
};

struct TorqueSignatureModel {
  JointVector baseline{};  // torque while the robot simply holds the object
  std::array<ActionTemplate, kActionCount> templates{};
  double noise_sigma = 0.4;       // N·m, white
  double amplitude_jitter = 0.2;  // window scale drawn from 1 +/- jitter

  static TorqueSignatureModel defaults();
  const ActionTemplate& of(ActionClass a) const { return templates[code(a)]; }
  void validate() const;
};

// Unit-amplitude profile value at the given time since onset.
double profile_value(ProfileShape shape, double since_onset_ms, double duration_ms) noexcept;

LabeledWindow generate_window(const TorqueSignatureModel& model, ActionClass action,
                              std::uint64_t seed);

// Balanced: per_class_count windows of every class, class-interleaved.
std::vector<LabeledWindow> generate_dataset(const TorqueSignatureModel& model,
                                            std::size_t per_class_count, std::uint64_t seed);

// Per-trial corruption probabilities. Behavioural faults act on one action
// class; detection faults act per frame.
struct FaultProfile {
  double noaction_fidget = 0.12;  // receiver rests a hand on the object: hold-like torque, no grasp
  double bump_linger = 0.30;      // bump followed by a sustained lean: hold-like torque
  double bump_brush = 0.20;       // fingers and thumb sweep through the slab during a bump
  double push_recoil = 0.03;      // receiver pulls back after pushing
  std::array<double, kActionCount> weak_action{0.0, 0.0, 0.0, 0.05, 0.02, 0.03};
  std::array<double, kActionCount> thumb_occlusion{0.0, 0.0, 0.0, 0.02, 0.0, 0.03};
  double finger_dropout = 0.04;      // per detection and frame
  double frame_drop = 0.02;          // whole camera frame lost
  double spurious_detection = 0.05;  // low-confidence phantom fingertip per frame
  double extra_torque_noise = 0.0;   // N·m added to the model's noise sigma

  static FaultProfile none();
  void validate() const;
};

struct ScenarioFaults {
  bool fidget = false;
  bool linger = false;
  bool brush = false;
  bool recoil = false;
  bool weak = false;
  bool thumb_occluded = false;
  friend bool operator==(const ScenarioFaults&, const ScenarioFaults&) = default;
};

struct TorqueSample {
  TimestampMs timestamp = 0;
  JointVector torque{};
  friend bool operator==(const TorqueSample&, const TorqueSample&) = default;
};

struct DetectionFrame {
  TimestampMs timestamp = 0;
  std::vector<FingertipDetection> detections;
  friend bool operator==(const DetectionFrame&, const DetectionFrame&) = default;
};

inline constexpr TimestampMs kEpisodeMs = 3000;
inline constexpr double kCameraHz = 30.0;

struct ScenarioScript {
  ActionClass action = ActionClass::NoAction;
  std::uint64_t seed = 0;
  ObjectSlab slab;
  TimestampMs contact_ms = 0;
  TimestampMs action_onset_ms = 0;
  // Interval during which >= 3 fingers including the thumb sit in the slab
  // (before detection noise); empty when the grasp never forms.
  std::optional<std::pair<TimestampMs, TimestampMs>> grasp_interval;
  ScenarioFaults faults;
  std::vector<TorqueSample> torque;   // 40 Hz
  std::vector<DetectionFrame> frames;  // ~30 Hz

  friend bool operator==(const ScenarioScript&, const ScenarioScript&) = default;
};

ScenarioScript generate_scenario(ActionClass action, const FaultProfile& faults, std::uint64_t seed,
                                 const TorqueSignatureModel& model = TorqueSignatureModel::defaults());

// The one-second window whose last sample is torque[last_index].
TorqueWindow window_ending_at(const ScenarioScript& script, std::size_t last_index);

// JSONL: one LabeledWindow per line.
void write_dataset_jsonl(std::ostream& out, const std::vector<LabeledWindow>& data);
std::vector<LabeledWindow> read_dataset_jsonl(std::istream& in);

// JSONL stream events: a scenario header, then torque samples and detection
// frames merged in time order.
void write_scenario_jsonl(std::ostream& out, const ScenarioScript& script);

// Partial objects are accepted; missing keys keep their defaults.
nlohmann::json fault_profile_to_json(const FaultProfile& f);
FaultProfile fault_profile_from_json(const nlohmann::json& j, FaultProfile base = {});

// splitmix64 mix of a base seed and two indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept;

}  // namespace handover::synth
