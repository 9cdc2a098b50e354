#pragma once

// Shared domain types for the handover release pipeline.
//
// Everything here is a plain value type. Constructors validate their
// invariants and throw std::invalid_argument on violation, so any instance
// that exists is well-formed.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace handover {

using TimestampMs = std::int64_t;

inline constexpr std::size_t kJointCount = 7;
inline constexpr std::size_t kWindowSamples = 40;
inline constexpr int kSampleRateHz = 40;
inline constexpr TimestampMs kSamplePeriodMs = 1000 / kSampleRateHz;
inline constexpr std::size_t kFlatWindowSize = kJointCount * kWindowSamples;
inline constexpr double kTorqueLimitNm = 35.0;
inline constexpr std::size_t kActionCount = 6;

// Stable codes 0..5; the order is also the report row order.
enum class ActionClass : std::uint8_t {
  NoAction = 0,
  Bump = 1,
  Push = 2,
  Hold = 3,
  Pull = 4,
  PullUp = 5,
};

inline constexpr std::array<ActionClass, kActionCount> kAllActions{
    ActionClass::NoAction, ActionClass::Bump, ActionClass::Push,
    ActionClass::Hold,     ActionClass::Pull, ActionClass::PullUp};

constexpr int code(ActionClass a) noexcept { return static_cast<int>(a); }
ActionClass action_from_code(int code);

// snake_case identifier used in JSON ("no_action", "pull_up", ...).
std::string_view to_string(ActionClass a) noexcept;
ActionClass action_from_string(std::string_view name);
// Human-facing label used in report tables ("no action", "pull-up", ...).
std::string_view display_name(ActionClass a) noexcept;

enum class Decision : std::uint8_t { DoNotRelease, Release };

std::string_view to_string(Decision d) noexcept;
Decision decision_from_string(std::string_view name);

/// Success criterion for each receiver action: NoAction, Bump and Push must
/// not release; Hold, Pull and PullUp must release.
Decision expected_decision(ActionClass action) noexcept;

using SuccessCriteria = std::array<std::pair<ActionClass, Decision>, kActionCount>;
SuccessCriteria success_criteria() noexcept;

/// One second of 7-joint torque at 40 Hz. Samples are N·m, finite and
/// within +/-35.
class TorqueWindow {
 public:
  using Row = std::array<double, kWindowSamples>;
  using Samples = std::array<Row, kJointCount>;

  TorqueWindow() = default;
  explicit TorqueWindow(const Samples& samples, TimestampMs start_time = 0);

  // Rejects anything that is not exactly 7 rows of 40 columns.
  static TorqueWindow from_rows(const std::vector<std::vector<double>>& rows,
                                TimestampMs start_time = 0);

  double at(std::size_t joint, std::size_t step) const { return samples_[joint][step]; }
  const Samples& samples() const noexcept { return samples_; }
  TimestampMs start_time() const noexcept { return start_time_; }
  static constexpr int sample_rate_hz() noexcept { return kSampleRateHz; }

  friend bool operator==(const TorqueWindow&, const TorqueWindow&) = default;

 private:
  Samples samples_{};
  TimestampMs start_time_ = 0;
};

// Joint-major: joint 0 samples 0..39, then joint 1, ...
std::vector<double> flatten(const TorqueWindow& window);
TorqueWindow unflatten(std::span<const double> values, TimestampMs start_time = 0);

struct ActionScores {
  std::array<double, kActionCount> probabilities{};
  ActionClass predicted = ActionClass::NoAction;

  // Validates the distribution and sets predicted to the argmax; ties go to
  // the lowest class code.
  static ActionScores from_probabilities(std::span<const double> probabilities);
  static ActionScores one_hot(ActionClass action);

  friend bool operator==(const ActionScores&, const ActionScores&) = default;
};

struct NormalizedBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  // x_min < x_max, y_min < y_max, everything inside [0,1].
  bool valid() const noexcept;

  friend bool operator==(const NormalizedBox&, const NormalizedBox&) = default;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

enum class FingerType : std::uint8_t { Thumb, Other };

std::string_view to_string(FingerType f) noexcept;
FingerType finger_type_from_string(std::string_view name);

struct FingertipDetection {
  NormalizedBox box;
  FingerType finger_type = FingerType::Other;
  Point3 position_3d;  // meters, camera frame
  double confidence = 0.0;
  TimestampMs timestamp = 0;

  void validate() const;
  friend bool operator==(const FingertipDetection&, const FingertipDetection&) = default;
};

/// Camera-frame depths of the object's front and back planes.
struct ObjectSlab {
  double z_front = 0.0;
  double z_back = 0.0;

  void validate() const;
  friend bool operator==(const ObjectSlab&, const ObjectSlab&) = default;
};

struct ReleaseDecision {
  bool release = false;
  bool torque_vote = false;
  bool vision_vote = false;
  ActionClass action = ActionClass::NoAction;
  TimestampMs decided_at = 0;

  friend bool operator==(const ReleaseDecision&, const ReleaseDecision&) = default;
};

ReleaseDecision make_decision(bool torque_vote, bool vision_vote, ActionClass action,
                              TimestampMs decided_at) noexcept;

}  // namespace handover
