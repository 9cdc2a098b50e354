#include "handover/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace handover {

namespace {

struct ActionNames {
  ActionClass action;
  std::string_view id;
  std::string_view display;
};

constexpr std::array<ActionNames, kActionCount> kActionNames{{
    {ActionClass::NoAction, "no_action", "no action"},
    {ActionClass::Bump, "bump", "bump"},
    {ActionClass::Push, "push", "push"},
    {ActionClass::Hold, "hold", "hold"},
    {ActionClass::Pull, "pull", "pull"},
    {ActionClass::PullUp, "pull_up", "pull-up"},
}};

void check_sample(double v) {
  if (!std::isfinite(v) || v < -kTorqueLimitNm || v > kTorqueLimitNm) {
    throw std::invalid_argument("torque sample out of range: " + std::to_string(v));
  }
}

}  // namespace

ActionClass action_from_code(int c) {
  if (c < 0 || c >= static_cast<int>(kActionCount)) {
    throw std::invalid_argument("action code out of range: " + std::to_string(c));
  }
  return static_cast<ActionClass>(c);
}

std::string_view to_string(ActionClass a) noexcept { return kActionNames[code(a)].id; }

std::string_view display_name(ActionClass a) noexcept { return kActionNames[code(a)].display; }

ActionClass action_from_string(std::string_view name) {
  for (const auto& n : kActionNames) {
    if (n.id == name) return n.action;
  }
  throw std::invalid_argument("unknown action: " + std::string(name));
}

std::string_view to_string(Decision d) noexcept {
  return d == Decision::Release ? "release" : "do_not_release";
}

Decision decision_from_string(std::string_view name) {
  if (name == "release") return Decision::Release;
  if (name == "do_not_release") return Decision::DoNotRelease;
  throw std::invalid_argument("unknown decision: " + std::string(name));
}

Decision expected_decision(ActionClass action) noexcept {
  switch (action) {
    case ActionClass::Hold:
    case ActionClass::Pull:
    case ActionClass::PullUp:
      return Decision::Release;
    case ActionClass::NoAction:
    case ActionClass::Bump:
    case ActionClass::Push:
      break;
  }
  return Decision::DoNotRelease;
}

SuccessCriteria success_criteria() noexcept {
  SuccessCriteria table{};
  for (std::size_t i = 0; i < kActionCount; ++i) {
    table[i] = {kAllActions[i], expected_decision(kAllActions[i])};
  }
  return table;
}

TorqueWindow::TorqueWindow(const Samples& samples, TimestampMs start_time)
    : samples_(samples), start_time_(start_time) {
  for (const auto& row : samples_) {
    for (double v : row) check_sample(v);
  }
}

TorqueWindow TorqueWindow::from_rows(const std::vector<std::vector<double>>& rows,
                                     TimestampMs start_time) {
  if (rows.size() != kJointCount) {
    throw std::invalid_argument("torque window needs 7 joint rows, got " +
                                std::to_string(rows.size()));
  }
  Samples samples{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (rows[j].size() != kWindowSamples) {
      throw std::invalid_argument("torque window row " + std::to_string(j) + " has " +
                                  std::to_string(rows[j].size()) + " samples, expected 40");
    }
    std::copy(rows[j].begin(), rows[j].end(), samples[j].begin());
  }
  return TorqueWindow(samples, start_time);
}

std::vector<double> flatten(const TorqueWindow& window) {
  std::vector<double> out;
  out.reserve(kFlatWindowSize);
  for (const auto& row : window.samples()) out.insert(out.end(), row.begin(), row.end());
  return out;
}

TorqueWindow unflatten(std::span<const double> values, TimestampMs start_time) {
  if (values.size() != kFlatWindowSize) {
    throw std::invalid_argument("flattened torque window must hold 280 values, got " +
                                std::to_string(values.size()));
  }
  TorqueWindow::Samples samples{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (std::size_t t = 0; t < kWindowSamples; ++t) {
      samples[j][t] = values[j * kWindowSamples + t];
    }
  }
  return TorqueWindow(samples, start_time);
}

ActionScores ActionScores::from_probabilities(std::span<const double> probabilities) {
  if (probabilities.size() != kActionCount) {
    throw std::invalid_argument("action scores need 6 probabilities");
  }
  ActionScores s;
  double sum = 0.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < kActionCount; ++i) {
    const double p = probabilities[i];
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("action probability must be finite and non-negative");
    }
    s.probabilities[i] = p;
    sum += p;
    if (p > s.probabilities[best]) best = i;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("action probabilities must sum to 1");
  }
  s.predicted = static_cast<ActionClass>(best);
  return s;
}

ActionScores ActionScores::one_hot(ActionClass action) {
  ActionScores s;
  s.probabilities[code(action)] = 1.0;
  s.predicted = action;
  return s;
}

bool NormalizedBox::valid() const noexcept {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return in_unit(x_min) && in_unit(y_min) && in_unit(x_max) && in_unit(y_max) &&
         x_min < x_max && y_min < y_max;
}

std::string_view to_string(FingerType f) noexcept {
  return f == FingerType::Thumb ? "thumb" : "other";
}

FingerType finger_type_from_string(std::string_view name) {
  if (name == "thumb") return FingerType::Thumb;
  if (name == "other") return FingerType::Other;
  throw std::invalid_argument("unknown finger type: " + std::string(name));
}

void FingertipDetection::validate() const {
  if (!box.valid()) throw std::invalid_argument("fingertip box is not a valid normalized box");
  if (!std::isfinite(position_3d.x) || !std::isfinite(position_3d.y) ||
      !std::isfinite(position_3d.z) || position_3d.z < 0.0) {
    throw std::invalid_argument("fingertip position must be finite with z >= 0");
  }
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw std::invalid_argument("fingertip confidence must lie in [0,1]");
  }
}

void ObjectSlab::validate() const {
  if (!(std::isfinite(z_front) && std::isfinite(z_back) && z_front > 0.0 && z_front < z_back)) {
    throw std::invalid_argument("object slab needs 0 < z_front < z_back");
  }
}

ReleaseDecision make_decision(bool torque_vote, bool vision_vote, ActionClass action,
                              TimestampMs decided_at) noexcept {
  return ReleaseDecision{torque_vote && vision_vote, torque_vote, vision_vote, action, decided_at};
}

}  // namespace handover
