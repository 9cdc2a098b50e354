#pragma once

// JSON encodings of the shared value types (nlohmann ADL hooks). Enums are
// written as their snake_case names; decoding validates through the same
// constructors as in-memory values.

#include "handover/core.hpp"
#include "handover/torque_classifier.hpp"
#include "handover/vision_gate.hpp"
#include "json.hpp"

namespace handover {

void to_json(nlohmann::json& j, const TorqueWindow& w);
void from_json(const nlohmann::json& j, TorqueWindow& w);

void to_json(nlohmann::json& j, const ActionScores& s);
void from_json(const nlohmann::json& j, ActionScores& s);

void to_json(nlohmann::json& j, const NormalizedBox& b);
void from_json(const nlohmann::json& j, NormalizedBox& b);

void to_json(nlohmann::json& j, const Point3& p);
void from_json(const nlohmann::json& j, Point3& p);

void to_json(nlohmann::json& j, const FingertipDetection& d);
void from_json(const nlohmann::json& j, FingertipDetection& d);

void to_json(nlohmann::json& j, const ObjectSlab& s);
void from_json(const nlohmann::json& j, ObjectSlab& s);

void to_json(nlohmann::json& j, const ReleaseDecision& d);
void from_json(const nlohmann::json& j, ReleaseDecision& d);

}  // namespace handover

namespace handover::classifier {

void to_json(nlohmann::json& j, const LabeledWindow& w);
void from_json(const nlohmann::json& j, LabeledWindow& w);

}  // namespace handover::classifier

namespace handover::vision {

void to_json(nlohmann::json& j, const VisionVerdict& v);
void from_json(const nlohmann::json& j, VisionVerdict& v);

}  // namespace handover::vision
