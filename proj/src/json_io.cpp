#include "handover/json_io.hpp"

#include <stdexcept>
#include <string>

namespace handover {

using nlohmann::json;

void to_json(json& j, const TorqueWindow& w) {
  json rows = json::array();
  for (const auto& row : w.samples()) rows.push_back(row);
  j = json{{"start_time", w.start_time()}, {"sample_rate_hz", TorqueWindow::sample_rate_hz()},
           {"samples", std::move(rows)}};
}

void from_json(const json& j, TorqueWindow& w) {
  if (j.contains("sample_rate_hz") && j.at("sample_rate_hz").get<int>() != kSampleRateHz) {
    throw std::invalid_argument("torque window sample rate must be 40 Hz");
  }
  w = TorqueWindow::from_rows(j.at("samples").get<std::vector<std::vector<double>>>(),
                              j.value("start_time", TimestampMs{0}));
}

void to_json(json& j, const ActionScores& s) {
  j = json{{"probabilities", s.probabilities}, {"predicted", std::string(to_string(s.predicted))}};
}

void from_json(const json& j, ActionScores& s) {
  const auto p = j.at("probabilities").get<std::vector<double>>();
  s = ActionScores::from_probabilities(p);
  if (j.contains("predicted") &&
      action_from_string(j.at("predicted").get<std::string>()) != s.predicted) {
    throw std::invalid_argument("predicted class disagrees with probabilities");
  }
}

void to_json(json& j, const NormalizedBox& b) {
  j = json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

void from_json(const json& j, NormalizedBox& b) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw std::invalid_argument("box must have 4 coordinates");
  b = NormalizedBox{v[0], v[1], v[2], v[3]};
}

void to_json(json& j, const Point3& p) { j = json::array({p.x, p.y, p.z}); }

void from_json(const json& j, Point3& p) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw std::invalid_argument("point must have 3 coordinates");
  p = Point3{v[0], v[1], v[2]};
}

void to_json(json& j, const FingertipDetection& d) {
  j = json{{"box", d.box},
           {"finger_type", std::string(to_string(d.finger_type))},
           {"position_3d", d.position_3d},
           {"confidence", d.confidence},
           {"timestamp", d.timestamp}};
}

void from_json(const json& j, FingertipDetection& d) {
  FingertipDetection out;
  out.box = j.at("box").get<NormalizedBox>();
  out.finger_type = finger_type_from_string(j.at("finger_type").get<std::string>());
  out.position_3d = j.at("position_3d").get<Point3>();
  out.confidence = j.at("confidence").get<double>();
  out.timestamp = j.at("timestamp").get<TimestampMs>();
  out.validate();
  d = out;
}

void to_json(json& j, const ObjectSlab& s) { j = json{{"z_front", s.z_front}, {"z_back", s.z_back}}; }

void from_json(const json& j, ObjectSlab& s) {
  ObjectSlab out{j.at("z_front").get<double>(), j.at("z_back").get<double>()};
  out.validate();
  s = out;
}

void to_json(json& j, const ReleaseDecision& d) {
  j = json{{"release", d.release},
           {"torque_vote", d.torque_vote},
           {"vision_vote", d.vision_vote},
           {"action", std::string(to_string(d.action))},
           {"decided_at", d.decided_at}};
}

void from_json(const json& j, ReleaseDecision& d) {
  d = ReleaseDecision{j.at("release").get<bool>(), j.at("torque_vote").get<bool>(),
                      j.at("vision_vote").get<bool>(),
                      action_from_string(j.at("action").get<std::string>()),
                      j.at("decided_at").get<TimestampMs>()};
  if (d.release != (d.torque_vote && d.vision_vote)) {
    throw std::invalid_argument("release must equal torque_vote AND vision_vote");
  }
}

}  // namespace handover

namespace handover::classifier {

void to_json(nlohmann::json& j, const LabeledWindow& w) {
  j = nlohmann::json{{"label", std::string(to_string(w.label))}, {"window", w.window}};
}

void from_json(const nlohmann::json& j, LabeledWindow& w) {
  w.label = action_from_string(j.at("label").get<std::string>());
  w.window = j.at("window").get<TorqueWindow>();
}

}  // namespace handover::classifier

namespace handover::vision {

void to_json(nlohmann::json& j, const VisionVerdict& v) {
  j = nlohmann::json{{"vote", v.vote},
                     {"fingers_in_slab", v.fingers_in_slab},
                     {"thumb_in_slab", v.thumb_in_slab},
                     {"evaluated_at", v.evaluated_at}};
}

void from_json(const nlohmann::json& j, VisionVerdict& v) {
  v.vote = j.at("vote").get<bool>();
  v.fingers_in_slab = j.at("fingers_in_slab").get<int>();
  v.thumb_in_slab = j.at("thumb_in_slab").get<bool>();
  v.evaluated_at = j.at("evaluated_at").get<TimestampMs>();
  if (v.fingers_in_slab < 0) throw std::invalid_argument("fingers_in_slab must be >= 0");
}

}  // namespace handover::vision
