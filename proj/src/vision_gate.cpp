#include "handover/vision_gate.hpp"

#include <algorithm>
#include <stdexcept>

namespace handover::vision {

bool in_slab(const FingertipDetection& detection, const ObjectSlab& slab) {
  slab.validate();
  const double z = detection.position_3d.z;
  return slab.z_front <= z && z <= slab.z_back;
}

VisionVerdict evaluate_frame(std::span<const FingertipDetection> detections, TimestampMs frame_time,
                             const ObjectSlab& slab, double min_confidence) {
  slab.validate();
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
    throw std::invalid_argument("min_confidence must lie in [0,1]");
  }
  VisionVerdict v;
  v.evaluated_at = frame_time;
  for (const auto& d : detections) {
    if (d.confidence < min_confidence || !in_slab(d, slab)) continue;
    ++v.fingers_in_slab;
    if (d.finger_type == FingerType::Thumb) v.thumb_in_slab = true;
  }
  v.vote = v.fingers_in_slab >= static_cast<int>(kMinFingersInSlab) && v.thumb_in_slab;
  return v;
}

VisionVerdict evaluate_grasp(std::span<const FingertipDetection> detections, const ObjectSlab& slab,
                             double min_confidence) {
  TimestampMs latest = 0;
  for (const auto& d : detections) latest = std::max(latest, d.timestamp);
  return evaluate_frame(detections, latest, slab, min_confidence);
}

}  // namespace handover::vision
