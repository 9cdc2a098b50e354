#pragma once

#include <span>
#include <vector>

#include "handover/core.hpp"

namespace handover::vision {

inline constexpr std::size_t kMinFingersInSlab = 3;
inline constexpr double kDefaultMinConfidence = 0.5;

struct VisionVerdict {
  bool vote = false;
  int fingers_in_slab = 0;
  bool thumb_in_slab = false;
  TimestampMs evaluated_at = 0;

  friend bool operator==(const VisionVerdict&, const VisionVerdict&) = default;
};

// z_front <= z <= z_back, boundaries inclusive. Only depth is gated.
bool in_slab(const FingertipDetection& detection, const ObjectSlab& slab);

// Release vote: at least three confident in-slab fingertips, one of them the
// thumb. evaluated_at is the latest detection timestamp (0 if none).
VisionVerdict evaluate_grasp(std::span<const FingertipDetection> detections, const ObjectSlab& slab,
                             double min_confidence = kDefaultMinConfidence);

// Same rule, stamped with the camera frame time.
VisionVerdict evaluate_frame(std::span<const FingertipDetection> detections, TimestampMs frame_time,
                             const ObjectSlab& slab, double min_confidence = kDefaultMinConfidence);

}  // namespace handover::vision
