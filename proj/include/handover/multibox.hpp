#pragma once

// Multibox detection objective:
//   L(x, c, l, g) = (1/N) * (L_conf(x, c) + alpha * L_loc(x, l, g))
// with greedy bipartite + threshold matching between predicted boxes and
// ground truth. Class 0 is background; object classes are 1..K.

#include <cstddef>
#include <span>
#include <vector>

#include "handover/core.hpp"
#include "json.hpp"

namespace handover::multibox {

using Box = NormalizedBox;

inline constexpr double kMatchThreshold = 0.5;
inline constexpr std::size_t kBackgroundClass = 0;

double iou(const Box& a, const Box& b) noexcept;

struct Prediction {
  Box box;
  std::vector<double> confidences;  // raw class scores (logits), 1 + K entries
};

struct GroundTruth {
  Box box;
  std::size_t label = 1;  // 1..K
};

struct MatchResult {
  // matched_truth[i] = index of the ground truth predicted box i is matched
  // to, or -1 when unmatched (background).
  std::vector<int> matched_truth;
  std::size_t matched_count = 0;  // N

  bool matched(std::size_t pred, std::size_t truth) const noexcept {
    return matched_truth[pred] == static_cast<int>(truth);
  }
};

// 1. Greedy bipartite: repeatedly take the highest-IoU (truth, prediction)
//    pair among unused ones (IoU > 0). Ties: lowest prediction, then lowest
//    truth index.
// 2. Every still-unmatched prediction whose best IoU against any truth is
//    >= threshold joins that truth (ties: lowest truth index).
MatchResult match_boxes(std::span<const Box> predicted, std::span<const GroundTruth> truth,
                        double threshold = kMatchThreshold);

struct MultiboxInstance {
  std::vector<Prediction> predicted;
  std::vector<GroundTruth> ground_truth;
  double alpha = 1.0;
  MatchResult match;

  // Binary matching indicator x[i][j][p].
  bool x(std::size_t i, std::size_t j, std::size_t p) const noexcept;
  std::size_t n() const noexcept { return match.matched_count; }
  std::size_t class_count() const;  // 1 + K

  // Validates boxes and confidence widths, then computes the match.
  static MultiboxInstance build(std::vector<Prediction> predicted,
                                std::vector<GroundTruth> ground_truth, double alpha = 1.0);
};

// Offset of g relative to reference box d: center deltas scaled by d's
// size, log width and height ratios.
std::array<double, 4> encode_offsets(const Box& g, const Box& d);

double smooth_l1(double x) noexcept;

// Sum of softmax cross-entropy over matched boxes (against their truth's
// label) and unmatched boxes (against background).
double confidence_loss(const MultiboxInstance& instance);

// Sum over matches of smooth-L1 over encode_offsets(g, l).
double localization_loss(const MultiboxInstance& instance);

// (1/N)(L_conf + alpha L_loc); 0 when N == 0.
double total_loss(const MultiboxInstance& instance);

// {"predicted": [{"box": [..4], "confidences": [...]}],
//  "ground_truth": [{"box": [..4], "class": p}], "alpha": a}
MultiboxInstance instance_from_json(const nlohmann::json& j);
nlohmann::json instance_to_json(const MultiboxInstance& instance);

}  // namespace handover::multibox
