#pragma once

// Seeded random multibox instances for the oracle comparisons.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "handover/multibox.hpp"
#include "oracles.hpp"

namespace instances {

using handover::multibox::Box;
using handover::multibox::GroundTruth;
using handover::multibox::Prediction;

inline Box random_box(std::mt19937_64& rng, const Box* near = nullptr) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  double cx, cy, w, h;
  if (near != nullptr) {
    cx = 0.5 * (near->x_min + near->x_max) + 0.04 * z(rng);
    cy = 0.5 * (near->y_min + near->y_max) + 0.04 * z(rng);
    w = near->width() * std::exp(0.2 * z(rng));
    h = near->height() * std::exp(0.2 * z(rng));
  } else {
    cx = 0.15 + 0.7 * u(rng);
    cy = 0.15 + 0.7 * u(rng);
    w = 0.05 + 0.25 * u(rng);
    h = 0.05 + 0.25 * u(rng);
  }
  Box b;
  b.x_min = std::clamp(cx - w / 2, 0.0, 0.98);
  b.y_min = std::clamp(cy - h / 2, 0.0, 0.98);
  b.x_max = std::clamp(cx + w / 2, b.x_min + 0.01, 1.0);
  b.y_max = std::clamp(cy + h / 2, b.y_min + 0.01, 1.0);
  return b;
}

struct Raw {
  std::vector<Prediction> predicted;
  std::vector<GroundTruth> truth;
  double alpha = 1.0;
};

// Up to max_pred predictions and max_truth truths; most predictions sit
// near some truth so that matches are common.
inline Raw random_instance(std::mt19937_64& rng, std::size_t max_pred, std::size_t max_truth) {
  std::uniform_int_distribution<std::size_t> classes_d(2, 5);
  std::uniform_int_distribution<std::size_t> np_d(1, max_pred);
  std::uniform_int_distribution<std::size_t> nt_d(0, max_truth);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 2.0);
  Raw r;
  const std::size_t classes = classes_d(rng);
  const std::size_t nt = nt_d(rng);
  for (std::size_t j = 0; j < nt; ++j) {
    std::uniform_int_distribution<std::size_t> label(1, classes - 1);
    r.truth.push_back({random_box(rng), label(rng)});
  }
  const std::size_t np = np_d(rng);
  for (std::size_t i = 0; i < np; ++i) {
    Prediction p;
    if (nt > 0 && u(rng) < 0.6) {
      std::uniform_int_distribution<std::size_t> pick(0, nt - 1);
      p.box = random_box(rng, &r.truth[pick(rng)].box);
    } else {
      p.box = random_box(rng);
    }
    p.confidences.resize(classes);
    for (double& c : p.confidences) c = z(rng);
    r.predicted.push_back(std::move(p));
  }
  const double alphas[] = {0.0, 0.5, 1.0, 2.0, 3.7};
  r.alpha = alphas[std::uniform_int_distribution<int>(0, 4)(rng)];
  return r;
}

inline oracle::Rect rect(const Box& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

inline std::vector<int> oracle_match(const Raw& r) {
  std::vector<oracle::Rect> p, g;
  for (const auto& x : r.predicted) p.push_back(rect(x.box));
  for (const auto& x : r.truth) g.push_back(rect(x.box));
  return oracle::exhaustive_match(p, g, 0.5);
}

// (1/N)(L_conf + alpha L_loc) summed box by box from a given match.
struct OracleLoss {
  double confidence = 0.0;
  double localization = 0.0;
  double total = 0.0;
  std::size_t n = 0;
};

inline OracleLoss oracle_loss(const Raw& r, const std::vector<int>& match) {
  OracleLoss o;
  for (std::size_t i = 0; i < r.predicted.size(); ++i) {
    const int m = match[i];
    const std::size_t target = m >= 0 ? r.truth[static_cast<std::size_t>(m)].label : 0;
    o.confidence += oracle::softmax_xent(r.predicted[i].confidences, target);
    if (m < 0) continue;
    ++o.n;
    for (double v : oracle::offsets(rect(r.truth[static_cast<std::size_t>(m)].box), rect(r.predicted[i].box)))
      o.localization += oracle::smooth_l1(v);
  }
  o.total = o.n == 0 ? 0.0 : (o.confidence + r.alpha * o.localization) / static_cast<double>(o.n);
  return o;
}

// Predictions equal to the truths (logit margin 1000 on the right class)
// plus extra predictions overlapping no truth, confidently background.
inline Raw perfect_instance(std::mt19937_64& rng) {
  Raw r;
  std::uniform_int_distribution<std::size_t> nt_d(1, 3);
  const std::size_t classes = 4;
  const std::size_t nt = nt_d(rng);
  // Truths in separate horizontal bands so extras can avoid them.
  for (std::size_t j = 0; j < nt; ++j) {
    Box b = random_box(rng);
    const double y0 = 0.25 * static_cast<double>(j);
    b.y_min = y0 + 0.01;
    b.y_max = y0 + 0.2;
    r.truth.push_back({b, 1 + j % (classes - 1)});
  }
  for (std::size_t j = 0; j < nt; ++j) {
    Prediction p{r.truth[j].box, std::vector<double>(classes, 0.0)};
    p.confidences[r.truth[j].label] = 1000.0;
    r.predicted.push_back(std::move(p));
  }
  Box extra = random_box(rng);
  extra.y_min = 0.8;
  extra.y_max = 0.95;
  Prediction bg{extra, std::vector<double>(classes, 0.0)};
  bg.confidences[0] = 1000.0;
  r.predicted.push_back(std::move(bg));
  std::shuffle(r.predicted.begin(), r.predicted.end(), rng);
  r.alpha = 1.0;
  return r;
}

}  // namespace instances
