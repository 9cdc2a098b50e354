#include "handover/multibox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace handover::multibox {

using nlohmann::json;

double iou(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

MatchResult match_boxes(std::span<const Box> predicted, std::span<const GroundTruth> truth,
                        double threshold) {
  if (predicted.empty()) throw std::invalid_argument("match_boxes needs at least one prediction");
  MatchResult r;
  r.matched_truth.assign(predicted.size(), -1);
  if (truth.empty()) return r;

  const std::size_t np = predicted.size();
  const std::size_t nt = truth.size();
  std::vector<double> overlap(np * nt);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nt; ++j) overlap[i * nt + j] = iou(predicted[i], truth[j].box);
  }

  std::vector<bool> truth_used(nt, false);
  for (std::size_t round = 0; round < nt; ++round) {
    double best = 0.0;
    std::size_t bi = np;
    std::size_t bj = nt;
    for (std::size_t i = 0; i < np; ++i) {
      if (r.matched_truth[i] >= 0) continue;
      for (std::size_t j = 0; j < nt; ++j) {
        if (truth_used[j]) continue;
        if (overlap[i * nt + j] > best) {
          best = overlap[i * nt + j];
          bi = i;
          bj = j;
        }
      }
    }
    if (bi == np) break;
    r.matched_truth[bi] = static_cast<int>(bj);
    truth_used[bj] = true;
  }

  for (std::size_t i = 0; i < np; ++i) {
    if (r.matched_truth[i] >= 0) continue;
    double best = 0.0;
    int bj = -1;
    for (std::size_t j = 0; j < nt; ++j) {
      if (overlap[i * nt + j] > best) {
        best = overlap[i * nt + j];
        bj = static_cast<int>(j);
      }
    }
    if (bj >= 0 && best >= threshold) r.matched_truth[i] = bj;
  }

  r.matched_count = static_cast<std::size_t>(
      std::count_if(r.matched_truth.begin(), r.matched_truth.end(), [](int m) { return m >= 0; }));
  return r;
}

bool MultiboxInstance::x(std::size_t i, std::size_t j, std::size_t p) const noexcept {
  return i < match.matched_truth.size() && match.matched(i, j) && j < ground_truth.size() &&
         ground_truth[j].label == p;
}

std::size_t MultiboxInstance::class_count() const {
  if (predicted.empty()) throw std::logic_error("instance has no predictions");
  return predicted.front().confidences.size();
}

MultiboxInstance MultiboxInstance::build(std::vector<Prediction> predicted,
                                         std::vector<GroundTruth> ground_truth, double alpha) {
  if (predicted.empty()) throw std::invalid_argument("multibox instance needs predictions");
  const std::size_t classes = predicted.front().confidences.size();
  if (classes < 2) throw std::invalid_argument("confidences need background plus >= 1 class");
  std::vector<Box> boxes;
  boxes.reserve(predicted.size());
  for (const auto& p : predicted) {
    if (!p.box.valid()) throw std::invalid_argument("predicted box is not a valid normalized box");
    if (p.confidences.size() != classes) {
      throw std::invalid_argument("confidence vector length mismatch");
    }
    for (double c : p.confidences) {
      if (!std::isfinite(c)) throw std::invalid_argument("confidences must be finite");
    }
    boxes.push_back(p.box);
  }
  for (const auto& g : ground_truth) {
    if (!g.box.valid()) throw std::invalid_argument("ground-truth box is degenerate or out of range");
    if (g.label == kBackgroundClass || g.label >= classes) {
      throw std::invalid_argument("ground-truth class must lie in 1..K");
    }
  }
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  MultiboxInstance inst;
  inst.match = match_boxes(boxes, ground_truth);
  inst.predicted = std::move(predicted);
  inst.ground_truth = std::move(ground_truth);
  inst.alpha = alpha;
  return inst;
}

std::array<double, 4> encode_offsets(const Box& g, const Box& d) {
  if (!(g.width() > 0.0 && g.height() > 0.0 && d.width() > 0.0 && d.height() > 0.0)) {
    throw std::invalid_argument("offset encoding needs boxes with positive area");
  }
  const double gcx = 0.5 * (g.x_min + g.x_max);
  const double gcy = 0.5 * (g.y_min + g.y_max);
  const double dcx = 0.5 * (d.x_min + d.x_max);
  const double dcy = 0.5 * (d.y_min + d.y_max);
  return {(gcx - dcx) / d.width(), (gcy - dcy) / d.height(), std::log(g.width() / d.width()),
          std::log(g.height() / d.height())};
}

double smooth_l1(double x) noexcept {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

namespace {

// log-sum-exp(c) - c[target]
double softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double c : logits) sum += std::exp(c - peak);
  return (peak + std::log(sum)) - logits[target];
}

}  // namespace

double confidence_loss(const MultiboxInstance& instance) {
  const std::size_t classes = instance.class_count();
  double loss = 0.0;
  for (std::size_t i = 0; i < instance.predicted.size(); ++i) {
    const auto& conf = instance.predicted[i].confidences;
    if (conf.size() != classes) throw std::invalid_argument("confidence vector length mismatch");
    const int m = instance.match.matched_truth.at(i);
    const std::size_t target = m >= 0 ? instance.ground_truth.at(m).label : kBackgroundClass;
    loss += softmax_cross_entropy(conf, target);
  }
  return loss;
}

double localization_loss(const MultiboxInstance& instance) {
  double loss = 0.0;
  for (std::size_t i = 0; i < instance.predicted.size(); ++i) {
    const int m = instance.match.matched_truth.at(i);
    if (m < 0) continue;
    const auto& g = instance.ground_truth.at(m).box;
    if (!(g.area() > 0.0)) throw std::invalid_argument("degenerate ground-truth box");
    for (double v : encode_offsets(g, instance.predicted[i].box)) loss += smooth_l1(v);
  }
  return loss;
}

double total_loss(const MultiboxInstance& instance) {
  if (!(instance.alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  const std::size_t n = instance.n();
  if (n == 0) return 0.0;
  return (confidence_loss(instance) + instance.alpha * localization_loss(instance)) /
         static_cast<double>(n);
}

namespace {

Box box_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw std::invalid_argument("box must have 4 coordinates");
  return Box{v[0], v[1], v[2], v[3]};
}

json box_to_json(const Box& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

}  // namespace

MultiboxInstance instance_from_json(const json& j) {
  std::vector<Prediction> preds;
  for (const auto& p : j.at("predicted")) {
    preds.push_back({box_from_json(p.at("box")), p.at("confidences").get<std::vector<double>>()});
  }
  std::vector<GroundTruth> truth;
  for (const auto& g : j.at("ground_truth")) {
    truth.push_back({box_from_json(g.at("box")), g.at("class").get<std::size_t>()});
  }
  return MultiboxInstance::build(std::move(preds), std::move(truth), j.value("alpha", 1.0));
}

json instance_to_json(const MultiboxInstance& instance) {
  json preds = json::array();
  for (const auto& p : instance.predicted) {
    preds.push_back({{"box", box_to_json(p.box)}, {"confidences", p.confidences}});
  }
  json truth = json::array();
  for (const auto& g : instance.ground_truth) {
    truth.push_back({{"box", box_to_json(g.box)}, {"class", g.label}});
  }
  return json{{"predicted", std::move(preds)}, {"ground_truth", std::move(truth)}, {"alpha", instance.alpha}};
}

}  // namespace handover::multibox
