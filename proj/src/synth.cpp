#include "handover/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "handover/json_io.hpp"

namespace handover::synth {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string("fault probability out of [0,1]: ") + name);
  }
}

void check_action(ActionClass a) {
  if (code(a) < 0 || code(a) >= static_cast<int>(kActionCount)) {
    throw std::invalid_argument("unknown action class");
  }
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double sigma) {
    return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(engine_) : 0.0;
  }
  // Always consumes one draw so later draws do not depend on p.
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

 private:
  std::mt19937_64 engine_;
};

double clamp_torque(double v) { return std::clamp(v, -kTorqueLimitNm, kTorqueLimitNm); }

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ (a + 1));
  return splitmix64(h ^ (b + 1));
}

double profile_value(ProfileShape shape, double t, double duration_ms) noexcept {
  if (t < 0.0) return 0.0;
  switch (shape) {
    case ProfileShape::Null:
      return 0.0;
    case ProfileShape::Step:
      return 1.0;
    case ProfileShape::Ramp:
      return duration_ms > 0.0 ? std::min(1.0, t / duration_ms) : 1.0;
    case ProfileShape::Impulse:
      return t < duration_ms ? std::sin(std::numbers::pi * t / duration_ms) : 0.0;
  }
  return 0.0;
}

TorqueSignatureModel TorqueSignatureModel::defaults() {
  TorqueSignatureModel m;
  m.baseline = {0.8, -11.5, 0.4, 6.2, -0.3, 2.4, 0.1};
  auto& t = m.templates;
  t[code(ActionClass::NoAction)] = {ProfileShape::Null, {}, 0.0, 0.0, 0.0};
  t[code(ActionClass::Bump)] = {
      ProfileShape::Impulse, {2.5, 7.0, 1.6, -5.5, 1.0, 3.8, 0.4}, 437.5, 437.5, 125.0};
  t[code(ActionClass::Push)] = {
      ProfileShape::Step, {-1.2, -5.0, -0.7, 3.8, -0.5, -2.2, -0.15}, 375.0, 375.0, 0.0};
  t[code(ActionClass::Hold)] = {
      ProfileShape::Step, {0.4, 2.2, 0.2, -1.8, 0.15, 1.0, 0.05}, 375.0, 375.0, 0.0};
  t[code(ActionClass::Pull)] = {
      ProfileShape::Step, {1.3, 5.5, 0.8, -4.2, 0.5, 2.4, 0.2}, 375.0, 375.0, 0.0};
  t[code(ActionClass::PullUp)] = {
      ProfileShape::Ramp, {0.6, 6.5, 0.3, -1.5, 0.3, 3.6, 0.1}, 375.0, 375.0, 500.0};
  return m;
}

void TorqueSignatureModel::validate() const {
  for (double b : baseline) {
    if (!std::isfinite(b) || std::abs(b) > kTorqueLimitNm) {
      throw std::invalid_argument("baseline torque must be finite and within the joint limit");
    }
  }
  for (const auto& t : templates) {
    for (double a : t.amplitude) {
      if (!std::isfinite(a)) throw std::invalid_argument("template amplitude must be finite");
    }
    if (!(t.onset_ms >= 0.0 && t.onset_jitter_ms >= 0.0 && t.duration_ms >= 0.0)) {
      throw std::invalid_argument("template timing must be non-negative");
    }
  }
  if (!(noise_sigma >= 0.0) || !(amplitude_jitter >= 0.0 && amplitude_jitter < 1.0)) {
    throw std::invalid_argument("noise sigma must be >= 0 and amplitude jitter in [0,1)");
  }
}

LabeledWindow generate_window(const TorqueSignatureModel& model, ActionClass action,
                              std::uint64_t seed) {
  check_action(action);
  model.validate();
  Rng rng(seed);
  const ActionTemplate& tmpl = model.of(action);
  const double last_ms = static_cast<double>((kWindowSamples - 1) * kSamplePeriodMs);
  double onset = tmpl.onset_ms;
  if (tmpl.onset_jitter_ms > 0.0) {
    onset = rng.uniform(tmpl.onset_ms - tmpl.onset_jitter_ms, tmpl.onset_ms + tmpl.onset_jitter_ms);
  }
  onset = std::clamp(onset, 0.0, last_ms);
  double scale = 1.0;
  if (model.amplitude_jitter > 0.0) {
    scale = rng.uniform(1.0 - model.amplitude_jitter, 1.0 + model.amplitude_jitter);
  }

  TorqueWindow::Samples s{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (std::size_t k = 0; k < kWindowSamples; ++k) {
      const double t = static_cast<double>(k * kSamplePeriodMs);
      const double shape = profile_value(tmpl.shape, t - onset, tmpl.duration_ms);
      s[j][k] = clamp_torque(model.baseline[j] + scale * tmpl.amplitude[j] * shape +
                             rng.normal(model.noise_sigma));
    }
  }
  return LabeledWindow{TorqueWindow(s), action};
}

std::vector<LabeledWindow> generate_dataset(const TorqueSignatureModel& model,
                                            std::size_t per_class_count, std::uint64_t seed) {
  std::vector<LabeledWindow> out;
  out.reserve(per_class_count * kActionCount);
  for (std::size_t n = 0; n < per_class_count * kActionCount; ++n) {
    out.push_back(generate_window(model, kAllActions[n % kActionCount], derive_seed(seed, n)));
  }
  return out;
}

FaultProfile FaultProfile::none() {
  FaultProfile f;
  f.noaction_fidget = f.bump_linger = f.bump_brush = f.push_recoil = 0.0;
  f.weak_action.fill(0.0);
  f.thumb_occlusion.fill(0.0);
  f.finger_dropout = f.frame_drop = f.spurious_detection = 0.0;
  f.extra_torque_noise = 0.0;
  return f;
}

void FaultProfile::validate() const {
  check_probability(noaction_fidget, "noaction_fidget");
  check_probability(bump_linger, "bump_linger");
  check_probability(bump_brush, "bump_brush");
  check_probability(push_recoil, "push_recoil");
  for (double p : weak_action) check_probability(p, "weak_action");
  for (double p : thumb_occlusion) check_probability(p, "thumb_occlusion");
  check_probability(finger_dropout, "finger_dropout");
  check_probability(frame_drop, "frame_drop");
  check_probability(spurious_detection, "spurious_detection");
  if (!(extra_torque_noise >= 0.0) || !std::isfinite(extra_torque_noise)) {
    throw std::invalid_argument("extra_torque_noise must be finite and >= 0");
  }
}

namespace {

json per_action_json(const std::array<double, kActionCount>& v) {
  json j = json::object();
  for (ActionClass a : kAllActions) j[std::string(to_string(a))] = v[code(a)];
  return j;
}

void per_action_from_json(const json& j, std::array<double, kActionCount>& v) {
  for (const auto& [key, value] : j.items()) v[code(action_from_string(key))] = value.get<double>();
}

}  // namespace

json fault_profile_to_json(const FaultProfile& f) {
  return json{{"noaction_fidget", f.noaction_fidget},
              {"bump_linger", f.bump_linger},
              {"bump_brush", f.bump_brush},
              {"push_recoil", f.push_recoil},
              {"weak_action", per_action_json(f.weak_action)},
              {"thumb_occlusion", per_action_json(f.thumb_occlusion)},
              {"finger_dropout", f.finger_dropout},
              {"frame_drop", f.frame_drop},
              {"spurious_detection", f.spurious_detection},
              {"extra_torque_noise", f.extra_torque_noise}};
}

FaultProfile fault_profile_from_json(const json& j, FaultProfile f) {
  for (const auto& [key, value] : j.items()) {
    if (key == "noaction_fidget") f.noaction_fidget = value.get<double>();
    else if (key == "bump_linger") f.bump_linger = value.get<double>();
    else if (key == "bump_brush") f.bump_brush = value.get<double>();
    else if (key == "push_recoil") f.push_recoil = value.get<double>();
    else if (key == "weak_action") per_action_from_json(value, f.weak_action);
    else if (key == "thumb_occlusion") per_action_from_json(value, f.thumb_occlusion);
    else if (key == "finger_dropout") f.finger_dropout = value.get<double>();
    else if (key == "frame_drop") f.frame_drop = value.get<double>();
    else if (key == "spurious_detection") f.spurious_detection = value.get<double>();
    else if (key == "extra_torque_noise") f.extra_torque_noise = value.get<double>();
    else throw std::invalid_argument("unknown fault profile key: " + key);
  }
  f.validate();
  return f;
}

namespace {

constexpr std::size_t kFingers = 5;
constexpr std::size_t kTorqueSamples = static_cast<std::size_t>(kEpisodeMs / kSamplePeriodMs);
constexpr double kBoxHalf = 0.025;
constexpr double kDepthNoise = 0.002;

// Image-plane offsets of thumb, index, middle, ring, little from the hand center.
constexpr std::array<std::array<double, 2>, kFingers> kFingerOffsets{
    {{-0.09, 0.04}, {-0.03, -0.06}, {0.01, -0.07}, {0.05, -0.06}, {0.08, -0.03}}};

// Extra torque acting on top of the baseline: one template switched on at
// start and off at end.
struct Contribution {
  ActionClass shape_of;
  double start_ms;
  double end_ms;
  double scale;
};

bool grasping(ActionClass a) {
  return a == ActionClass::Push || a == ActionClass::Hold || a == ActionClass::Pull ||
         a == ActionClass::PullUp;
}

}  // namespace

ScenarioScript generate_scenario(ActionClass action, const FaultProfile& faults, std::uint64_t seed,
                                 const TorqueSignatureModel& model) {
  check_action(action);
  faults.validate();
  model.validate();

  Rng rng(derive_seed(seed, 0));
  ScenarioScript s;
  s.action = action;
  s.seed = seed;
  s.slab.z_front = rng.uniform(0.20, 0.24);
  s.slab.z_back = s.slab.z_front + rng.uniform(0.06, 0.09);
  const double appear = rng.uniform(150.0, 350.0);
  s.contact_ms = std::llround(rng.uniform(800.0, 1000.0));
  s.action_onset_ms = s.contact_ms + std::llround(rng.uniform(100.0, 300.0));
  const double contact = static_cast<double>(s.contact_ms);
  const double onset = static_cast<double>(s.action_onset_ms);

  // Every fault draw happens regardless of the action so one trial seed
  // yields the same timeline under different fault profiles.
  const bool fidget = rng.chance(faults.noaction_fidget);
  const bool linger = rng.chance(faults.bump_linger);
  const bool brush = rng.chance(faults.bump_brush);
  const bool recoil = rng.chance(faults.push_recoil);
  const bool weak = rng.chance(faults.weak_action[code(action)]);
  const bool occluded = rng.chance(faults.thumb_occlusion[code(action)]);
  s.faults.fidget = fidget && action == ActionClass::NoAction;
  s.faults.linger = linger && action == ActionClass::Bump;
  s.faults.brush = brush && action == ActionClass::Bump;
  s.faults.recoil = recoil && action == ActionClass::Push;
  s.faults.weak = weak && grasping(action) && action != ActionClass::Push;
  s.faults.thumb_occluded = occluded && grasping(action);

  const double inf = std::numeric_limits<double>::infinity();
  double scale = 1.0 + rng.uniform(-model.amplitude_jitter, model.amplitude_jitter);
  if (s.faults.weak) scale *= rng.uniform(0.08, 0.12);
  const double linger_start = onset + rng.uniform(100.0, 200.0);
  const double linger_scale = rng.uniform(0.9, 1.3);
  const double fidget_scale = rng.uniform(0.8, 1.2);
  const double recoil_at = onset + rng.uniform(300.0, 500.0);
  const double impact_end = onset + rng.uniform(100.0, 250.0);
  const double brush_start = onset - 50.0;
  const double brush_end = brush_start + rng.uniform(250.0, 400.0);

  std::vector<Contribution> parts;
  switch (action) {
    case ActionClass::NoAction:
      if (s.faults.fidget) parts.push_back({ActionClass::Hold, onset, inf, fidget_scale});
      break;
    case ActionClass::Bump:
      parts.push_back({ActionClass::Bump, onset, inf, scale});
      if (s.faults.linger) parts.push_back({ActionClass::Hold, linger_start, inf, linger_scale});
      break;
    case ActionClass::Push:
      if (s.faults.recoil) {
        parts.push_back({ActionClass::Push, onset, recoil_at, scale});
        parts.push_back({ActionClass::Pull, recoil_at, inf, scale});
      } else {
        parts.push_back({ActionClass::Push, onset, inf, scale});
      }
      break;
    default:
      parts.push_back({action, onset, inf, scale});
      break;
  }

  // Torque stream.
  Rng trng(derive_seed(seed, 1));
  const double sigma = model.noise_sigma + faults.extra_torque_noise;
  s.torque.reserve(kTorqueSamples);
  for (std::size_t k = 0; k < kTorqueSamples; ++k) {
    TorqueSample sample;
    sample.timestamp = static_cast<TimestampMs>(k) * kSamplePeriodMs;
    const double t = static_cast<double>(sample.timestamp);
    for (std::size_t j = 0; j < kJointCount; ++j) {
      double v = model.baseline[j];
      for (const auto& p : parts) {
        if (t >= p.end_ms) continue;
        const auto& tmpl = model.of(p.shape_of);
        v += p.scale * tmpl.amplitude[j] * profile_value(tmpl.shape, t - p.start_ms, tmpl.duration_ms);
      }
      sample.torque[j] = clamp_torque(v + trng.normal(sigma));
    }
    s.torque.push_back(sample);
  }

  // Camera stream.
  Rng vrng(derive_seed(seed, 2));
  const double depth = s.slab.z_back - s.slab.z_front;
  const double hand_x = vrng.uniform(0.35, 0.65);
  const double hand_y = vrng.uniform(0.35, 0.65);
  std::array<double, kFingers> grasp_depth{};
  std::array<double, kFingers> grasp_delay{};
  std::array<double, kFingers> hover_gap{};
  for (std::size_t f = 0; f < kFingers; ++f) {
    grasp_depth[f] = vrng.uniform(s.slab.z_front + 0.2 * depth, s.slab.z_back - 0.2 * depth);
    grasp_delay[f] = vrng.uniform(0.0, 60.0);
    hover_gap[f] = vrng.uniform(0.02, 0.05);
  }

  if (grasping(action) && !s.faults.thumb_occluded) {
    const double formed = contact + *std::max_element(grasp_delay.begin(), grasp_delay.end());
    s.grasp_interval = std::make_pair(static_cast<TimestampMs>(std::ceil(formed)), kEpisodeMs);
  } else if (s.faults.brush) {
    s.grasp_interval = std::make_pair(static_cast<TimestampMs>(std::ceil(brush_start)),
                                      static_cast<TimestampMs>(std::floor(brush_end)));
  }

  // Depth of finger f at time t, or NaN when it is not visible.
  auto finger_depth = [&](std::size_t f, double t) -> double {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (t < appear) return nan;
    if (t < contact) {
      const double frac = (t - appear) / (contact - appear);
      const double final_gap = action == ActionClass::NoAction ? hover_gap[f] : 0.015;
      return s.slab.z_back + 0.15 + (final_gap - 0.15) * frac;
    }
    if (f == 0 && s.faults.thumb_occluded) return nan;
    switch (action) {
      case ActionClass::NoAction:
        if (s.faults.fidget && (f == 1 || f == 2)) return grasp_depth[f];
        return s.slab.z_back + hover_gap[f];
      case ActionClass::Bump: {
        if (s.faults.brush && f <= 3 && t >= brush_start && t < brush_end) return grasp_depth[f];
        if ((f == 1 || f == 2) && t >= onset - 30.0 && t < impact_end) return grasp_depth[f];
        const double retreat = t > impact_end ? 1e-4 * (t - impact_end) : 0.0;
        return s.slab.z_back + 0.5 * hover_gap[f] + retreat;
      }
      default:
        if (t >= contact + grasp_delay[f]) return grasp_depth[f];
        return s.slab.z_back + 0.015;
    }
  };

  TimestampMs previous = -1;
  for (int k = 0;; ++k) {
    const TimestampMs nominal = std::llround(k * 1000.0 / kCameraHz);
    if (nominal >= kEpisodeMs) break;
    TimestampMs ts = std::max<TimestampMs>(0, nominal + vrng.integer(-3, 3));
    ts = std::max(ts, previous + 1);
    previous = ts;
    const bool dropped = vrng.chance(faults.frame_drop);
    DetectionFrame frame;
    frame.timestamp = ts;
    for (std::size_t f = 0; f < kFingers; ++f) {
      const double z0 = finger_depth(f, static_cast<double>(ts));
      const double z = z0 + vrng.normal(kDepthNoise);
      const double cx = hand_x + kFingerOffsets[f][0] + vrng.normal(0.003);
      const double cy = hand_y + kFingerOffsets[f][1] + vrng.normal(0.003);
      const double conf = vrng.uniform(0.6, 0.98);
      const bool lost = vrng.chance(faults.finger_dropout);
      if (std::isnan(z0) || lost) continue;
      FingertipDetection d;
      d.box = NormalizedBox{std::clamp(cx - kBoxHalf, 0.0, 1.0), std::clamp(cy - kBoxHalf, 0.0, 1.0),
                            std::clamp(cx + kBoxHalf, 0.0, 1.0), std::clamp(cy + kBoxHalf, 0.0, 1.0)};
      d.finger_type = f == 0 ? FingerType::Thumb : FingerType::Other;
      d.position_3d = Point3{(cx - 0.5) * z, (cy - 0.5) * z, z};
      d.confidence = conf;
      d.timestamp = ts;
      frame.detections.push_back(d);
    }
    const bool phantom = vrng.chance(faults.spurious_detection);
    const double pz = vrng.uniform(s.slab.z_front, s.slab.z_back);
    const double px = vrng.uniform(0.1, 0.9);
    const double py = vrng.uniform(0.1, 0.9);
    const double pconf = vrng.uniform(0.1, 0.45);
    if (phantom) {
      FingertipDetection d;
      d.box = NormalizedBox{px - kBoxHalf, py - kBoxHalf, px + kBoxHalf, py + kBoxHalf};
      d.position_3d = Point3{(px - 0.5) * pz, (py - 0.5) * pz, pz};
      d.confidence = pconf;
      d.timestamp = ts;
      frame.detections.push_back(d);
    }
    if (!dropped) s.frames.push_back(std::move(frame));
  }
  return s;
}

TorqueWindow window_ending_at(const ScenarioScript& script, std::size_t last_index) {
  if (last_index + 1 < kWindowSamples || last_index >= script.torque.size()) {
    throw std::out_of_range("window does not fit inside the torque stream");
  }
  const std::size_t first = last_index + 1 - kWindowSamples;
  TorqueWindow::Samples s{};
  for (std::size_t k = 0; k < kWindowSamples; ++k) {
    for (std::size_t j = 0; j < kJointCount; ++j) s[j][k] = script.torque[first + k].torque[j];
  }
  return TorqueWindow(s, script.torque[first].timestamp);
}

void write_dataset_jsonl(std::ostream& out, const std::vector<LabeledWindow>& data) {
  for (const auto& w : data) out << json(w).dump() << '\n';
}

std::vector<LabeledWindow> read_dataset_jsonl(std::istream& in) {
  std::vector<LabeledWindow> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<LabeledWindow>());
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_scenario_jsonl(std::ostream& out, const ScenarioScript& script) {
  json header{{"event", "scenario"},
              {"action", std::string(to_string(script.action))},
              {"seed", script.seed},
              {"slab", script.slab},
              {"contact_ms", script.contact_ms},
              {"action_onset_ms", script.action_onset_ms},
              {"faults",
               {{"fidget", script.faults.fidget},
                {"linger", script.faults.linger},
                {"brush", script.faults.brush},
                {"recoil", script.faults.recoil},
                {"weak", script.faults.weak},
                {"thumb_occluded", script.faults.thumb_occluded}}}};
  header["grasp_interval"] = script.grasp_interval
                                 ? json::array({script.grasp_interval->first, script.grasp_interval->second})
                                 : json(nullptr);
  out << header.dump() << '\n';

  std::size_t ti = 0;
  std::size_t fi = 0;
  while (ti < script.torque.size() || fi < script.frames.size()) {
    const bool take_torque =
        fi >= script.frames.size() ||
        (ti < script.torque.size() && script.torque[ti].timestamp <= script.frames[fi].timestamp);
    if (take_torque) {
      const auto& t = script.torque[ti++];
      out << json{{"event", "torque"}, {"timestamp", t.timestamp}, {"torque", t.torque}}.dump() << '\n';
    } else {
      const auto& f = script.frames[fi++];
      out << json{{"event", "frame"}, {"timestamp", f.timestamp}, {"detections", f.detections}}.dump()
          << '\n';
    }
  }
}

}  // namespace handover::synth
