#include "handover/fusion.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "handover/json_io.hpp"

namespace handover::fusion {

using nlohmann::json;

void SyncConfig::validate() const {
  if (pairing_window_ms <= 0) throw std::invalid_argument("pairing window must be positive");
  if (debounce_frames == 0) throw std::invalid_argument("debounce needs at least one frame");
}

void EpisodeConfig::validate() const {
  sync.validate();
  if (stride_samples == 0) throw std::invalid_argument("classification stride must be >= 1");
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
    throw std::invalid_argument("min_confidence must lie in [0,1]");
  }
}

FusedSample fuse(const TorqueEvent& torque, const VisionEvent& vision) {
  FusedSample s;
  s.torque = torque;
  s.vision = vision;
  s.fused_vote = classifier::torque_vote(torque.scores) && vision.verdict.vote;
  s.skew_ms = torque.timestamp - vision.timestamp;
  return s;
}

SyncResult synchronize(std::span<const TorqueEvent> torque, std::span<const VisionEvent> vision,
                       const SyncConfig& config) {
  config.validate();
  for (std::size_t i = 1; i < torque.size(); ++i) {
    if (torque[i].timestamp < torque[i - 1].timestamp) {
      throw std::invalid_argument("torque events must be time-ordered");
    }
  }
  for (std::size_t i = 1; i < vision.size(); ++i) {
    if (vision[i].timestamp < vision[i - 1].timestamp) {
      throw std::invalid_argument("vision events must be time-ordered");
    }
  }
  SyncResult r;
  std::size_t next = 0;  // first vision event later than the current torque time
  for (const auto& t : torque) {
    while (next < vision.size() && vision[next].timestamp <= t.timestamp) ++next;
    if (next == 0 || t.timestamp - vision[next - 1].timestamp > config.pairing_window_ms) {
      ++r.dropped;
      continue;
    }
    r.samples.push_back(fuse(t, vision[next - 1]));
  }
  return r;
}

std::string_view to_string(FsmState s) noexcept {
  switch (s) {
    case FsmState::HoldingIdle:
      return "holding_idle";
    case FsmState::ContactPending:
      return "contact_pending";
    case FsmState::ReleaseArmed:
      return "release_armed";
    case FsmState::Released:
      return "released";
  }
  return "?";
}

FsmState fsm_state_from_string(std::string_view name) {
  for (auto s : {FsmState::HoldingIdle, FsmState::ContactPending, FsmState::ReleaseArmed,
                 FsmState::Released}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown state: " + std::string(name));
}

std::string_view to_string(Pipeline p) noexcept {
  switch (p) {
    case Pipeline::TorqueOnly:
      return "torque_only";
    case Pipeline::VisionOnly:
      return "vision_only";
    case Pipeline::Fused:
      return "fused";
  }
  return "?";
}

Pipeline pipeline_from_string(std::string_view name) {
  for (auto p : kAllPipelines) {
    if (to_string(p) == name) return p;
  }
  throw std::invalid_argument("unknown pipeline: " + std::string(name));
}

GateInput gate_input(const FusedSample& sample) {
  return GateInput{sample.torque.timestamp, sample.vision.verdict.fingers_in_slab > 0,
                   classifier::torque_vote(sample.torque.scores), sample.vision.verdict.vote,
                   sample.torque.scores.predicted};
}

StepResult fsm_step(const FsmStatus& status, const GateInput& in, const SyncConfig& config) {
  config.validate();
  if (status.state == FsmState::Released) {
    throw std::logic_error("state machine already released");
  }
  StepResult r;
  r.status = status;
  if (r.status.state == FsmState::ReleaseArmed) r.status.state = FsmState::ContactPending;
  if (r.status.state == FsmState::HoldingIdle) {
    if (!in.contact) return r;
    r.transitions.push_back({FsmState::HoldingIdle, FsmState::ContactPending, in.timestamp});
    r.status = {FsmState::ContactPending, 0};
  }
  if (in.torque_vote && in.vision_vote) {
    ++r.status.streak;
  } else {
    r.status.streak = 0;
  }
  if (r.status.streak >= config.debounce_frames) {
    r.transitions.push_back({FsmState::ContactPending, FsmState::ReleaseArmed, in.timestamp});
    r.transitions.push_back({FsmState::ReleaseArmed, FsmState::Released, in.timestamp});
    r.status.state = FsmState::Released;
    r.decision = make_decision(in.torque_vote, in.vision_vote, in.action, in.timestamp);
  }
  return r;
}

StepResult fsm_step(const FsmStatus& status, const FusedSample& sample, const SyncConfig& config) {
  return fsm_step(status, gate_input(sample), config);
}

std::vector<TorqueEvent> classify_stream(const synth::ScenarioScript& script,
                                         const classifier::TorqueModel& model,
                                         std::size_t stride_samples) {
  if (stride_samples == 0) throw std::invalid_argument("classification stride must be >= 1");
  std::vector<TorqueEvent> out;
  for (std::size_t last = kWindowSamples - 1; last < script.torque.size(); last += stride_samples) {
    const TorqueWindow w = synth::window_ending_at(script, last);
    out.push_back({script.torque[last].timestamp, classifier::classify_window(model, w)});
  }
  return out;
}

std::vector<VisionEvent> evaluate_stream(const synth::ScenarioScript& script, double min_confidence) {
  std::vector<VisionEvent> out;
  out.reserve(script.frames.size());
  for (const auto& f : script.frames) {
    out.push_back({f.timestamp, vision::evaluate_frame(f.detections, f.timestamp, script.slab,
                                                        min_confidence)});
  }
  return out;
}

json torque_event_json(const TorqueEvent& e) {
  return json{{"timestamp", e.timestamp}, {"scores", e.scores}};
}

json vision_event_json(const VisionEvent& e) {
  return json{{"timestamp", e.timestamp}, {"verdict", e.verdict}};
}

json fused_sample_json(const FusedSample& s) {
  return json{{"torque", torque_event_json(s.torque)},
              {"vision", vision_event_json(s.vision)},
              {"fused_vote", s.fused_vote},
              {"skew_ms", s.skew_ms}};
}

TorqueEvent torque_event_from_json(const json& j) {
  return {j.at("timestamp").get<TimestampMs>(), j.at("scores").get<ActionScores>()};
}

VisionEvent vision_event_from_json(const json& j) {
  return {j.at("timestamp").get<TimestampMs>(), j.at("verdict").get<vision::VisionVerdict>()};
}

FusedSample fused_sample_from_json(const json& j) {
  FusedSample s = fuse(torque_event_from_json(j.at("torque")), vision_event_from_json(j.at("vision")));
  if (j.contains("fused_vote") && j.at("fused_vote").get<bool>() != s.fused_vote) {
    throw std::invalid_argument("logged fused vote disagrees with its inputs");
  }
  return s;
}

namespace {

json transition_json(const Transition& t) {
  return json{{"from", std::string(to_string(t.from))}, {"to", std::string(to_string(t.to))}, {"at", t.at}};
}

Transition transition_from_json(const json& j) {
  return {fsm_state_from_string(j.at("from").get<std::string>()),
          fsm_state_from_string(j.at("to").get<std::string>()), j.at("at").get<TimestampMs>()};
}

json sync_json(const SyncConfig& c) {
  return json{{"pairing_window_ms", c.pairing_window_ms}, {"debounce_frames", c.debounce_frames}};
}

SyncConfig sync_from_json(const json& j) {
  SyncConfig c;
  c.pairing_window_ms = j.at("pairing_window_ms").get<TimestampMs>();
  c.debounce_frames = j.at("debounce_frames").get<std::uint32_t>();
  c.validate();
  return c;
}

// Gate input and log payload for one step of a single-modality or fused run.
struct Step {
  GateInput gate;
  json payload;
};

GateInput torque_only_gate(const TorqueEvent& e) {
  return {e.timestamp, true, classifier::torque_vote(e.scores), true, e.scores.predicted};
}

GateInput vision_only_gate(const VisionEvent& e) {
  return {e.timestamp, e.verdict.fingers_in_slab > 0, true, e.verdict.vote, ActionClass::NoAction};
}

}  // namespace

json EpisodeLog::stamp(const char* event) const {
  return json{{"event", event}, {"trial_id", trial_id_}, {"pipeline", std::string(to_string(pipeline_))}};
}

void EpisodeLog::begin(const std::string& trial_id, Pipeline p, ActionClass truth,
                       const SyncConfig& sync) {
  trial_id_ = trial_id;
  pipeline_ = p;
  index_ = 0;
  json j = stamp("begin");
  j["action"] = std::string(to_string(truth));
  j["sync"] = sync_json(sync);
  lines_.push_back(std::move(j));
}

void EpisodeLog::sample(const json& payload, const GateInput& gate) {
  json j = stamp("sample");
  j["index"] = index_++;
  j["payload"] = payload;
  j["gate"] = {{"contact", gate.contact},
               {"torque_vote", gate.torque_vote},
               {"vision_vote", gate.vision_vote},
               {"fused_vote", gate.torque_vote && gate.vision_vote}};
  lines_.push_back(std::move(j));
}

void EpisodeLog::transition(const Transition& t) {
  json j = stamp("transition");
  j.update(transition_json(t));
  lines_.push_back(std::move(j));
}

void EpisodeLog::decision(const ReleaseDecision& d) {
  json j = stamp("decision");
  j["decision"] = d;
  lines_.push_back(std::move(j));
}

void EpisodeLog::end(const EpisodeOutcome& outcome) {
  json j = stamp("end");
  j["released"] = outcome.released();
  j["success"] = outcome.success();
  j["steps"] = outcome.steps;
  j["dropped"] = outcome.dropped;
  j["release_time"] = outcome.decision ? json(outcome.decision->decided_at) : json(nullptr);
  lines_.push_back(std::move(j));
}

void EpisodeLog::write(std::ostream& out) const {
  for (const auto& l : lines_) out << l.dump() << '\n';
}

EpisodeOutcome run_pipeline(Pipeline pipeline, ActionClass truth, std::span<const TorqueEvent> torque,
                            std::span<const VisionEvent> vision, const SyncConfig& sync,
                            EpisodeLog* log, const std::string& trial_id) {
  sync.validate();
  if (pipeline != Pipeline::VisionOnly && torque.empty()) {
    throw std::invalid_argument("pipeline needs torque events");
  }
  if (pipeline != Pipeline::TorqueOnly && vision.empty()) {
    throw std::invalid_argument("pipeline needs vision events");
  }
  EpisodeOutcome outcome;
  outcome.pipeline = pipeline;
  outcome.action = truth;

  std::vector<Step> steps;
  switch (pipeline) {
    case Pipeline::TorqueOnly:
      for (const auto& e : torque) steps.push_back({torque_only_gate(e), {{"torque", torque_event_json(e)}}});
      break;
    case Pipeline::VisionOnly:
      for (const auto& e : vision) steps.push_back({vision_only_gate(e), {{"vision", vision_event_json(e)}}});
      break;
    case Pipeline::Fused: {
      const SyncResult sr = synchronize(torque, vision, sync);
      outcome.dropped = sr.dropped;
      for (const auto& s : sr.samples) steps.push_back({gate_input(s), fused_sample_json(s)});
      break;
    }
  }

  if (log) log->begin(trial_id, pipeline, truth, sync);
  FsmStatus status;
  for (const auto& step : steps) {
    StepResult r = fsm_step(status, step.gate, sync);
    ++outcome.steps;
    if (log) {
      log->sample(step.payload, step.gate);
      for (const auto& t : r.transitions) log->transition(t);
      if (r.decision) log->decision(*r.decision);
    }
    status = r.status;
    if (r.decision) {
      outcome.decision = r.decision;
      break;
    }
  }
  if (log) log->end(outcome);
  return outcome;
}

EpisodeOutcome run_episode(const synth::ScenarioScript& script, const classifier::TorqueModel& model,
                           const EpisodeConfig& config, Pipeline pipeline, EpisodeLog* log,
                           const std::string& trial_id) {
  config.validate();
  if (script.torque.size() < kWindowSamples) {
    throw std::invalid_argument("episode torque stream is shorter than one window");
  }
  if (script.frames.empty()) throw std::invalid_argument("episode has no camera frames");
  std::vector<TorqueEvent> torque;
  std::vector<VisionEvent> vision;
  if (pipeline != Pipeline::VisionOnly) torque = classify_stream(script, model, config.stride_samples);
  if (pipeline != Pipeline::TorqueOnly) vision = evaluate_stream(script, config.min_confidence);
  return run_pipeline(pipeline, script.action, torque, vision, config.sync, log, trial_id);
}

namespace {

struct LoggedEpisode {
  std::string trial_id;
  Pipeline pipeline = Pipeline::Fused;
  SyncConfig sync;
  bool begun = false;
  std::vector<GateInput> gates;
  std::vector<Transition> transitions;
  std::optional<ReleaseDecision> decision;
};

GateInput gate_from_payload(Pipeline p, const json& payload) {
  switch (p) {
    case Pipeline::TorqueOnly:
      return torque_only_gate(torque_event_from_json(payload.at("torque")));
    case Pipeline::VisionOnly:
      return vision_only_gate(vision_event_from_json(payload.at("vision")));
    case Pipeline::Fused:
      return gate_input(fused_sample_from_json(payload));
  }
  throw std::invalid_argument("unknown pipeline");
}

}  // namespace

ReplayReport replay_log(std::istream& in) {
  std::vector<LoggedEpisode> episodes;
  std::map<std::pair<std::string, Pipeline>, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto key = std::make_pair(j.at("trial_id").get<std::string>(),
                                      pipeline_from_string(j.at("pipeline").get<std::string>()));
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, episodes.size()).first;
        episodes.push_back({key.first, key.second, {}, false, {}, {}, std::nullopt});
      }
      LoggedEpisode& ep = episodes[it->second];
      const auto event = j.at("event").get<std::string>();
      if (event == "begin") {
        ep.sync = sync_from_json(j.at("sync"));
        ep.begun = true;
      } else if (event == "sample") {
        ep.gates.push_back(gate_from_payload(ep.pipeline, j.at("payload")));
      } else if (event == "transition") {
        ep.transitions.push_back(transition_from_json(j));
      } else if (event == "decision") {
        ep.decision = j.at("decision").get<ReleaseDecision>();
      } else if (event != "end") {
        throw std::invalid_argument("unknown event: " + event);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("log line " + std::to_string(lineno) + ": " + e.what());
    }
  }

  ReplayReport report;
  for (const auto& ep : episodes) {
    if (!ep.begun) throw std::runtime_error("episode " + ep.trial_id + " has no begin event");
    ReplayEpisode out;
    out.trial_id = ep.trial_id;
    out.pipeline = ep.pipeline;
    out.logged = ep.decision;
    std::vector<Transition> transitions;
    FsmStatus status;
    for (const auto& g : ep.gates) {
      StepResult r = fsm_step(status, g, ep.sync);
      transitions.insert(transitions.end(), r.transitions.begin(), r.transitions.end());
      status = r.status;
      if (r.decision) {
        out.replayed = r.decision;
        break;
      }
    }
    out.matches = out.replayed == out.logged && transitions == ep.transitions;
    if (!out.matches) ++report.mismatches;
    report.episodes.push_back(std::move(out));
  }
  return report;
}

}  // namespace handover::fusion
