#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "handover/fusion.hpp"
#include "oracles.hpp"

using namespace handover;
using namespace handover::fusion;

namespace {

TorqueEvent torque_at(TimestampMs t, ActionClass a = ActionClass::Pull) {
  return {t, ActionScores::one_hot(a)};
}

VisionEvent vision_at(TimestampMs t, bool vote = true, int fingers = 4) {
  VisionEvent e;
  e.timestamp = t;
  e.verdict.vote = vote;
  e.verdict.fingers_in_slab = fingers;
  e.verdict.thumb_in_slab = vote;
  e.verdict.evaluated_at = t;
  return e;
}

GateInput gate(TimestampMs t, bool torque, bool vision, bool contact = true) {
  return {t, contact, torque, vision, torque ? ActionClass::Pull : ActionClass::Push};
}

// Feeds the inputs until release; returns the 1-based index of the
// releasing input, or 0.
std::size_t release_index(const std::vector<GateInput>& inputs, const SyncConfig& config) {
  FsmStatus s;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto r = fsm_step(s, inputs[k], config);
    s = r.status;
    if (r.decision) return k + 1;
  }
  return 0;
}

}  // namespace

TEST(Synchronize, PairsWithinWindow) {
  const std::vector<TorqueEvent> t{torque_at(1000)};
  const std::vector<VisionEvent> v{vision_at(960)};
  const auto r = synchronize(t, v, SyncConfig{});
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0].skew_ms, 40);
  EXPECT_EQ(r.dropped, 0u);
}

TEST(Synchronize, DropsBeyondWindow) {
  const std::vector<TorqueEvent> t{torque_at(1000)};
  const std::vector<VisionEvent> v{vision_at(880)};
  const auto r = synchronize(t, v, SyncConfig{});
  EXPECT_TRUE(r.samples.empty());
  EXPECT_EQ(r.dropped, 1u);
  const std::vector<VisionEvent> edge{vision_at(900)};
  EXPECT_EQ(synchronize(t, edge, SyncConfig{}).samples.size(), 1u);
}

TEST(Synchronize, IgnoresFutureVision) {
  const std::vector<TorqueEvent> t{torque_at(1000)};
  const std::vector<VisionEvent> v{vision_at(950), vision_at(1010)};
  const auto r = synchronize(t, v, SyncConfig{});
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0].vision.timestamp, 950);
}

TEST(Synchronize, RejectsUnorderedInputAndBadConfig) {
  const std::vector<TorqueEvent> t{torque_at(1000), torque_at(900)};
  const std::vector<VisionEvent> v{vision_at(950)};
  EXPECT_THROW(synchronize(t, v, SyncConfig{}), std::invalid_argument);
  const std::vector<TorqueEvent> ok{torque_at(1000)};
  const std::vector<VisionEvent> bad{vision_at(950), vision_at(940)};
  EXPECT_THROW(synchronize(ok, bad, SyncConfig{}), std::invalid_argument);
  EXPECT_THROW(synchronize(ok, v, SyncConfig{0, 3}), std::invalid_argument);
  EXPECT_THROW(synchronize(ok, v, SyncConfig{100, 0}), std::invalid_argument);
}

TEST(Synchronize, MatchesBruteForcePairing) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> jitter(-6, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const SyncConfig cfg{static_cast<TimestampMs>(20 + rep % 120), 3};
    std::vector<TorqueEvent> t;
    std::vector<VisionEvent> v;
    std::vector<long long> vt;
    TimestampMs last = -1;
    for (int k = 0; k < 40; ++k) {
      const TimestampMs ts = std::max<TimestampMs>(last, 125 * k + jitter(rng));
      last = ts;
      t.push_back(torque_at(ts, kAllActions[static_cast<std::size_t>(k) % 6]));
    }
    last = -1;
    for (int k = 0; k < 160; ++k) {
      if (u(rng) < 0.3) continue;  // gaps force drops
      const TimestampMs ts = std::max<TimestampMs>(last, 33 * k + jitter(rng));
      last = ts;
      v.push_back(vision_at(ts, u(rng) < 0.5));
      vt.push_back(ts);
    }
    const auto r = synchronize(t, v, cfg);
    std::size_t out = 0, dropped = 0;
    for (const auto& te : t) {
      const auto want = oracle::latest_partner(te.timestamp, vt, cfg.pairing_window_ms);
      if (!want) {
        ++dropped;
        continue;
      }
      ASSERT_LT(out, r.samples.size());
      const auto& s = r.samples[out++];
      ASSERT_EQ(s.torque, te);
      ASSERT_EQ(s.vision.timestamp, vt[*want]);
      ASSERT_GE(s.skew_ms, 0);
      ASSERT_LE(s.skew_ms, cfg.pairing_window_ms);
      ASSERT_EQ(s.fused_vote, classifier::torque_vote(s.torque.scores) && s.vision.verdict.vote);
    }
    ASSERT_EQ(out, r.samples.size());
    ASSERT_EQ(dropped, r.dropped);
    for (std::size_t k = 1; k < r.samples.size(); ++k)
      ASSERT_LE(r.samples[k - 1].torque.timestamp, r.samples[k].torque.timestamp);
  }
}

TEST(Fuse, AndTruthTable) {
  for (bool tv : {false, true}) {
    for (bool vv : {false, true}) {
      const auto s = fuse(torque_at(100, tv ? ActionClass::Hold : ActionClass::Bump), vision_at(90, vv));
      EXPECT_EQ(s.fused_vote, tv && vv);
      EXPECT_EQ(s.skew_ms, 10);
    }
  }
}

TEST(Fsm, ThreeAgreeingSamplesRelease) {
  FsmStatus s;
  const SyncConfig cfg;
  std::vector<StepResult> steps;
  for (int k = 0; k < 3; ++k) {
    steps.push_back(fsm_step(s, fuse(torque_at(1000 + 125 * k), vision_at(990 + 125 * k)), cfg));
    s = steps.back().status;
  }
  EXPECT_FALSE(steps[0].decision);
  EXPECT_FALSE(steps[1].decision);
  ASSERT_TRUE(steps[2].decision);
  EXPECT_TRUE(steps[2].decision->release);
  EXPECT_EQ(steps[2].decision->action, ActionClass::Pull);
  EXPECT_EQ(steps[2].decision->decided_at, 1250);
  EXPECT_EQ(s.state, FsmState::Released);
  ASSERT_EQ(steps[0].transitions.size(), 1u);
  EXPECT_EQ(steps[0].transitions[0].to, FsmState::ContactPending);
  ASSERT_EQ(steps[2].transitions.size(), 2u);
  EXPECT_EQ(steps[2].transitions[0].to, FsmState::ReleaseArmed);
  EXPECT_EQ(steps[2].transitions[1].to, FsmState::Released);
}

TEST(Fsm, DebounceResetSequence) {
  const std::vector<bool> votes{true, true, false, true, true, true};
  std::vector<GateInput> in;
  for (std::size_t k = 0; k < votes.size(); ++k) in.push_back(gate(static_cast<TimestampMs>(k), votes[k], true));
  EXPECT_EQ(release_index(in, SyncConfig{}), 6u);
}

TEST(Fsm, PushNeverReleases) {
  std::vector<GateInput> in;
  for (int k = 0; k < 50; ++k) in.push_back(gate_input(fuse(torque_at(k * 125, ActionClass::Push), vision_at(k * 125))));
  EXPECT_EQ(release_index(in, SyncConfig{}), 0u);
}

TEST(Fsm, PullWithoutGraspNeverReleases) {
  std::vector<GateInput> in;
  for (int k = 0; k < 50; ++k) in.push_back(gate_input(fuse(torque_at(k * 125), vision_at(k * 125, false, 2))));
  EXPECT_EQ(release_index(in, SyncConfig{}), 0u);
}

TEST(Fsm, NoContactKeepsIdle) {
  FsmStatus s;
  const auto r = fsm_step(s, gate(0, true, true, false), SyncConfig{1, 1});
  EXPECT_EQ(r.status.state, FsmState::HoldingIdle);
  EXPECT_FALSE(r.decision);
  const auto r2 = fsm_step(s, gate(0, true, true, true), SyncConfig{1, 1});
  EXPECT_EQ(r2.status.state, FsmState::Released);
  EXPECT_TRUE(r2.decision);
}

TEST(Fsm, ReleasedIsTerminal) {
  EXPECT_THROW(fsm_step(FsmStatus{FsmState::Released, 3}, gate(0, true, true), SyncConfig{}), std::logic_error);
}

TEST(Fsm, StateNamesRoundTrip) {
  for (auto s : {FsmState::HoldingIdle, FsmState::ContactPending, FsmState::ReleaseArmed, FsmState::Released})
    EXPECT_EQ(fsm_state_from_string(to_string(s)), s);
  for (auto p : kAllPipelines) EXPECT_EQ(pipeline_from_string(to_string(p)), p);
}

TEST(Fsm, RandomSequencesReleaseAtMostOnceAndOnlyOnAgreement) {
  std::mt19937_64 rng(23);
  std::bernoulli_distribution coin(0.7);
  for (int rep = 0; rep < 2000; ++rep) {
    const SyncConfig cfg{100, static_cast<std::uint32_t>(1 + rep % 4)};
    const bool torque_dead = rep % 5 == 0;
    const bool vision_dead = rep % 7 == 0;
    FsmStatus s;
    int releases = 0;
    for (int k = 0; k < 30 && s.state != FsmState::Released; ++k) {
      const auto r = fsm_step(s, gate(k, !torque_dead && coin(rng), !vision_dead && coin(rng), coin(rng)), cfg);
      if (r.decision) {
        ++releases;
        ASSERT_TRUE(r.decision->release);
      }
      s = r.status;
    }
    ASSERT_LE(releases, 1);
    if (torque_dead || vision_dead) ASSERT_EQ(releases, 0);
  }
}

TEST(RunPipeline, GatesPerPipeline) {
  std::vector<TorqueEvent> t;
  std::vector<VisionEvent> v;
  for (int k = 0; k < 20; ++k) t.push_back(torque_at(975 + 125 * k, ActionClass::Push));
  for (int k = 0; k < 80; ++k) v.push_back(vision_at(33 * k, k >= 40));
  const SyncConfig cfg;
  EXPECT_FALSE(run_pipeline(Pipeline::TorqueOnly, ActionClass::Push, t, v, cfg).released());
  EXPECT_TRUE(run_pipeline(Pipeline::VisionOnly, ActionClass::Push, t, v, cfg).released());
  EXPECT_FALSE(run_pipeline(Pipeline::Fused, ActionClass::Push, t, v, cfg).released());
  EXPECT_TRUE(run_pipeline(Pipeline::Fused, ActionClass::Push, t, v, cfg).success());
  EXPECT_FALSE(run_pipeline(Pipeline::VisionOnly, ActionClass::Push, t, v, cfg).success());

  EXPECT_NO_THROW(run_pipeline(Pipeline::TorqueOnly, ActionClass::Push, t, {}, cfg));
  EXPECT_NO_THROW(run_pipeline(Pipeline::VisionOnly, ActionClass::Push, {}, v, cfg));
  EXPECT_THROW(run_pipeline(Pipeline::Fused, ActionClass::Push, t, {}, cfg), std::invalid_argument);
  EXPECT_THROW(run_pipeline(Pipeline::Fused, ActionClass::Push, {}, v, cfg), std::invalid_argument);
}

TEST(RunPipeline, LogReplaysIdentically) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.6);
  EpisodeLog log;
  for (int ep = 0; ep < 30; ++ep) {
    std::vector<TorqueEvent> t;
    std::vector<VisionEvent> v;
    for (int k = 0; k < 20; ++k) t.push_back(torque_at(975 + 125 * k, coin(rng) ? ActionClass::Pull : ActionClass::Bump));
    for (int k = 0; k < 80; ++k) v.push_back(vision_at(33 * k, coin(rng)));
    for (auto p : kAllPipelines)
      run_pipeline(p, ActionClass::Pull, t, v, SyncConfig{}, &log, "ep-" + std::to_string(ep));
  }
  std::ostringstream out;
  log.write(out);
  std::istringstream in(out.str());
  const auto report = replay_log(in);
  EXPECT_EQ(report.episodes.size(), 90u);
  EXPECT_EQ(report.mismatches, 0u);

  // Removing a logged decision line must be noticed.
  std::string text = out.str();
  const auto pos = text.find("\"event\":\"decision\"");
  ASSERT_NE(pos, std::string::npos);
  const auto start = text.rfind('\n', pos) + 1;
  text.erase(start, text.find('\n', pos) + 1 - start);
  std::istringstream tampered(text);
  EXPECT_EQ(replay_log(tampered).mismatches, 1u);
}

TEST(EventJson, RoundTrip) {
  const auto s = fuse(torque_at(1000, ActionClass::Hold), vision_at(975));
  EXPECT_EQ(fused_sample_from_json(nlohmann::json::parse(fused_sample_json(s).dump())), s);
}
