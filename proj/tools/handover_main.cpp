// handover: command-line front end for dataset synthesis, classifier
// training and evaluation, the simulated release experiment, and log replay.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "handover/fusion.hpp"
#include "handover/harness.hpp"
#include "handover/multibox.hpp"
#include "handover/synth.hpp"
#include "handover/torque_classifier.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace handover;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir;  // empty: "out", or the config's out_dir for simulate
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<classifier::LabeledWindow> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return synth::read_dataset_jsonl(in);
}

harness::ExperimentConfig load_config(const Globals& g) {
  harness::ExperimentConfig c;
  if (!g.config.empty()) c = harness::experiment_config_from_json(read_json(g.config));
  if (g.seed) c.seed = *g.seed;
  return c;
}

void print_epoch(const classifier::EpochMetrics& m) {
  std::printf("epoch %3zu  loss %.4f  train %.3f  heldout %.3f\n", m.epoch, m.loss,
              m.train_accuracy, m.heldout_accuracy);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot-to-human handover release pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out-dir", g.out_dir, "Directory for artifacts (default out)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled torque-window dataset");
  std::size_t per_class = 300;
  double noise = synth::TorqueSignatureModel::defaults().noise_sigma;
  std::string synth_out;
  std::string scenario_action;
  synth_cmd->add_option("--per-class", per_class, "Windows per class")->capture_default_str();
  synth_cmd->add_option("--noise", noise, "Torque noise sigma (N·m)")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output JSONL (default <out-dir>/dataset.jsonl)");
  synth_cmd->add_option("--scenario", scenario_action,
                        "Write one episode stream for this action instead of a dataset");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the torque classifier");
  std::string train_dataset;
  std::string train_out;
  std::optional<std::size_t> train_epochs;
  train_cmd->add_option("--dataset", train_dataset, "Labeled JSONL dataset")->required();
  train_cmd->add_option("--out", train_out, "Model JSON (default <out-dir>/model.json)");
  train_cmd->add_option("--epochs", train_epochs, "Training epochs");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  std::string eval_model;
  std::string eval_dataset;
  std::string eval_report;
  eval_cmd->add_option("--model", eval_model, "Model JSON")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "Labeled JSONL dataset")->required();
  eval_cmd->add_option("--report", eval_report, "JSON report (default <out-dir>/eval.json)");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Run the three-pipeline release experiment");
  std::string sim_model;
  std::optional<std::size_t> sim_trials;
  bool quiet = false;
  sim_cmd->add_option("--model", sim_model, "Trained model (trains one when omitted)");
  sim_cmd->add_option("--trials", sim_trials, "Trials per action");
  sim_cmd->add_flag("--quiet", quiet, "Do not print the report");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the state machine from an episode log");
  std::string replay_log;
  replay_cmd->add_option("--log", replay_log, "episodes.jsonl")->required();

  // multibox
  auto* mb_cmd = app.add_subcommand("multibox", "Evaluate the multibox loss of a JSON instance");
  std::string mb_instance;
  mb_cmd->add_option("--instance", mb_instance, "Instance JSON")->required();

  CLI11_PARSE(app, argc, argv);
  const bool out_dir_given = !g.out_dir.empty();
  if (!out_dir_given) g.out_dir = "out";

  try {
    if (*synth_cmd) {
      const std::uint64_t seed = g.seed.value_or(2021);
      auto model = synth::TorqueSignatureModel::defaults();
      model.noise_sigma = noise;
      if (!scenario_action.empty()) {
        const auto script = synth::generate_scenario(action_from_string(scenario_action),
                                                     synth::FaultProfile{}, seed, model);
        const fs::path out = synth_out.empty() ? fs::path(g.out_dir) / "scenario.jsonl" : fs::path(synth_out);
        auto f = open_out(out);
        synth::write_scenario_jsonl(f, script);
        std::printf("wrote %s episode to %s\n", scenario_action.c_str(), out.string().c_str());
        return 0;
      }
      const auto data = synth::generate_dataset(model, per_class, seed);
      const fs::path out = synth_out.empty() ? fs::path(g.out_dir) / "dataset.jsonl" : fs::path(synth_out);
      auto f = open_out(out);
      synth::write_dataset_jsonl(f, data);
      std::printf("wrote %zu windows to %s\n", data.size(), out.string().c_str());
      return 0;
    }

    if (*train_cmd) {
      const auto data = read_dataset(train_dataset);
      classifier::TorqueNetConfig cfg;
      if (g.seed) cfg.seed = *g.seed;
      if (train_epochs) cfg.epochs = *train_epochs;
      const auto result = classifier::train(data, cfg, print_epoch);
      const fs::path out = train_out.empty() ? fs::path(g.out_dir) / "model.json" : fs::path(train_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      classifier::save_model(result.model, out);
      std::printf("\nheld-out accuracy %.4f (%zu windows)\n%s", result.report.heldout_accuracy,
                  result.report.heldout_count,
                  classifier::format_confusion(result.report.confusion).c_str());
      std::printf("training took %.1f s; model written to %s\n", result.report.wall_clock_seconds,
                  out.string().c_str());
      return 0;
    }

    if (*eval_cmd) {
      const auto model = classifier::load_model(eval_model);
      const auto data = read_dataset(eval_dataset);
      const auto report = classifier::evaluate(model, data);
      std::printf("%s", classifier::format_confusion(report.confusion).c_str());
      std::printf("accuracy %.4f (%zu/%zu)\n", report.accuracy(), report.correct, report.total);
      const fs::path out = eval_report.empty() ? fs::path(g.out_dir) / "eval.json" : fs::path(eval_report);
      auto f = open_out(out);
      f << classifier::evaluation_to_json(report).dump(2) << '\n';
      return 0;
    }

    if (*sim_cmd) {
      auto config = load_config(g);
      if (sim_trials) config.trials_per_action = *sim_trials;
      if (!sim_model.empty()) config.model_path = sim_model;
      if (out_dir_given) config.out_dir = g.out_dir;
      config.validate();
      const fs::path out_dir(config.out_dir);
      fs::create_directories(out_dir);

      if (config.model_path.empty() && config.train_if_missing) {
        std::fprintf(stderr, "no model given; training on a synthesized dataset\n");
      }
      auto obtained = harness::obtain_model(config);
      if (!obtained.dataset.empty()) {
        auto f = open_out(out_dir / "dataset.jsonl");
        synth::write_dataset_jsonl(f, obtained.dataset);
      }
      const classifier::TorqueModel& model = obtained.model;
      classifier::save_model(model, out_dir / "model.json");

      const auto result = harness::run_experiment(config, model);
      harness::write_artifacts(out_dir, result);
      if (!quiet) std::cout << harness::render_report_text(result.table, result.gates);
      return harness::all_passed(result.gates) ? 0 : 2;
    }

    if (*replay_cmd) {
      std::ifstream in(replay_log);
      if (!in) throw std::runtime_error("cannot open " + replay_log);
      const auto report = fusion::replay_log(in);
      for (const auto& e : report.episodes) {
        std::printf("%-16s %-12s %s  logged=%s replayed=%s\n", e.trial_id.c_str(),
                    std::string(fusion::to_string(e.pipeline)).c_str(), e.matches ? "ok      " : "MISMATCH",
                    e.logged ? (e.logged->release ? "release" : "hold") : "none",
                    e.replayed ? (e.replayed->release ? "release" : "hold") : "none");
      }
      std::printf("%zu episodes, %zu mismatches\n", report.episodes.size(), report.mismatches);
      return report.mismatches == 0 ? 0 : 1;
    }

    if (*mb_cmd) {
      const auto inst = multibox::instance_from_json(read_json(mb_instance));
      std::printf("matched %zu\nconfidence %.10g\nlocalization %.10g\ntotal %.10g\n", inst.n(),
                  multibox::confidence_loss(inst), multibox::localization_loss(inst),
                  multibox::total_loss(inst));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
