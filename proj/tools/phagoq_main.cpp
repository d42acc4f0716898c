// phagoq: phagocytosis quantification pipeline.
//
//   phagoq synth --output data
//   phagoq all --input data --output out --workers 4
//   phagoq eval-registration --trials 100 --max-shift 100

#include <atomic>
#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phagoq/error.hpp"
#include "phagoq/ingest/image_io.hpp"
#include "phagoq/pipeline/config.hpp"
#include "phagoq/pipeline/manifest.hpp"
#include "phagoq/pipeline/stages.hpp"
#include "phagoq/registration/harness.hpp"
#include "phagoq/synth/dataset.hpp"

namespace {

using namespace phagoq;
using pipeline::Stage;

enum Exit { kOk = 0, kConfig = 1, kIo = 2, kPartial = 3 };

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

struct Flags {
  std::string config;
  std::string input;
  std::string output;
  std::string scenes;
  std::string condition;
  int workers = 0;
  std::uint64_t seed = 1;
  bool resume = false;
};

pipeline::PipelineConfig resolve(const Flags& f, std::vector<std::string>& args) {
  pipeline::PipelineConfig c = f.config.empty() ? pipeline::default_config() : pipeline::load_config(f.config);
  if (!f.input.empty()) {
    c.dataset.root = f.input;
    args.push_back("--input=" + f.input);
  }
  if (!f.output.empty()) {
    c.run.output = f.output;
    args.push_back("--output=" + f.output);
  }
  if (!f.scenes.empty()) {
    c.run.scenes = f.scenes;
    args.push_back("--scenes=" + f.scenes);
  }
  if (f.workers != 0) {
    c.run.workers = f.workers;
    args.push_back("--workers=" + std::to_string(f.workers));
  }
  if (!f.condition.empty()) args.push_back("--condition=" + f.condition);
  if (f.resume) args.push_back("--resume");
  c.validate();
  return c;
}

int report_outcomes(const std::vector<pipeline::SceneOutcome>& outcomes) {
  int bad = 0;
  for (const auto& o : outcomes) {
    if (o.status == "failed") std::cerr << "scene " << o.key << " failed: " << o.error << "\n";
    if (o.status == "skipped") std::cerr << "scene " << o.key << " skipped\n";
    bad += o.status == "failed" || o.status == "skipped";
  }
  std::cout << outcomes.size() - static_cast<std::size_t>(bad) << "/" << outcomes.size() << " scenes completed\n";
  return bad;
}

int run_pipeline(const std::string& sub, const std::vector<Stage>& stages, bool with_report, const Flags& flags) {
  std::vector<std::string> args;
  const auto config = resolve(flags, args);
  const auto scenes = pipeline::select_scenes(config, flags.condition);
  if (scenes.empty()) throw IoError("no scenes match under " + config.dataset.root.string());

  pipeline::RunRecord record;
  record.subcommand = sub;
  record.arguments = args;
  int bad = 0;
  if (!stages.empty()) {
    pipeline::RunOptions opts;
    opts.resume = flags.resume;
    opts.stop = &g_stop;
    record.outcomes = pipeline::run_scene_stages(scenes, stages, config, opts);
    bad = report_outcomes(record.outcomes);
    if (g_stop.load()) {
      record.notes.push_back("interrupted; finished scenes are complete, rerun with --resume");
      std::cerr << "interrupted; rerun with --resume to continue\n";
    }
  }
  if (with_report && !g_stop.load()) {
    const auto summary = pipeline::run_report(scenes, config);
    for (const auto& e : summary.excluded) {
      std::cerr << "report excludes " << e << "\n";
      record.notes.push_back("report excludes " + e);
    }
    std::cout << "report: " << summary.included.size() << " scenes -> " << (config.run.output / "report").string()
              << "\n";
  }
  pipeline::write_run_manifest(config, scenes, record);
  return bad > 0 || g_stop.load() ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phagoq: phagocytosis quantification from two-channel time-lapse stacks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("Configuration keys (YAML section.key = default; environment override in brackets):\n" +
             pipeline::describe_keys() +
             "\nExit codes: 0 ok, 1 configuration, 2 input/output, 3 partial failure.\n"
             "Scenes are independent; to shard a dataset across machines run disjoint --scenes globs.");

  Flags flags;
  app.add_option("--config", flags.config, "YAML configuration file or a run manifest");
  app.add_option("--input", flags.input, "dataset root (overrides dataset.root)");
  app.add_option("--output", flags.output, "output root (overrides run.output)");
  app.add_option("--scenes", flags.scenes, "glob over condition/scene (overrides run.scenes)");
  app.add_option("--condition", flags.condition, "process only this condition");
  app.add_option("--workers", flags.workers, "scenes in parallel (overrides run.workers)")->check(CLI::Range(1, 1024));
  app.add_option("--seed", flags.seed, "random seed for synth and eval-registration");
  app.add_flag("--resume", flags.resume, "skip scene stages already completed with the same configuration");

  struct StageCommand {
    const char* name;
    const char* help;
    std::vector<Stage> stages;
    bool report;
  };
  const std::vector<StageCommand> stage_commands = {
      {"normalize", "percentile normalization and cell histogram matching", {Stage::Normalize}, false},
      {"register", "cascade ECC drift estimation and alignment", {Stage::Register}, false},
      {"qc", "blur detection and scene quality gate", {Stage::Qc}, false},
      {"aggregates", "aggregate segmentation, matching and phagocytosis events", {Stage::Aggregates}, false},
      {"cells", "time-coherent seeded watershed cell instances", {Stage::Cells}, false},
      {"track", "cell tracking and motility", {Stage::Track}, false},
      {"report", "two-condition statistics and plot data", {}, true},
      {"all", "every stage then the report",
       {Stage::Normalize, Stage::Register, Stage::Qc, Stage::Aggregates, Stage::Cells, Stage::Track}, true},
  };
  std::vector<std::pair<CLI::App*, const StageCommand*>> subs;
  for (const auto& sc : stage_commands) subs.emplace_back(app.add_subcommand(sc.name, sc.help), &sc);

  auto* eval = app.add_subcommand("eval-registration", "shift-recovery harness on a synthetic aggregate frame");
  registration::HarnessOptions hopts;
  int eval_size = 512;
  std::string eval_image;
  eval->add_option("--trials", hopts.trials, "number of random shifts")->check(CLI::PositiveNumber);
  eval->add_option("--max-shift", hopts.max_shift, "largest shift per axis in pixels")->check(CLI::PositiveNumber);
  eval->add_option("--size", eval_size, "side of the synthetic frame")->check(CLI::Range(64, 8192));
  eval->add_option("--image", eval_image, "use this image instead of the synthetic frame");

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic two-condition dataset with ground truth");
  synth::SynthSpec spec;
  synth_cmd->add_option("--scenes-per-condition", spec.scenes_per_condition);
  synth_cmd->add_option("--frames", spec.frames);
  synth_cmd->add_option("--size", spec.width, "frame side in pixels");
  synth_cmd->add_option("--cells", spec.cells);
  synth_cmd->add_option("--aggregates", spec.aggregates);
  synth_cmd->add_option("--events", spec.events, "planted phagocytosis events per scene");
  synth_cmd->add_option("--max-drift", spec.max_drift_px, "bound on cumulative drift per axis");
  synth_cmd->add_option("--blur-frames", spec.blur_frames, "frames to Gaussian-blur");
  synth_cmd->add_option("--blur-sigma", spec.blur_sigma);
  bool no_probability = false;
  synth_cmd->add_flag("--no-probability", no_probability, "omit the probability channel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  std::signal(SIGINT, on_sigint);
  try {
    for (const auto& [cmd, sc] : subs) {
      if (cmd->parsed()) return run_pipeline(sc->name, sc->stages, sc->report, flags);
    }
    if (eval->parsed()) {
      std::vector<std::string> args = {"--trials=" + std::to_string(hopts.trials),
                                       "--max-shift=" + std::to_string(hopts.max_shift),
                                       "--seed=" + std::to_string(flags.seed)};
      const auto config = resolve(flags, args);
      hopts.seed = flags.seed;
      hopts.workers = config.run.workers;
      const Frame image = eval_image.empty() ? synth::blob_texture(eval_size, eval_size, eval_size / 2, flags.seed)
                                             : io::read_frame(eval_image);
      const auto result = registration::shift_eval_harness(image, hopts, config.registration.schedule);
      std::filesystem::create_directories(config.run.output);
      const auto csv_path = config.run.output / "registration_eval.csv";
      registration::write_harness_csv(csv_path, result);
      pipeline::RunRecord record{"eval-registration", args, {}, {}};
      pipeline::write_run_manifest(config, {}, record);
      std::cout << "x: mean|err| " << result.x.mean_abs << " std " << result.x.std_abs << " mean err "
                << result.x.mean_signed << "\n"
                << "y: mean|err| " << result.y.mean_abs << " std " << result.y.std_abs << " mean err "
                << result.y.mean_signed << "\n"
                << result.trials.size() << " trials in " << result.total_seconds << " s -> " << csv_path.string()
                << "\n";
      return kOk;
    }
    if (synth_cmd->parsed()) {
      spec.height = spec.width;
      spec.seed = flags.seed;
      spec.probability = !no_probability;
      const std::filesystem::path root = flags.output.empty() ? "phagoq_synth" : flags.output;
      synth::synth_dataset(root, spec);
      std::cout << "synthetic dataset -> " << root.string() << "\n";
      return kOk;
    }
  } catch (const pipeline::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const UnsupportedConfiguration& e) {
    std::cerr << "unsupported configuration: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartial;
  }
  return kOk;
}
