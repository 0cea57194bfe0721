#include "ois/cli/commands.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ois/cli/viz.hpp"
#include "ois/model/checkpoint.hpp"
#include "ois/model/trainer.hpp"
#include "ois/scenegen/scene.hpp"
#include "ois/simharness/ablation.hpp"
#include "ois/simharness/analysis.hpp"
#include "ois/simharness/instances.hpp"
#include "ois/simharness/report_io.hpp"

namespace ois {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Parsed but not yet validated options of every subcommand.
struct Options {
  // Shared.
  std::string data, out, checkpoint, split;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool untrained = false;
  // gen
  int count = 2000;
  int size = 64;
  // train / ablation
  std::string arm = "full";
  std::string resume, loss_curve;
  int epochs = 15;
  int batch_size = 8;
  double learning_rate = 3e-4;
  double sigma_lr_scale = TrainConfig{}.sigma_lr_scale;
  int log_every = 50;
  int embed_dim = 128;
  int input_size = 64;
  int fusion_blocks = 3;
  std::string order_normalization = "per_map_max";
  // eval
  bool oracle = false;
  bool sat = false;
  int max_clicks = kMaxClicks;
  // ablation
  std::string train_data, eval_data;
  std::vector<std::string> arms = {"full", "no_order", "no_dense", "no_sparse"};
  int seeds = 3;
  bool no_train = false;
  // viz / bench
  int scene = 0;
  int instance = -1;
  int rounds = 3;
  int instances = 20;
  int grid = 16;
};

void WriteJson(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  WriteFileBytes(path, j.dump(2) + "\n");
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  WriteFileBytes(path, text);
}

ModelConfig ModelConfigFrom(const Options& o) {
  ModelConfig c;
  c.arm = ParseArm(o.arm);
  c.embed_dim = o.embed_dim;
  c.input_size = o.input_size;
  c.fusion_blocks = o.fusion_blocks;
  c.order_normalization = ParseNormalization(o.order_normalization);
  c.Validate();
  return c;
}

TrainConfig TrainConfigFrom(const Options& o) {
  TrainConfig t;
  t.epochs = o.epochs;
  t.batch_size = o.batch_size;
  t.learning_rate = o.learning_rate;
  t.sigma_lr_scale = o.sigma_lr_scale;
  return t;
}

std::optional<SceneSplit> SplitFrom(const std::string& s) {
  if (s.empty() || s == "all" || s == "mixed") return std::nullopt;
  return ParseSplit(s);
}

OisModel<float> LoadModel(const Options& o, int image_size) {
  if (o.untrained) {
    Options sized = o;
    sized.input_size = image_size;
    return OisModel<float>(ModelConfigFrom(sized), o.seed);
  }
  if (o.checkpoint.empty()) {
    throw ConfigError("--checkpoint is required (or --untrained)");
  }
  if (!fs::exists(o.checkpoint)) {
    throw ConfigError("checkpoint not found: " + o.checkpoint);
  }
  return ModelFromCheckpoint(LoadCheckpoint(o.checkpoint));
}

int CmdGen(const Options& o, std::ostream& out) {
  DatasetManifest m;
  m.seed = o.seed;
  m.count = o.count;
  m.size = o.size;
  if (const auto split = SplitFrom(o.split)) {
    m.plain_ratio = *split == SceneSplit::kPlain ? 1.0 : 0.0;
    m.overlap_ratio = *split == SceneSplit::kOverlap ? 1.0 : 0.0;
    m.same_depth_ratio = *split == SceneSplit::kSameDepth ? 1.0 : 0.0;
  }
  const std::vector<Scene> scenes = GenerateDataset(m, o.jobs);
  ExportDataset(o.out, m, scenes);
  WriteJson(fs::path(o.out) / "run_config.json",
            {{"command", "gen"}, {"manifest", m}, {"split", o.split.empty() ? "mixed" : o.split}});
  out << "wrote " << scenes.size() << " scenes to " << o.out << "\n";
  return kExitOk;
}

int CmdTrain(const Options& o, std::ostream& out) {
  const LoadedDataset data = ImportDataset(o.data);
  const TrainConfig tc = TrainConfigFrom(o);
  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) resume = LoadCheckpoint(o.resume);
  Options sized = o;
  sized.input_size = data.manifest.size;
  OisModel<float> model = resume ? ModelFromCheckpoint(*resume)
                                 : OisModel<float>(ModelConfigFrom(sized), o.seed);
  Trainer trainer(model, tc, o.seed);
  if (resume) trainer.Resume(*resume);

  const fs::path ckpt_path = o.out;
  const fs::path curve_path =
      o.loss_curve.empty() ? fs::path(o.out + ".loss.csv") : fs::path(o.loss_curve);
  std::ostringstream curve;
  curve << "step,epoch,loss,grad_norm\n";
  trainer.Run(data.scenes, [&](const StepReport& r) {
    curve << r.step << "," << r.epoch << "," << r.loss << "," << r.grad_norm << "\n";
    if (o.log_every > 0 && r.step % o.log_every == 0) {
      out << "step " << r.step << " epoch " << r.epoch << " loss " << r.loss
          << " grad_norm " << r.grad_norm << "\n";
    }
  });
  const Checkpoint ckpt = trainer.MakeCheckpoint();
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  SaveCheckpoint(ckpt_path, ckpt);
  WriteText(curve_path, curve.str());
  WriteJson(o.out + ".config.json", {{"command", "train"},
                                     {"data", o.data},
                                     {"data_manifest", data.manifest},
                                     {"model", model.config()},
                                     {"train", tc},
                                     {"seed", o.seed},
                                     {"resumed_from", o.resume},
                                     {"step", ckpt.step},
                                     {"epoch_losses", ckpt.epoch_losses}});
  out << "saved " << ckpt_path.string() << " at step " << ckpt.step << "\n";
  return kExitOk;
}

int CmdEval(const Options& o, std::ostream& out) {
  const LoadedDataset data = ImportDataset(o.data);
  const std::vector<EvalInstance> instances =
      DatasetEvalInstances(data.scenes, SplitFrom(o.split));
  if (instances.empty()) throw DataError("no evaluation instances in " + o.data);
  ProtocolOptions popt;
  popt.max_clicks = o.max_clicks;
  std::vector<InteractionTrace> traces;
  std::optional<OisModel<float>> model;
  std::function<std::unique_ptr<InteractiveSegmenter>()> make;
  if (o.oracle) {
    make = [] { return std::make_unique<OracleSegmenter>(); };
  } else {
    model.emplace(LoadModel(o, data.manifest.size));
    make = [&] { return std::make_unique<ModelSegmenter>(*model); };
  }
  traces = RunProtocolAll(make, instances, popt, o.jobs);
  MetricReport report = Aggregate(traces, o.max_clicks);
  if (o.sat) {
    auto seg = make();
    report.sat_latency_s = MeasureSatLatency(*seg, instances.front(), o.grid);
  }
  const fs::path dir = o.out;
  fs::create_directories(dir);
  WriteText(dir / "traces.jsonl", TracesToJsonl(traces));
  WriteJson(dir / "report.json", ReportToJson(report));
  const std::string title = o.oracle ? "oracle" : (o.untrained ? "untrained" : o.checkpoint);
  const std::string table = FormatReport(title, report);
  WriteText(dir / "report.txt", table);
  WriteJson(dir / "run_config.json",
            {{"command", "eval"},
             {"data", o.data},
             {"checkpoint", o.checkpoint},
             {"oracle", o.oracle},
             {"split", o.split.empty() ? "all" : o.split},
             {"max_clicks", o.max_clicks},
             {"jobs", o.jobs},
             {"model", model ? json(model->config()) : json(nullptr)}});
  out << table;
  return kExitOk;
}

int CmdAblation(const Options& o, std::ostream& out) {
  const fs::path dir = o.out;
  const ProtocolOptions popt;
  std::vector<AblationArmSpec> specs;
  std::optional<LoadedDataset> train;
  if (!o.no_train) train = ImportDataset(o.train_data);
  const TrainConfig tc = TrainConfigFrom(o);
  for (const std::string& arm : o.arms) {
    Options arm_opts = o;
    arm_opts.arm = arm;
    arm_opts.input_size = train ? train->manifest.size : o.input_size;
    const ModelConfig mc = ModelConfigFrom(arm_opts);
    AblationArmSpec spec{arm, {}};
    for (int s = 0; s < o.seeds; ++s) {
      const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(s);
      const fs::path path = dir / "checkpoints" /
                            (arm + "_seed" + std::to_string(seed) + ".ckpt");
      if (!o.no_train) {
        const std::string key = TrainingKey(train->manifest, mc, tc, seed);
        out << "arm " << arm << " seed " << seed << "\n" << std::flush;
        TrainOrLoad(path, key, train->scenes, mc, tc, seed);
      }
      spec.checkpoints.push_back(path);
    }
    specs.push_back(spec);
  }
  const LoadedDataset eval = ImportDataset(o.eval_data);
  const auto instances = DatasetEvalInstances(eval.scenes, SplitFrom(o.split));
  if (instances.empty()) throw DataError("no evaluation instances in " + o.eval_data);
  const auto rows = RunAblation(specs, instances, popt, o.jobs);
  const std::string table = FormatAblationTable(
      "ablation on split " + (o.split.empty() ? std::string("all") : o.split), rows);
  WriteText(dir / "ablation.md", table);
  WriteJson(dir / "ablation.json", AblationToJson(rows));
  WriteJson(dir / "run_config.json", {{"command", "ablation"},
                                      {"train_data", o.train_data},
                                      {"eval_data", o.eval_data},
                                      {"arms", o.arms},
                                      {"seeds", o.seeds},
                                      {"base_seed", o.seed},
                                      {"split", o.split},
                                      {"train", tc}});
  out << table;
  return kExitOk;
}

int CmdViz(const Options& o, std::ostream& out) {
  const LoadedDataset data = ImportDataset(o.data);
  if (o.scene < 0 || o.scene >= static_cast<int>(data.scenes.size())) {
    throw ValidationError("--scene out of range");
  }
  const Scene& scene = data.scenes[o.scene];
  int instance = o.instance;
  if (instance < 0) {
    instance = scene.designated_pair ? scene.designated_pair->first : 0;
  }
  const OisModel<float> model = LoadModel(o, data.manifest.size);
  const VizPanels panels = RenderViz(model, scene, instance, o.rounds);
  WriteVizPanels(o.out, panels);
  WriteJson(fs::path(o.out) / "run_config.json", {{"command", "viz"},
                                                  {"data", o.data},
                                                  {"scene", o.scene},
                                                  {"instance", instance},
                                                  {"rounds", o.rounds},
                                                  {"checkpoint", o.checkpoint},
                                                  {"ious", panels.ious}});
  out << "wrote " << panels.order_maps.size() << " rounds of panels to " << o.out
      << "\n";
  return kExitOk;
}

int CmdBench(const Options& o, std::ostream& out) {
  const LoadedDataset data = ImportDataset(o.data);
  auto instances = DatasetEvalInstances(data.scenes, SplitFrom(o.split));
  if (instances.empty()) throw DataError("no evaluation instances in " + o.data);
  if (static_cast<int>(instances.size()) > o.instances) instances.resize(o.instances);
  const OisModel<float> model = LoadModel(o, data.manifest.size);
  const BenchReport report = RunBench(model, instances, o.grid);
  const std::string table = FormatBench(report);
  const fs::path dir = o.out;
  WriteText(dir / "bench.md", table);
  WriteJson(dir / "bench.json", BenchToJson(report));
  WriteJson(dir / "run_config.json", {{"command", "bench"},
                                      {"data", o.data},
                                      {"checkpoint", o.checkpoint},
                                      {"instances", instances.size()},
                                      {"grid", o.grid},
                                      {"model", model.config()}});
  out << table;
  return kExitOk;
}

void AddModelOptions(CLI::App* cmd, Options& o) {
  cmd->add_option("--arm", o.arm, "full, no_order, no_object, no_sparse, no_dense");
  cmd->add_option("--embed-dim", o.embed_dim, "Channel width");
  cmd->add_option("--fusion-blocks", o.fusion_blocks, "Order+object blocks");
  cmd->add_option("--order-normalization", o.order_normalization,
                  "per_map_max or depth_range");
}

void AddTrainOptions(CLI::App* cmd, Options& o) {
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--batch-size", o.batch_size, "Episodes per optimizer step");
  cmd->add_option("--lr", o.learning_rate, "Adam learning rate");
  cmd->add_option("--sigma-lr-scale", o.sigma_lr_scale,
                  "Learning-rate multiplier for the order-attention scales");
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Order-aware interactive segmentation toolkit"};
  app.require_subcommand(1);
  Options o;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic scene dataset");
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--seed", o.seed, "Dataset seed");
  gen->add_option("--count", o.count, "Number of scenes");
  gen->add_option("--size", o.size, "Scene side in pixels");
  gen->add_option("--split", o.split, "plain, overlap, same_depth or mixed");
  gen->add_option("--jobs", o.jobs, "Generator threads");

  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", o.data, "Dataset directory")->required();
  train->add_option("--out", o.out, "Checkpoint path")->required();
  train->add_option("--seed", o.seed, "Initialization and sampling seed");
  train->add_option("--resume", o.resume, "Checkpoint to continue from");
  train->add_option("--loss-curve", o.loss_curve, "CSV of per-step losses");
  train->add_option("--log-every", o.log_every, "Progress line every N steps");
  AddModelOptions(train, o);
  AddTrainOptions(train, o);

  CLI::App* eval = app.add_subcommand("eval", "Run the click protocol and metrics");
  eval->add_option("--data", o.data, "Dataset directory")->required();
  eval->add_option("--out", o.out, "Output directory")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  eval->add_flag("--oracle", o.oracle, "Use the ground-truth oracle");
  eval->add_flag("--untrained", o.untrained, "Use a freshly initialized model");
  eval->add_option("--split", o.split, "Restrict to one split");
  eval->add_option("--jobs", o.jobs, "Parallel instances");
  eval->add_option("--max-clicks", o.max_clicks, "Click budget");
  eval->add_flag("--sat", o.sat, "Also measure SAT latency");
  eval->add_option("--grid", o.grid, "SAT grid side");

  CLI::App* abl = app.add_subcommand("ablation", "Train and compare arms");
  abl->add_option("--train-data", o.train_data, "Training dataset");
  abl->add_option("--eval-data", o.eval_data, "Evaluation dataset")->required();
  abl->add_option("--out", o.out, "Output directory")->required();
  abl->add_option("--arms", o.arms, "Arms to compare")->delimiter(',');
  abl->add_option("--seeds", o.seeds, "Seeds per arm");
  abl->add_option("--seed", o.seed, "First seed");
  abl->add_option("--split", o.split, "Evaluation split");
  abl->add_option("--jobs", o.jobs, "Parallel instances");
  abl->add_flag("--no-train", o.no_train, "Only evaluate existing checkpoints");
  AddTrainOptions(abl, o);

  CLI::App* viz = app.add_subcommand("viz", "Render order maps, attention and overlays");
  viz->add_option("--data", o.data, "Dataset directory")->required();
  viz->add_option("--out", o.out, "Output directory")->required();
  viz->add_option("--scene", o.scene, "Scene index");
  viz->add_option("--instance", o.instance, "Instance index");
  viz->add_option("--rounds", o.rounds, "Protocol rounds to render");
  viz->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  viz->add_flag("--untrained", o.untrained, "Use a freshly initialized model");
  viz->add_option("--seed", o.seed, "Seed for --untrained");

  CLI::App* bench = app.add_subcommand("bench", "Latency and encode-once report");
  bench->add_option("--data", o.data, "Dataset directory")->required();
  bench->add_option("--out", o.out, "Output directory")->required();
  bench->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  bench->add_flag("--untrained", o.untrained, "Use a freshly initialized model");
  bench->add_option("--seed", o.seed, "Seed for --untrained");
  bench->add_option("--split", o.split, "Restrict to one split");
  bench->add_option("--instances", o.instances, "Instances to time");
  bench->add_option("--grid", o.grid, "SAT grid side");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return CmdGen(o, out);
    if (train->parsed()) return CmdTrain(o, out);
    if (eval->parsed()) return CmdEval(o, out);
    if (abl->parsed()) {
      if (!o.no_train && o.train_data.empty()) {
        throw ConfigError("--train-data is required unless --no-train is given");
      }
      return CmdAblation(o, out);
    }
    if (viz->parsed()) return CmdViz(o, out);
    if (bench->parsed()) return CmdBench(o, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PromptError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ois
