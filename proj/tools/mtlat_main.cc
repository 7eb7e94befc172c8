// Copyright (c) the mtlat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtlat/attacks.h"
#include "mtlat/bench.h"
#include "mtlat/checkpoint.h"
#include "mtlat/config.h"
#include "mtlat/corruptions.h"
#include "mtlat/errors.h"
#include "mtlat/image_io.h"
#include "mtlat/kernels.h"
#include "mtlat/rng.h"

namespace fs = std::filesystem;

namespace mtlat {
namespace {

// --out is rooted under $MTLAT_OUTPUT_ROOT when that is set and the path is
// relative.
fs::path ResolveOutputDir(const std::string& out) {
  fs::path p(out);
  const char* root = std::getenv("MTLAT_OUTPUT_ROOT");
  if (root && *root && p.is_relative()) p = fs::path(root) / p;
  return p;
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

std::string ReadTextFile(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

struct CommonArgs {
  std::string config_path;
  std::string out = "out";
  int jobs = 0;      // 0 = take from config
  int64_t seed = -1;  // -1 = take from config
};

RunConfig LoadConfigWithOverrides(const CommonArgs& args) {
  RunConfig config =
      args.config_path.empty() ? RunConfig() : RunConfig::Load(args.config_path);
  if (args.jobs > 0) config.jobs = args.jobs;
  if (args.seed >= 0) config.seed = static_cast<uint64_t>(args.seed);
  if (args.out != "out" || config.output_dir.empty()) {
    config.output_dir = args.out;
  }
  kernels::SetThreads(config.jobs);
  return config;
}

int CmdTrain(const CommonArgs& args, const std::string& mode_override,
             const std::string& arch_override, int epochs_override) {
  RunConfig config = LoadConfigWithOverrides(args);
  if (!mode_override.empty()) {
    config.train.recipe.mode = TrainModeFromName(mode_override);
  }
  if (!arch_override.empty()) config.train.arch = arch_override;
  if (epochs_override > 0) config.train.recipe.epochs = epochs_override;
  config.train.recipe.seed = DeriveSeed(config.seed, "train");

  const fs::path out = ResolveOutputDir(config.output_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw ConfigError("cannot create output directory: " + out.string());
  }
  WriteTextFile(out / "config.resolved.json", config.ResolvedJson());

  const Dataset dataset = BuildDataset(config);
  const Arch arch = ArchFromName(config.train.arch);

  std::ofstream log(out / "train_log.jsonl", std::ios::trunc);
  std::vector<EpochRecord> records;
  const ModelParams model =
      TrainModel(arch, dataset, config.train.recipe, &records, &log);
  SaveCheckpoint(model, (out / "checkpoint.mtlat").string());

  const double final_acc =
      records.empty() ? 0.0 : records.back().clean_test_accuracy;
  std::cout << "trained " << TrainModeName(config.train.recipe.mode) << " "
            << config.train.arch << " for " << config.train.recipe.epochs
            << " epochs; clean test accuracy " << final_acc << "%\n"
            << "checkpoint: " << (out / "checkpoint.mtlat").string() << "\n";
  return 0;
}

int CmdBench(const CommonArgs& args, const std::string& victim_path,
             const std::string& surrogate_path,
             const std::string& baseline_path) {
  RunConfig config = LoadConfigWithOverrides(args);
  const fs::path out = ResolveOutputDir(config.output_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw ConfigError("cannot create output directory: " + out.string());
  }
  WriteTextFile(out / "config.resolved.json", config.ResolvedJson());

  const ModelParams victim = LoadCheckpoint(victim_path);
  const ModelParams surrogate = LoadCheckpoint(surrogate_path);
  const Dataset dataset = BuildDataset(config);

  BenchOptions opts = config.bench;
  if (!config.calibrate_reference.empty()) {
    const ModelParams reference = LoadCheckpoint(config.calibrate_reference);
    const uint64_t cal_seed = DeriveSeed(config.seed, "bench/calibration");
    for (int k = 0; k < kNumCorruptions; ++k) {
      const CorruptionKind kind = static_cast<CorruptionKind>(k);
      const CalibrationResult cal =
          CalibrateSeverity(kind, reference, dataset.test, cal_seed);
      opts.table.SetBounds(kind, cal.low, cal.high);
    }
  }

  const RobustnessReport report =
      RunBenchmark(victim, surrogate, dataset, DeriveSeed(config.seed, "bench"),
                   opts, fs::path(victim_path).stem().string());

  RobustnessReport baseline;
  const bool have_baseline = !baseline_path.empty();
  if (have_baseline) baseline = ParseReportJson(ReadTextFile(baseline_path));

  WriteTextFile(out / "report.json", EmitReportJson(report));
  WriteTextFile(out / "report.csv", EmitReportCsv(report));
  WriteTextFile(out / "report.md",
                EmitReportMarkdown(report, have_baseline ? &baseline : nullptr));
  std::cout << "clean accuracy " << report.a_clean << "% over "
            << report.clean_total << " images; " << report.entries.size()
            << " perturbation rows\nreports in " << out.string() << "\n";
  return 0;
}

int CmdCorrupt(const CommonArgs& args, const std::string& input_dir,
               const std::string& kind_name, int severity) {
  RunConfig config = LoadConfigWithOverrides(args);
  const CorruptionKind kind = CorruptionFromName(kind_name);
  if (severity < 1 || severity > 5) {
    throw ConfigError("severity must be in 1..5");
  }
  const fs::path out = ResolveOutputDir(config.output_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw ConfigError("cannot create output directory: " + out.string());
  }

  std::vector<fs::path> inputs;
  if (!fs::is_directory(input_dir)) {
    throw DataError("input directory not found: " + input_dir);
  }
  for (const auto& e : fs::directory_iterator(input_dir)) {
    if (e.path().extension() == ".ppm") inputs.push_back(e.path());
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw DataError("no .ppm images in " + input_dir);

  const SeverityTable table = config.bench.table;
  nlohmann::json manifest = nlohmann::json::array();
  for (const fs::path& p : inputs) {
    const NdArray image = ReadPpm(p.string());
    const uint64_t seed =
        DeriveSeed(config.seed, "corrupt/" + p.filename().string());
    const NdArray corrupted =
        ApplyCorruption(kind, severity, image, seed, table);
    const fs::path dst = out / p.filename();
    WritePpm(corrupted, dst.string());
    manifest.push_back({{"file", p.filename().string()},
                        {"kind", kind_name},
                        {"severity", severity},
                        {"seed", seed}});
  }
  WriteTextFile(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "corrupted " << inputs.size() << " images -> " << out.string()
            << "\n";
  return 0;
}

int CmdAttack(const CommonArgs& args, const std::string& victim_path,
              const std::string& image_path, const std::string& attack,
              double epsilon, int label, int target,
              const std::string& out_image) {
  RunConfig config = LoadConfigWithOverrides(args);
  const ModelParams victim = LoadCheckpoint(victim_path);
  const NdArray image = ReadPpm(image_path);
  if (image.dim(0) != victim.height || image.dim(1) != victim.width) {
    throw DataError("image geometry does not match the model input");
  }

  AdversarialExample ex;
  AttackBudget budget = {};
  budget.epsilon = epsilon;
  budget.iterations = config.bench.attack_iterations;
  NdArray batch({1, image.dim(0), image.dim(1), image.dim(2)}, image.data);
  if (attack == "fgsm") {
    if (target >= 0) {
      ex = FgsmTargetedOne(victim, image,
                           OneHot(static_cast<size_t>(target), victim.classes),
                           epsilon);
    } else {
      if (label < 0) throw ConfigError("fgsm needs --label (or --target)");
      ex = FgsmUntargetedOne(victim, image, label, epsilon);
    }
  } else if (attack == "pgd") {
    if (label < 0) throw ConfigError("pgd needs --label");
    ex = Pgd(victim, batch, {label}, budget)[0];
  } else if (attack == "pgd_ll") {
    if (label < 0) throw ConfigError("pgd_ll needs --label");
    ex = PgdLeastLikely(victim, batch, {label}, budget)[0];
  } else if (attack == "cw") {
    if (label < 0) throw ConfigError("cw needs --label");
    ex = CwL2(victim, batch, {label}, config.bench.cw_iterations,
              config.bench.cw_kappa)[0];
  } else {
    throw ConfigError("unknown attack: " + attack);
  }

  if (!out_image.empty()) WritePpm(ex.adversarial, out_image);
  std::cout << "attack=" << ex.attack << " predicted=" << ex.predicted
            << " success=" << (ex.success ? "yes" : "no")
            << " linf=" << ex.MaxAbsDelta() << " l2=" << ex.L2Delta() << "\n";
  return 0;
}

int CmdReport(const std::string& in_path, const std::string& format,
              const std::string& baseline_path, const std::string& out_file) {
  const RobustnessReport report = ParseReportJson(ReadTextFile(in_path));
  RobustnessReport baseline;
  const bool have_baseline = !baseline_path.empty();
  if (have_baseline) baseline = ParseReportJson(ReadTextFile(baseline_path));
  const std::string text =
      EmitReport(report, format, have_baseline ? &baseline : nullptr);
  if (out_file.empty()) {
    std::cout << text;
  } else {
    WriteTextFile(out_file, text);
  }
  return 0;
}

int Run(int argc, char** argv) {
  CLI::App app{"mtlat: robustness training and evaluation toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string mode, arch_name, victim, surrogate, baseline;
  std::string input_dir, kind_name, image_path, attack_name, out_image;
  std::string report_in, report_format = "markdown", report_out;
  int severity = 1, epochs = 0, label = -1, target = -1;
  double epsilon = 0.04;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "JSON config file");
    cmd->add_option("--out", common.out, "output directory");
    cmd->add_option("--jobs", common.jobs,
                    "worker threads (default 1: bit-deterministic)");
    cmd->add_option("--seed", common.seed, "master seed override");
  };

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train);
  train->add_option("--mode", mode,
                    "standard|mixup|tlat|m-tlat|iat|fgsm-at|target-fgsm-at|"
                    "ls-at");
  train->add_option("--arch", arch_name, "small-conv|small-mlp");
  train->add_option("--epochs", epochs, "epoch count override");

  CLI::App* bench = app.add_subcommand("bench", "run the perturbation benchmark");
  add_common(bench);
  bench->add_option("--victim", victim, "victim checkpoint")->required();
  bench->add_option("--surrogate", surrogate,
                    "surrogate checkpoint (black-box attacks)")
      ->required();
  bench->add_option("--baseline", baseline, "baseline report.json for +/-");

  CLI::App* corrupt = app.add_subcommand("corrupt", "corrupt a directory of images");
  add_common(corrupt);
  corrupt->add_option("--in", input_dir, "input directory of .ppm images")
      ->required();
  corrupt->add_option("--kind", kind_name, "corruption kind")->required();
  corrupt->add_option("--severity", severity, "severity 1..5")->required();

  CLI::App* attack = app.add_subcommand("attack", "attack a single image");
  add_common(attack);
  attack->add_option("--victim", victim, "checkpoint")->required();
  attack->add_option("--image", image_path, "input .ppm")->required();
  attack->add_option("--attack", attack_name, "fgsm|pgd|pgd_ll|cw")->required();
  attack->add_option("--epsilon", epsilon, "L-inf budget");
  attack->add_option("--label", label, "true class id");
  attack->add_option("--target", target, "target class id (targeted fgsm)");
  attack->add_option("--out-image", out_image, "write adversarial .ppm here");

  CLI::App* report = app.add_subcommand("report", "re-render a report");
  report->add_option("--in", report_in, "report.json")->required();
  report->add_option("--format", report_format, "json|csv|markdown");
  report->add_option("--baseline", baseline, "baseline report.json");
  report->add_option("--out-file", report_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return CmdTrain(common, mode, arch_name, epochs);
  if (bench->parsed()) return CmdBench(common, victim, surrogate, baseline);
  if (corrupt->parsed()) return CmdCorrupt(common, input_dir, kind_name, severity);
  if (attack->parsed()) {
    return CmdAttack(common, victim, image_path, attack_name, epsilon, label,
                     target, out_image);
  }
  if (report->parsed()) {
    return CmdReport(report_in, report_format, baseline, report_out);
  }
  return 0;
}

}  // namespace
}  // namespace mtlat

int main(int argc, char** argv) {
  try {
    return mtlat::Run(argc, argv);
  } catch (const mtlat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mtlat::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const mtlat::ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
