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

#include "mtlat/bench.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "mtlat/attacks.h"
#include "mtlat/errors.h"
#include "mtlat/kernels.h"
#include "mtlat/rng.h"

namespace mtlat {

namespace {

double Percent(long correct, long total) {
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

std::string FormatEps(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", eps);
  return buf;
}

// Applies `attack` over the split in chunks and counts victim hits.
template <typename AttackFn>
long AttackedCorrect(const ModelParams& victim, const Dataset::Split& split,
                     const std::vector<size_t>& indices, size_t chunk,
                     const AttackFn& attack) {
  long correct = 0;
  for (size_t start = 0; start < indices.size(); start += chunk) {
    const size_t end = std::min(indices.size(), start + chunk);
    std::vector<size_t> ids(indices.begin() + start, indices.begin() + end);
    const NdArray batch = StackBatch(split.images, ids);
    std::vector<int> labels(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) labels[i] = split.labels[ids[i]];
    const std::vector<AdversarialExample> advs = attack(batch, labels);
    std::vector<NdArray> images;
    images.reserve(advs.size());
    for (const auto& a : advs) images.push_back(a.adversarial);
    correct += static_cast<long>(CountCorrect(victim, images, labels));
  }
  return correct;
}

std::vector<size_t> AllIndices(size_t n) {
  std::vector<size_t> ids(n);
  for (size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

}  // namespace

double RobustnessScore(double a_clean, double a_phi, bool* low_clean) {
  if (a_clean == 0.0) {
    throw ContractError("robustness score undefined: clean accuracy is 0");
  }
  if (low_clean) *low_clean = a_clean < 50.0;
  return a_phi / a_clean;
}

RobustnessReport RunBenchmark(const ModelParams& victim,
                              const ModelParams& surrogate,
                              const Dataset& dataset, uint64_t seed,
                              const BenchOptions& opts,
                              const std::string& model_id) {
  if (victim.arch == surrogate.arch) {
    throw ContractError(
        "black-box contract: surrogate architecture must differ from the "
        "victim's");
  }
  const Dataset::Split& test = dataset.test;
  if (test.size() == 0) throw DataError("benchmark needs a test split");

  RobustnessReport report;
  report.model_id = model_id;
  report.seed = seed;
  report.clean_total = static_cast<long>(test.size());
  report.clean_correct =
      static_cast<long>(CountCorrect(victim, test.images, test.labels));
  report.a_clean = Percent(report.clean_correct, report.clean_total);
  RobustnessScore(report.a_clean, report.a_clean, &report.low_clean_warning);

  // 19 corruption kinds, severities 1..5, mean score over severities.
  for (int k = 0; k < kNumCorruptions; ++k) {
    const CorruptionKind kind = static_cast<CorruptionKind>(k);
    ReportEntry entry;
    entry.name = CorruptionName(kind);
    entry.params = "severity=1..5";
    long correct_sum = 0;
    for (int severity = 1; severity <= 5; ++severity) {
      std::vector<NdArray> corrupted(test.size());
      const int threads = kernels::GetThreads();
#pragma omp parallel for schedule(dynamic) num_threads(threads) \
    if (threads > 1)
      for (size_t i = 0; i < test.size(); ++i) {
        corrupted[i] = ApplyCorruption(
            kind, severity, test.images[i],
            DeriveSeed(seed, std::string("bench/corrupt/") +
                                 CorruptionName(kind) + "/" +
                                 std::to_string(severity) + "/" +
                                 std::to_string(i)),
            opts.table);
      }
      const long correct =
          static_cast<long>(CountCorrect(victim, corrupted, test.labels));
      correct_sum += correct;
      entry.severity_accuracy.push_back(
          Percent(correct, static_cast<long>(test.size())));
    }
    entry.correct = correct_sum;
    entry.total = static_cast<long>(5 * test.size());
    entry.a_phi = Percent(entry.correct, entry.total);
    entry.r_phi = RobustnessScore(report.a_clean, entry.a_phi);
    report.entries.push_back(std::move(entry));
  }

  const auto all = AllIndices(test.size());

  {  // PGD, white box.
    AttackBudget budget;
    budget.epsilon = opts.pgd_epsilon;
    budget.iterations = opts.attack_iterations;
    ReportEntry entry;
    entry.name = "pgd";
    entry.params = "eps=" + FormatEps(opts.pgd_epsilon) +
                   " iters=" + std::to_string(opts.attack_iterations);
    entry.total = static_cast<long>(test.size());
    entry.correct = AttackedCorrect(
        victim, test, all, opts.attack_chunk,
        [&](const NdArray& b, const std::vector<int>& l) {
          return Pgd(victim, b, l, budget);
        });
    entry.a_phi = Percent(entry.correct, entry.total);
    entry.r_phi = RobustnessScore(report.a_clean, entry.a_phi);
    report.entries.push_back(std::move(entry));
  }

  {  // PGD toward the least likely class.
    AttackBudget budget;
    budget.epsilon = opts.pgd_epsilon;
    budget.iterations = opts.attack_iterations;
    ReportEntry entry;
    entry.name = "pgd_ll";
    entry.params = "eps=" + FormatEps(opts.pgd_epsilon) +
                   " iters=" + std::to_string(opts.attack_iterations);
    entry.total = static_cast<long>(test.size());
    entry.correct = AttackedCorrect(
        victim, test, all, opts.attack_chunk,
        [&](const NdArray& b, const std::vector<int>& l) {
          return PgdLeastLikely(victim, b, l, budget);
        });
    entry.a_phi = Percent(entry.correct, entry.total);
    entry.r_phi = RobustnessScore(report.a_clean, entry.a_phi);
    report.entries.push_back(std::move(entry));
  }

  {  // Carlini-Wagner L2 on a seeded subset.
    const size_t subset_size =
        std::min<size_t>(test.size(), static_cast<size_t>(opts.cw_subset));
    std::vector<size_t> ids = AllIndices(test.size());
    Rng rng(DeriveSeed(seed, "bench/cw/subset"));
    for (size_t i = ids.size(); i > 1; --i) {
      std::swap(ids[i - 1], ids[rng.UniformInt(i)]);
    }
    ids.resize(subset_size);
    std::sort(ids.begin(), ids.end());
    report.cw_subset = static_cast<int>(subset_size);

    ReportEntry entry;
    entry.name = "cw_l2";
    entry.params = "iters=" + std::to_string(opts.cw_iterations) +
                   " kappa=" + FormatEps(opts.cw_kappa) +
                   " subset=" + std::to_string(subset_size);
    entry.total = static_cast<long>(subset_size);
    entry.correct = AttackedCorrect(
        victim, test, ids, opts.attack_chunk,
        [&](const NdArray& b, const std::vector<int>& l) {
          return CwL2(victim, b, l, opts.cw_iterations, opts.cw_kappa);
        });
    entry.a_phi = Percent(entry.correct, entry.total);
    entry.r_phi = RobustnessScore(report.a_clean, entry.a_phi);
    report.entries.push_back(std::move(entry));
  }

  for (double eps : {opts.mi_eps_low, opts.mi_eps_high}) {
    // Black box: crafted on the surrogate, scored on the victim.
    AttackBudget budget;
    budget.epsilon = eps;
    budget.iterations = opts.attack_iterations;
    ReportEntry entry;
    entry.name = "mi_fgsm_" + FormatEps(eps);
    entry.params = "eps=" + FormatEps(eps) +
                   " iters=" + std::to_string(opts.attack_iterations) +
                   " surrogate=" + ArchName(surrogate.arch);
    entry.total = static_cast<long>(test.size());
    entry.correct = AttackedCorrect(
        victim, test, all, opts.attack_chunk,
        [&](const NdArray& b, const std::vector<int>& l) {
          return MiFgsm(surrogate, b, l, budget);
        });
    entry.a_phi = Percent(entry.correct, entry.total);
    entry.r_phi = RobustnessScore(report.a_clean, entry.a_phi);
    report.entries.push_back(std::move(entry));
  }

  return report;
}

std::string EmitReportJson(const RobustnessReport& report) {
  nlohmann::json j;
  j["schema"] = report.schema;
  j["model_id"] = report.model_id;
  j["seed"] = report.seed;
  j["clean"] = {{"correct", report.clean_correct},
                {"total", report.clean_total},
                {"accuracy", report.a_clean}};
  j["low_clean_accuracy_warning"] = report.low_clean_warning;
  j["cw_subset"] = report.cw_subset;
  nlohmann::json entries = nlohmann::json::array();
  for (const ReportEntry& e : report.entries) {
    nlohmann::json je = {{"name", e.name},     {"params", e.params},
                         {"correct", e.correct}, {"total", e.total},
                         {"a_phi", e.a_phi},   {"r_phi", e.r_phi}};
    if (!e.severity_accuracy.empty()) {
      je["severity_accuracy"] = e.severity_accuracy;
    }
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

RobustnessReport ParseReportJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  RobustnessReport r;
  try {
    r.schema = j.at("schema").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.clean_correct = j.at("clean").at("correct").get<long>();
    r.clean_total = j.at("clean").at("total").get<long>();
    r.a_clean = j.at("clean").at("accuracy").get<double>();
    r.low_clean_warning = j.at("low_clean_accuracy_warning").get<bool>();
    r.cw_subset = j.at("cw_subset").get<int>();
    for (const auto& je : j.at("entries")) {
      ReportEntry e;
      e.name = je.at("name").get<std::string>();
      e.params = je.at("params").get<std::string>();
      e.correct = je.at("correct").get<long>();
      e.total = je.at("total").get<long>();
      e.a_phi = je.at("a_phi").get<double>();
      e.r_phi = je.at("r_phi").get<double>();
      if (je.contains("severity_accuracy")) {
        e.severity_accuracy =
            je.at("severity_accuracy").get<std::vector<double>>();
      }
      r.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report schema mismatch: ") + e.what());
  }
  return r;
}

std::string EmitReportCsv(const RobustnessReport& report) {
  std::ostringstream os;
  os << "name,params,A_phi,R_phi\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", report.a_clean);
  os << "clean,," << buf << ",1.000000\n";
  for (const ReportEntry& e : report.entries) {
    std::snprintf(buf, sizeof(buf), "%.6f", e.a_phi);
    os << e.name << "," << e.params << "," << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.6f", e.r_phi);
    os << buf << "\n";
  }
  return os.str();
}

std::string EmitReportMarkdown(const RobustnessReport& report,
                               const RobustnessReport* baseline) {
  std::ostringstream os;
  os << "# Robustness report: " << report.model_id << "\n\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", report.a_clean);
  os << "Clean accuracy: " << buf << "%";
  if (baseline) {
    std::snprintf(buf, sizeof(buf), "%.2f", baseline->a_clean);
    os << " (baseline " << baseline->model_id << ": " << buf << "%)";
  }
  os << "\n\n";
  if (report.low_clean_warning) {
    os << "> warning: clean accuracy below 50%; robustness scores mask the "
          "clean accuracy and should not be compared.\n\n";
  }

  bool annotate = baseline != nullptr;
  if (baseline && std::abs(baseline->a_clean - report.a_clean) > 2.0) {
    annotate = false;
    os << "> warning: clean accuracies differ by more than 2 points; +/- "
          "annotations suppressed (scores are not comparable).\n\n";
  }

  os << "| perturbation | params | A_phi (%) | R_phi |\n";
  os << "|---|---|---|---|\n";
  for (const ReportEntry& e : report.entries) {
    std::snprintf(buf, sizeof(buf), "%.2f", e.a_phi);
    os << "| " << e.name << " | " << e.params << " | " << buf << " | ";
    std::snprintf(buf, sizeof(buf), "%.3f", e.r_phi);
    os << buf;
    if (annotate) {
      for (const ReportEntry& be : baseline->entries) {
        if (be.name == e.name) {
          if (e.r_phi > be.r_phi) os << "+";
          if (e.r_phi < be.r_phi) os << "-";
          break;
        }
      }
    }
    os << " |\n";
  }
  return os.str();
}

std::string EmitReport(const RobustnessReport& report,
                       const std::string& format,
                       const RobustnessReport* baseline) {
  if (format == "json") return EmitReportJson(report);
  if (format == "csv") return EmitReportCsv(report);
  if (format == "markdown" || format == "md") {
    return EmitReportMarkdown(report, baseline);
  }
  throw ConfigError("unknown report format: " + format);
}

}  // namespace mtlat
