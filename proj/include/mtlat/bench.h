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

#ifndef MTLAT_BENCH_H_
#define MTLAT_BENCH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtlat/corruptions.h"
#include "mtlat/dataset.h"
#include "mtlat/model.h"

namespace mtlat {

struct BenchOptions {
  SeverityTable table = SeverityTable::Desk32Default();
  double pgd_epsilon = 0.04;
  int attack_iterations = 10;
  double mi_eps_low = 0.04;
  double mi_eps_high = 0.08;
  int cw_iterations = 40;
  double cw_kappa = 5.0;
  // CW is evaluated on a seeded subset of at most this many test images;
  // recorded in the report.
  int cw_subset = 500;
  size_t attack_chunk = 128;
};

struct ReportEntry {
  std::string name;
  std::string params;
  long correct = 0;
  long total = 0;
  double a_phi = 0.0;  // percent
  double r_phi = 0.0;  // a_phi / a_clean
  // Corruption rows carry the 5 per-severity accuracies; a_phi is their mean.
  std::vector<double> severity_accuracy;
};

struct RobustnessReport {
  std::string schema = "mtlat-report/1";
  std::string model_id;
  uint64_t seed = 0;
  long clean_correct = 0;
  long clean_total = 0;
  double a_clean = 0.0;  // percent
  bool low_clean_warning = false;  // a_clean < 50: scores are not comparable
  int cw_subset = 0;
  std::vector<ReportEntry> entries;  // 19 corruptions then 5 attacks
};

// R = a_phi / a_clean. Errors on a_clean == 0; sets *low_clean when the
// clean accuracy is under 50% (score comparisons unreliable).
double RobustnessScore(double a_clean, double a_phi,
                       bool* low_clean = nullptr);

// Clean accuracy + 19 corruption kinds x severities 1..5 + PGD, PGD_LL,
// CW_L2 (white box on victim) and MI-FGSM at two budgets (crafted on the
// surrogate). The surrogate must be a different architecture.
RobustnessReport RunBenchmark(const ModelParams& victim,
                              const ModelParams& surrogate,
                              const Dataset& dataset, uint64_t seed,
                              const BenchOptions& opts,
                              const std::string& model_id = "victim");

std::string EmitReportJson(const RobustnessReport& report);
std::string EmitReportCsv(const RobustnessReport& report);
// Markdown with the +/- convention relative to `baseline` (annotations are
// suppressed when clean accuracies differ by more than 2 points).
std::string EmitReportMarkdown(const RobustnessReport& report,
                               const RobustnessReport* baseline = nullptr);
// format in {json, csv, markdown}.
std::string EmitReport(const RobustnessReport& report,
                       const std::string& format,
                       const RobustnessReport* baseline = nullptr);

RobustnessReport ParseReportJson(const std::string& text);

}  // namespace mtlat

#endif  // MTLAT_BENCH_H_
