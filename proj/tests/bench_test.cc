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

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "mtlat/errors.h"

namespace mtlat {
namespace {

TEST(ScoreTest, PaperAnchorValues) {
  // Table-1 anchors: standard ResNet gaussian row and ResNeXt pgd row.
  EXPECT_NEAR(0.17, RobustnessScore(73.3, 12.46), 1e-3);
  EXPECT_DOUBLE_EQ(0.0, RobustnessScore(76.4, 0.0));
  EXPECT_DOUBLE_EQ(1.0, RobustnessScore(42.0, 42.0));
}

TEST(ScoreTest, ZeroCleanAccuracyRejected) {
  EXPECT_THROW(RobustnessScore(0.0, 10.0), ContractError);
}

TEST(ScoreTest, LowCleanAccuracyFlagged) {
  bool low = false;
  RobustnessScore(49.9, 10.0, &low);
  EXPECT_TRUE(low);
  RobustnessScore(50.1, 10.0, &low);
  EXPECT_FALSE(low);
}

class BenchFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dataset_ = SynthDataset(3, 4, 16);  // 64 train, 16 test
    victim_ = InitModel(Arch::kSmallConv, 32, 32, 3, 4, 5);
    surrogate_ = InitModel(Arch::kSmallMlp, 32, 32, 3, 4, 7);
    opts_.cw_subset = 4;
    opts_.cw_iterations = 5;
    opts_.attack_chunk = 8;
    opts_.attack_iterations = 2;
  }

  Dataset dataset_;
  ModelParams victim_, surrogate_;
  BenchOptions opts_;
};

TEST_F(BenchFixture, SameArchitectureRejected) {
  const ModelParams twin = InitModel(Arch::kSmallConv, 32, 32, 3, 4, 9);
  EXPECT_THROW(RunBenchmark(victim_, twin, dataset_, 1, opts_),
               ContractError);
}

TEST_F(BenchFixture, ReportHasCleanPlusTwentyFourRows) {
  const RobustnessReport report =
      RunBenchmark(victim_, surrogate_, dataset_, 1, opts_);
  ASSERT_EQ(24u, report.entries.size());  // 19 corruptions + 5 attacks
  EXPECT_GT(report.a_clean, 0.0);
  EXPECT_EQ(16, report.clean_total);

  const std::vector<std::string> expected_tail = {
      "pgd", "pgd_ll", "cw_l2", "mi_fgsm_0.04", "mi_fgsm_0.08"};
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(expected_tail[i], report.entries[19 + i].name);
  }
  // Training-time FGSM never appears as a benchmark row.
  for (const auto& e : report.entries) {
    EXPECT_NE("fgsm", e.name);
    EXPECT_NE("fgsm_targeted", e.name);
  }
  // Score-accuracy consistency and severity aggregation.
  for (const auto& e : report.entries) {
    EXPECT_LT(std::abs(e.r_phi * report.a_clean - e.a_phi), 1e-9) << e.name;
    if (!e.severity_accuracy.empty()) {
      ASSERT_EQ(5u, e.severity_accuracy.size());
      double mean = 0.0;
      for (double a : e.severity_accuracy) mean += a;
      EXPECT_NEAR(mean / 5.0, e.a_phi, 1e-9) << e.name;
    }
  }
  // Untrained model on a 4-class task sits near chance: the caveat flag
  // must be on.
  EXPECT_TRUE(report.low_clean_warning);
}

TEST_F(BenchFixture, ByteIdenticalUnderSameSeed) {
  const RobustnessReport a =
      RunBenchmark(victim_, surrogate_, dataset_, 11, opts_);
  const RobustnessReport b =
      RunBenchmark(victim_, surrogate_, dataset_, 11, opts_);
  EXPECT_EQ(EmitReportJson(a), EmitReportJson(b));
}

TEST_F(BenchFixture, JsonRoundTripAndCsvAgreeToSixDecimals) {
  const RobustnessReport report =
      RunBenchmark(victim_, surrogate_, dataset_, 13, opts_);
  const RobustnessReport parsed = ParseReportJson(EmitReportJson(report));
  EXPECT_EQ(report.entries.size(), parsed.entries.size());
  EXPECT_DOUBLE_EQ(report.a_clean, parsed.a_clean);

  const std::string csv = EmitReportCsv(parsed);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ("name,params,A_phi,R_phi", header);
  std::string clean_row;
  std::getline(lines, clean_row);
  size_t row = 0;
  std::string line;
  while (std::getline(lines, line)) {
    const size_t c3 = line.rfind(',');
    const double r_phi = std::stod(line.substr(c3 + 1));
    EXPECT_NEAR(report.entries[row].r_phi, r_phi, 5e-7);
    ++row;
  }
  EXPECT_EQ(report.entries.size(), row);
}

RobustnessReport TinyReport(double clean, double pgd_score) {
  RobustnessReport r;
  r.model_id = "tiny";
  r.a_clean = clean;
  r.clean_correct = static_cast<long>(clean);
  r.clean_total = 100;
  ReportEntry e;
  e.name = "pgd";
  e.params = "eps=0.04";
  e.total = 100;
  e.correct = static_cast<long>(pgd_score * clean);
  e.a_phi = pgd_score * clean;
  e.r_phi = pgd_score;
  r.entries.push_back(e);
  return r;
}

TEST(EmitTest, MarkdownAnnotatesAgainstBaseline) {
  const RobustnessReport report = TinyReport(80.0, 0.5);
  const RobustnessReport baseline = TinyReport(79.0, 0.3);
  const std::string md = EmitReportMarkdown(report, &baseline);
  EXPECT_NE(std::string::npos, md.find("0.500+"));

  const RobustnessReport worse = TinyReport(80.0, 0.1);
  const std::string md2 = EmitReportMarkdown(worse, &baseline);
  EXPECT_NE(std::string::npos, md2.find("0.100-"));
}

TEST(EmitTest, AnnotationsSuppressedWhenCleanGapExceedsTwoPoints) {
  const RobustnessReport report = TinyReport(80.0, 0.5);
  const RobustnessReport baseline = TinyReport(77.0, 0.3);
  const std::string md = EmitReportMarkdown(report, &baseline);
  EXPECT_EQ(std::string::npos, md.find("0.500+"));
  EXPECT_NE(std::string::npos, md.find("annotations suppressed"));
}

TEST(EmitTest, EmptyEntryListYieldsHeaderOnly) {
  RobustnessReport r;
  r.model_id = "empty";
  r.a_clean = 90.0;
  const std::string csv = EmitReportCsv(r);
  EXPECT_NE(std::string::npos, csv.find("name,params,A_phi,R_phi"));
  const std::string md = EmitReportMarkdown(r, nullptr);
  EXPECT_NE(std::string::npos, md.find("| perturbation |"));
}

TEST(EmitTest, UnknownFormatRejected) {
  RobustnessReport r;
  EXPECT_THROW(EmitReport(r, "xml"), ConfigError);
}

}  // namespace
}  // namespace mtlat
