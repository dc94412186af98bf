#include "packorder/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace packorder {
namespace {

using Labels = std::vector<std::string>;

PipelineResult ok_result(Labels detected, Labels planned, int attempts = 1) {
  PipelineResult r;
  r.detected = std::move(detected);
  r.planned = std::move(planned);
  r.attempts = attempts;
  return r;
}

PipelineResult exhausted_result(Labels detected) {
  PipelineResult r;
  r.status = PipelineStatus::validation_exhausted;
  r.detected = std::move(detected);
  r.attempts = 3;
  return r;
}

TEST(MatchLabels, PresenceBasedWithAliases) {
  ClassCatalog cat({"apples", "bottle", "milk"}, {{"water bottle", "bottle"}});
  const auto t = match_labels(Labels{"Apple", "water bottle", "dragonfruit", "apples"}, Labels{"apples", "bottle", "milk"}, cat);
  EXPECT_EQ(t.at("apples"), (Tally{1, 0, 0}));
  EXPECT_EQ(t.at("bottle"), (Tally{1, 0, 0}));
  EXPECT_EQ(t.at("milk"), (Tally{0, 0, 1}));
  EXPECT_EQ(t.at("dragonfruit"), (Tally{0, 1, 0}));
}

TEST(F1, HalfPrecisionHalfRecall) {
  ClassCatalog cat({"a", "b", "c"});
  // One class, two scenes: one hit, one miss, one false alarm.
  ClassTallies acc;
  acc += match_labels(Labels{"a"}, Labels{"a"}, cat);
  acc += match_labels(Labels{"b"}, Labels{"a"}, cat);
  acc += match_labels(Labels{"a"}, Labels{"c"}, cat);
  const auto m = f1_scores(acc);
  EXPECT_DOUBLE_EQ(m.per_class.at("a").precision, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class.at("a").recall, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class.at("a").f1, 0.5);
  // b never occurs in ground truth and is excluded from the averages.
  EXPECT_EQ(m.classes_evaluated, 2u);
  EXPECT_EQ(m.per_class.at("b").precision, 0.0);
  EXPECT_DOUBLE_EQ(m.af1, (0.5 + 0.0) / 2);
}

TEST(F1, PerfectDetection) {
  ClassCatalog cat({"a", "b"});
  ClassTallies acc;
  acc += match_labels(Labels{"a", "b"}, Labels{"b", "a"}, cat);
  const auto m = f1_scores(acc);
  EXPECT_EQ(m.af1, 1.0);
  EXPECT_EQ(m.ap, 1.0);
  EXPECT_EQ(m.ar, 1.0);
}

TEST(F1, ZeroCases) {
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f1_score(1.0, 0.5), 2.0 / 3.0);
  EXPECT_THROW(f1_scores(ClassTallies{{"x", Tally{0, 2, 0}}}), Error);
}

TEST(F1, MacroAverageMatchesOracle) {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<std::size_t> count(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    ClassTallies tallies;
    for (int c = 0; c < 12; ++c) tallies["k" + std::to_string(c)] = {count(rng), count(rng), count(rng)};
    tallies["k0"].tp += 1;
    double sum = 0.0;
    int n = 0;
    for (const auto& [cls, t] : tallies) {
      if (t.tp + t.fn == 0) continue;
      const double p = t.tp + t.fp ? double(t.tp) / double(t.tp + t.fp) : 0.0;
      const double r = double(t.tp) / double(t.tp + t.fn);
      sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      ++n;
    }
    EXPECT_NEAR(f1_scores(tallies).af1, sum / n, 1e-12);
  }
}

TEST(SuccessRate, Examples) {
  const std::vector<PipelineResult> rs{ok_result({"a", "b", "c", "d"}, {"a", "b", "c"}), ok_result({"x"}, {"x"})};
  EXPECT_DOUBLE_EQ(success_rate(rs), (0.75 + 1.0) / 2);
  EXPECT_EQ(run_success_rate(rs), 1.0);
  const std::vector<PipelineResult> ex{exhausted_result({"a"})};
  EXPECT_EQ(success_rate(ex), 0.0);
  EXPECT_EQ(run_success_rate(ex), 0.0);
  EXPECT_THROW(success_rate(std::vector<PipelineResult>{}), Error);
  EXPECT_DOUBLE_EQ(scene_success(Labels{"a", "b", "c", "d"}, Labels{"b", "c", "a"}), 0.75);
}

SceneSet small_scene_set() {
  SceneSet s;
  s.catalog = ClassCatalog(testing::table1_classes());
  s.scenes = {{"s1", 2, {"bottle", "apples"}, std::nullopt},
              {"s2", 3, {"bananas", "apples", "bell pepper"}, std::nullopt},
              {"s3", 2, {"bottle", "bananas"}, std::nullopt}};
  return s;
}

std::vector<SceneOutcome> small_outcomes() {
  return {{"s1", ok_result({"bottle", "apples"}, {"bottle", "apples"})},
          {"s2", ok_result({"bananas", "apple", "dragonfruit"}, {"apples", "bananas", "dragonfruit"}, 2)},
          {"s3", exhausted_result({"bottle", "bananas"})}};
}

TEST(AssembleReport, AggregatesAndOracles) {
  const auto m = testing::table1_matrix();
  const auto r = assemble_report(small_scene_set(), small_outcomes(), m, {}, "full", {{"k", "v"}});
  ASSERT_EQ(r.scenes.size(), 3u);
  EXPECT_EQ(*r.scenes[0].score, 0.0);  // ln 1
  EXPECT_EQ(r.scenes[1].unmatched_planned, 1u);
  EXPECT_EQ(r.scenes[1].scored_sequence, (Labels{"apples", "bananas"}));
  EXPECT_DOUBLE_EQ(*r.scenes[1].score, std::log(0.892));
  EXPECT_FALSE(r.scenes[2].score);
  EXPECT_EQ(r.scored_scenes, 2u);
  EXPECT_DOUBLE_EQ(*r.ac, std::log(0.892) / 2);
  // "apple" is contained in "apples", so s2 counts every detected item.
  EXPECT_DOUBLE_EQ(r.success_rate, (1.0 + 1.0 + 0.0) / 3);
  EXPECT_DOUBLE_EQ(r.run_success_rate, 2.0 / 3.0);
  EXPECT_EQ(r.attempts_histogram.at(3), 1u);
  // dragonfruit is a false positive outside the ground-truth classes.
  EXPECT_EQ(r.detection.per_class.at("dragonfruit").tally, (Tally{0, 1, 0}));
  EXPECT_EQ(r.detection.classes_evaluated, 4u);
  // bell pepper was missed; every other ground-truth class is perfect.
  EXPECT_DOUBLE_EQ(r.detection.af1, 3.0 / 4.0);
  ASSERT_EQ(r.by_size.size(), 2u);
  EXPECT_EQ(r.by_size[0].size, 2u);
  EXPECT_EQ(r.by_size[0].scenes, 2u);
}

TEST(AssembleReport, InvariantToOutcomeOrder) {
  const auto m = testing::table1_matrix();
  auto outcomes = small_outcomes();
  const auto a = to_json(assemble_report(small_scene_set(), outcomes, m, {}, "full", {}));
  std::reverse(outcomes.begin(), outcomes.end());
  const auto b = to_json(assemble_report(small_scene_set(), outcomes, m, {}, "full", {}));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(AssembleReport, MismatchedScenesAreEvaluationErrors) {
  const auto m = testing::table1_matrix();
  auto outcomes = small_outcomes();
  outcomes.pop_back();
  try {
    assemble_report(small_scene_set(), outcomes, m, {}, "full", {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::evaluation);
  }
  outcomes = small_outcomes();
  outcomes.back().scene_id = "other";
  EXPECT_THROW(assemble_report(small_scene_set(), outcomes, m, {}, "full", {}), Error);
  outcomes = small_outcomes();
  outcomes.push_back(outcomes.front());
  EXPECT_THROW(assemble_report(small_scene_set(), outcomes, m, {}, "full", {}), Error);
}

TEST(AssembleReport, NegativeInfinityPropagates) {
  const auto m = testing::table1_matrix();
  auto outcomes = small_outcomes();
  outcomes[0].result.planned = Labels{"apples", "bottle"};
  const auto r = assemble_report(small_scene_set(), outcomes, m, {}, "full", {});
  EXPECT_TRUE(std::isinf(*r.ac));
  EXPECT_EQ(r.infinite_count, 1u);
  const auto j = to_json(r);
  EXPECT_EQ(j["planning"]["ac"], "-inf");
  EXPECT_EQ(j["scenes"][0]["score"], "-inf");
}

TEST(ReportJson, RoundTrip) {
  const auto m = testing::table1_matrix();
  auto outcomes = small_outcomes();
  outcomes[0].result.transcripts.push_back({"perception", 1, nlohmann::json::array(), "bottle, apples", 0.25, TokenUsage{5, 2}});
  const auto r = assemble_report(small_scene_set(), outcomes, m, {}, "full", {{"seed", 1}});
  const auto j = to_json(r);
  EXPECT_EQ(to_json(report_from_json(nlohmann::json::parse(j.dump()))).dump(), j.dump());
  EXPECT_DOUBLE_EQ(r.mean_time_seconds, 0.25 / 3);
}

TEST(ExtendedReal, Json) {
  EXPECT_TRUE(ext_real_to_json(std::nullopt).is_null());
  EXPECT_EQ(ext_real_to_json(-1.5), -1.5);
  EXPECT_EQ(ext_real_to_json(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_TRUE(std::isinf(*ext_real_from_json("-inf")));
  EXPECT_FALSE(ext_real_from_json(nullptr));
  EXPECT_THROW(ext_real_from_json("nan"), Error);
}

TEST(ReportFormatting, TableAndCsv) {
  const auto m = testing::table1_matrix();
  const auto r = assemble_report(small_scene_set(), small_outcomes(), m, {}, "full", {});
  const auto table = format_report_table(r);
  EXPECT_NE(table.find("AF1"), std::string::npos);
  const auto csv = format_report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scene_size,ac,satisfaction_rate");
}

}  // namespace
}  // namespace packorder
