#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "delibq/annotation_io.hpp"
#include "delibq/pipeline.hpp"
#include "delibq/report.hpp"

using namespace delibq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("delibq_report_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const Corpus& reference() {
  static const Corpus c = ingest_corpus(DELIBQ_TEST_DATA "/reference_corpus.jsonl");
  return c;
}

std::vector<std::string> header(const ReportTable& t) {
  std::vector<std::string> names;
  for (const auto& c : t.columns()) names.push_back(c.name);
  return names;
}

PipelineConfig fixture_config(const fs::path& out) {
  PipelineConfig cfg;
  cfg.corpus = DELIBQ_FIXTURE_DIR "/corpus.jsonl";
  cfg.out_dir = out;
  cfg.cache = out / "cache.jsonl";
  cfg.human_annotations = DELIBQ_FIXTURE_DIR "/human_annotations.jsonl";
  cfg.pair_evaluations = DELIBQ_FIXTURE_DIR "/pair_evaluations.jsonl";
  cfg.provider.name = "mock";
  cfg.provider.mock_seed = 7;
  cfg.resamples = 500;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST(ReportTable, RejectsWrongArityAndType) {
  ReportTable t("t", {{"name", ColumnType::kText}, {"n", ColumnType::kCount}, {"x", ColumnType::kReal}});
  t.add_row({std::string("a"), std::int64_t{1}, 0.5});
  EXPECT_THROW(t.add_row({std::string("a"), std::int64_t{1}}), InvariantError);
  EXPECT_THROW(t.add_row({std::string("a"), 1.0, 0.5}), InvariantError);
  EXPECT_EQ(t.to_tsv(), "name\tn\tx\na\t1\t0.5\n");
}

TEST(ReportTable, EscapesTextAndRoundTripsReals) {
  ReportTable t("t", {{"name", ColumnType::kText}, {"x", ColumnType::kReal}});
  t.add_row({std::string("a\tb\nc\\"), 0.1 + 0.2});
  EXPECT_EQ(t.to_tsv(), "name\tx\na\\tb\\nc\\\\\t0.30000000000000004\n");
  EXPECT_EQ(format_real(2.0), "2");
  EXPECT_EQ(std::stod(format_real(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(ReportTable, MetadataCarriesHashAndSeed) {
  TableMetadata meta;
  meta.seed = 9;
  meta.parameters["window_ms"] = "30000";
  ReportTable t("t", {{"x", ColumnType::kReal}}, meta);
  t.add_row({1.5});
  const auto j = json::parse(t.metadata_json());
  EXPECT_EQ(j["seed"], 9);
  EXPECT_EQ(j["parameters"]["window_ms"], "30000");
  EXPECT_EQ(j["tool_version"], std::string(tool_version()));
  EXPECT_EQ(j["tsv_sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(j["rows"], 1);
}

TEST(QualityAggregates, ConstantScoresGiveConstantMeans) {
  const auto filtered = filter_contributions(reference(), 1);
  QualityScores scores;
  for (const auto& c : filtered) scores.set(c.id, CriterionId::kQ1, 4.0);
  const auto rq = room_quality(scores, reference(), filtered, {CriterionId::kQ1});
  ASSERT_EQ(rq.rooms.size(), 2u);
  for (const auto& r : rq.rooms) EXPECT_EQ(r.means.at(CriterionId::kQ1), 4.0);
  const auto aq = agenda_quality(scores, reference(), filtered, {CriterionId::kQ1});
  for (const auto& cell : aq.cells) EXPECT_EQ(cell.means.at(CriterionId::kQ1), 4.0);
}

TEST(QualityAggregates, CentroidIsUnweightedMeanOfRooms) {
  const auto filtered = filter_contributions(reference(), 1);
  QualityScores scores;
  for (const auto& c : filtered) scores.set(c.id, CriterionId::kQ1, c.room_id == "R1" ? 3.0 : 5.0);
  const auto rq = room_quality(scores, reference(), filtered, {CriterionId::kQ1});
  ASSERT_EQ(rq.centroids.size(), 1u);
  EXPECT_EQ(rq.centroids[0].rooms, 2u);
  EXPECT_EQ(rq.centroids[0].means.at(CriterionId::kQ1), 4.0);
}

TEST(QualityAggregates, GenderBreakdownExcludesUnknown) {
  const auto filtered = filter_contributions(reference(), 1);
  QualityScores scores;
  for (const auto& c : filtered) scores.set(c.id, CriterionId::kQ1, c.participant_id == "pa" ? 5.0 : 2.0);
  const auto aq = agenda_quality_by_gender(scores, reference(), filtered, {CriterionId::kQ1});
  EXPECT_EQ(aq.excluded_unknown_gender, 2u);
  for (const auto& cell : aq.cells) {
    ASSERT_TRUE(cell.gender == "woman" || cell.gender == "man") << cell.gender;
    EXPECT_EQ(cell.means.at(CriterionId::kQ1), cell.gender == "woman" ? 5.0 : 2.0);
  }
}

TEST(QualityAggregates, FixtureMatchesGroupByLoop) {
  const auto corpus = ingest_corpus(DELIBQ_FIXTURE_DIR "/corpus.jsonl");
  const auto filtered = filter_contributions(corpus);
  QualityScores scores;
  std::map<std::tuple<std::string, std::string, int>, std::pair<double, int>> want;
  int k = 0;
  for (const auto& c : filtered) {
    const double s = 1 + (k++ * 7) % 5;
    scores.set(c.id, CriterionId::kQ2, s);
    const auto& room = corpus.room(c.room_id);
    auto& acc = want[{room.event_id, room.session_id, c.agenda_item.index}];
    acc.first += s;
    acc.second += 1;
  }
  const auto aq = agenda_quality(scores, corpus, filtered, {CriterionId::kQ2});
  ASSERT_EQ(aq.cells.size(), want.size());
  for (const auto& cell : aq.cells) {
    const auto& acc = want.at({cell.event_id, cell.session_id, cell.agenda_item});
    EXPECT_EQ(cell.count, static_cast<std::size_t>(acc.second));
    EXPECT_NEAR(cell.means.at(CriterionId::kQ2), acc.first / acc.second, 1e-12);
  }
}

TEST(Schemas, ColumnNamesArePinned) {
  const TableMetadata meta;
  EXPECT_EQ(header(corpus_stats_table({}, meta)),
            (std::vector<std::string>{"events", "sessions", "rooms", "unique_participants", "contributions",
                                      "filtered_contributions", "median_room_size", "mean_room_size",
                                      "mean_filtered_length"}));
  EXPECT_EQ(header(irr_table({}, meta)), (std::vector<std::string>{"criterion", "statements", "raters", "r_wg_star",
                                                                   "s_x_squared", "sigma_eu_squared", "band"}));
  EXPECT_EQ(header(nudge_rates_table({}, meta)),
            (std::vector<std::string>{"target", "arm", "responses", "nudges", "rate", "ci_lo", "ci_hi",
                                      "relative_uplift"}));
  EXPECT_EQ(header(nudge_intervals_table({}, meta)),
            (std::vector<std::string>{"arm", "bin", "from_ms", "to_ms", "responses", "nudges", "rate", "ci_lo",
                                      "ci_hi"}));
  EXPECT_EQ(header(participant_effect_table({}, meta)),
            (std::vector<std::string>{"criterion", "participants", "effect", "ci_lo", "ci_hi"}));
  EXPECT_EQ(header(golden_table({}, meta)),
            (std::vector<std::string>{"criterion", "scores", "group_size", "groups", "per_statement_wins",
                                      "per_group_wins", "per_group_wins_1norm"}));
}

TEST(Pipeline, RunIsDeterministicAndWarmRunSkipsProvider) {
  const auto a = temp_dir("a"), b = temp_dir("b");
  const auto first = run_pipeline(fixture_config(a));
  EXPECT_GT(first.annotate_stats.provider_calls, 0u);
  const auto manifest_a = read_file(a / "manifest.json");
  const auto warm = run_pipeline(fixture_config(a));
  EXPECT_EQ(warm.annotate_stats.provider_calls, 0u);
  EXPECT_EQ(read_file(a / "manifest.json"), manifest_a);
  run_pipeline(fixture_config(b));
  EXPECT_EQ(read_file(b / "manifest.json"), manifest_a);

  const auto j = json::parse(manifest_a);
  EXPECT_EQ(j["status"], "complete");
  std::set<std::string> names;
  for (const auto& t : j["tables"]) {
    names.insert(t["name"].get<std::string>());
    EXPECT_TRUE(fs::exists(a / t["file"].get<std::string>()));
    EXPECT_FALSE(t["stale"].get<bool>());
  }
  for (const char* want : {"corpus_stats", "irr", "golden_comparison", "model_vs_human", "pair_evaluations",
                           "nudge_rates", "nudge_intervals", "nudge_ordinals", "quality_by_arm",
                           "quality_nudged_vs_rest", "participant_effect", "activity_correlation", "room_quality",
                           "event_centroids", "agenda_quality", "agenda_quality_gender"}) {
    EXPECT_TRUE(names.count(want)) << want;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, MissingRatingsFailTheNudgeStageAndMarkTablesStale) {
  const auto dir = temp_dir("fail");
  // Only one rating: every analysis needing the others must fail.
  AnnotationSet partial;
  const auto corpus = ingest_corpus(DELIBQ_FIXTURE_DIR "/corpus.jsonl");
  const auto filtered = filter_contributions(corpus);
  for (auto c : {CriterionId::kQ1, CriterionId::kQ2, CriterionId::kQ3, CriterionId::kQ4}) {
    partial.add({filtered.front().id, c, "mock", 3, "ok", 0});
  }
  write_annotations(dir / "partial.jsonl", partial);
  auto cfg = fixture_config(dir / "out");
  cfg.annotations = dir / "partial.jsonl";
  cfg.human_annotations.reset();
  cfg.pair_evaluations.reset();
  try {
    run_pipeline(cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "nudge");
    EXPECT_EQ(e.exit_code(), ExitCode::kInputError);
  }
  const auto j = json::parse(read_file(dir / "out" / "manifest.json"));
  EXPECT_EQ(j["status"], "failed");
  EXPECT_EQ(j["failed_stage"], "nudge");
  ASSERT_FALSE(j["tables"].empty());
  for (const auto& t : j["tables"]) EXPECT_TRUE(t["stale"].get<bool>());
  fs::remove_all(dir);
}

TEST(Pipeline, UnknownStatementInAnnotationsFailsAnnotateStage) {
  const auto dir = temp_dir("unknown");
  AnnotationSet bad;
  bad.add({"no-such-statement", CriterionId::kQ1, "mock", 3, "ok", 0});
  write_annotations(dir / "bad.jsonl", bad);
  auto cfg = fixture_config(dir / "out");
  cfg.annotations = dir / "bad.jsonl";
  try {
    run_pipeline(cfg);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "annotate");
    EXPECT_EQ(e.exit_code(), ExitCode::kInputError);
  }
  fs::remove_all(dir);
}
