#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "delibq/corpus.hpp"
#include "delibq/error.hpp"

using namespace delibq;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string kHeader =
    R"({"type":"event","id":"E1"}
{"type":"room","id":"R1","event_id":"E1","session_id":"S1","roomgroup_id":"G1","active_from_ms":0,"active_until_ms":100000}
{"type":"agenda_item","session_id":"S1","index":1,"topic":"Topic one"}
{"type":"participant","id":"p1","screen_name":"P1","gender":"woman"}
{"type":"participant","id":"p2"}
)";

std::string contribution(const std::string& id, const std::string& pid, int start, const std::string& text,
                         const std::string& phase = "agenda", int item = 1) {
  nlohmann::json j = {{"type", "contribution"}, {"id", id},      {"room_id", "R1"},     {"participant_id", pid},
                      {"phase", phase},         {"start_ms", start}, {"transcript", text}};
  if (phase == "agenda") j["agenda_item"] = item;
  return j.dump() + "\n";
}

}  // namespace

TEST(CountScalarValues, CountsCodePointsNotBytes) {
  EXPECT_EQ(count_scalar_values(""), 0u);
  EXPECT_EQ(count_scalar_values("abc"), 3u);
  EXPECT_EQ(count_scalar_values("Zürich"), 6u);
  EXPECT_EQ(count_scalar_values("€"), 1u);
  EXPECT_EQ(count_scalar_values("\xF0\x9F\x98\x80"), 1u);
}

TEST(ParseCorpus, ThreeRecordFixtureFilters) {
  const std::string long_text(120, 'a');
  auto c = parse_corpus(kHeader + contribution("c1", "p1", 10, long_text) + contribution("c2", "p2", 20, "short") +
                        contribution("c3", "p1", 30, long_text, "introduction"));
  EXPECT_EQ(c.contributions().size(), 3u);
  const auto kept = filter_contributions(c);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "c1");
}

TEST(ParseCorpus, ExactlyThresholdIsKeptOneBelowIsNot) {
  auto c = parse_corpus(kHeader + contribution("at", "p1", 10, std::string(100, 'x')) +
                        contribution("below", "p1", 20, std::string(99, 'x')));
  const auto kept = filter_contributions(c);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "at");
}

TEST(ParseCorpus, NonAsciiLengthUsesScalarValues) {
  // 99 ASCII characters plus one two-byte character: 100 characters, 101 bytes.
  auto c = parse_corpus(kHeader + contribution("c1", "p1", 10, std::string(99, 'x') + "é") +
                        contribution("c2", "p1", 20, std::string(98, 'x') + "é"));
  const auto kept = filter_contributions(c);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "c1");
  EXPECT_EQ(c.find_contribution("c1")->char_count, 100u);
}

TEST(ParseCorpus, MissingGenderIsUnknown) {
  auto c = parse_corpus(kHeader);
  EXPECT_EQ(c.find_participant("p2")->gender, Gender::kOtherOrUnknown);
  EXPECT_EQ(c.find_participant("p2")->screen_name, "p2");
  EXPECT_EQ(c.find_participant("p1")->gender, Gender::kWoman);
}

TEST(ParseCorpus, DuplicateIdReportsLine) {
  try {
    parse_corpus(kHeader + contribution("c1", "p1", 10, "a") + contribution("c1", "p1", 20, "b"));
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("line 7"), std::string::npos) << what;
    EXPECT_NE(what.find("c1"), std::string::npos) << what;
  }
}

TEST(ParseCorpus, AggregatesEveryProblem) {
  const std::string text = kHeader + "{not json}\n" + contribution("c1", "ghost", 10, "a") +
                           R"({"type":"mystery"})" + "\n" +
                           R"({"type":"contribution","id":"c2","room_id":"R1","participant_id":"p1","phase":"agenda","start_ms":1,"transcript":"x"})" +
                           "\n";
  try {
    parse_corpus(text);
    FAIL();
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("4 problems"), std::string::npos) << what;
    EXPECT_NE(what.find("line 6"), std::string::npos);
    EXPECT_NE(what.find("line 7"), std::string::npos);
    EXPECT_NE(what.find("line 8"), std::string::npos);
    EXPECT_NE(what.find("line 9"), std::string::npos);
  }
}

TEST(ParseCorpus, RejectsNestedValuesAndCharCountMismatch) {
  EXPECT_THROW(parse_corpus(kHeader + R"({"type":"participant","id":"p3","tags":["a"]})" + "\n"), InputError);
  EXPECT_THROW(
      parse_corpus(kHeader +
                   R"({"type":"contribution","id":"c1","room_id":"R1","participant_id":"p1","phase":"agenda","agenda_item":1,"start_ms":1,"transcript":"abc","char_count":4})" +
                   "\n"),
      InputError);
}

TEST(ParseCorpus, RoomgroupInTwoSessionsIsRejected) {
  const std::string text =
      R"({"type":"event","id":"E1"}
{"type":"room","id":"R1","event_id":"E1","session_id":"S1","roomgroup_id":"G1"}
{"type":"room","id":"R2","event_id":"E1","session_id":"S2","roomgroup_id":"G1"}
)";
  EXPECT_THROW(parse_corpus(text), InputError);
}

TEST(ParseCorpus, SpeakRequestOutsideRoomSpanIsRejected) {
  const std::string text = kHeader +
                           R"({"type":"speak_request","participant_id":"p1","room_id":"R1","time_ms":200000})" + "\n";
  EXPECT_THROW(parse_corpus(text), InputError);
}

TEST(ParseCorpus, SpeakRequestForOtherParticipantsContributionIsRejected) {
  const std::string text = kHeader + contribution("c1", "p1", 10, "a") +
                           R"({"type":"speak_request","participant_id":"p2","room_id":"R1","time_ms":5,"contribution_id":"c1"})" +
                           "\n";
  EXPECT_THROW(parse_corpus(text), InputError);
}

TEST(ParseCorpus, NudgeOrdinalsCountBothArmsPerParticipantAndRoom) {
  const std::string text = kHeader +
                           R"({"type":"nudge","id":"n1","participant_id":"p1","room_id":"R1","time_ms":10,"arm":"sent","kind":"general"}
{"type":"nudge","id":"n2","participant_id":"p1","room_id":"R1","time_ms":20,"arm":"skipped","kind":"procon"}
{"type":"nudge","id":"n3","participant_id":"p2","room_id":"R1","time_ms":15,"arm":"sent","kind":"personalized"}
{"type":"nudge","id":"n4","participant_id":"p1","room_id":"R1","time_ms":30,"arm":"sent","kind":"speak_room"}
{"type":"nudge","id":"n5","participant_id":"p1","room_id":"R1","time_ms":40,"arm":"sent","kind":"general"}
)";
  auto c = parse_corpus(text);
  std::map<std::string, int> ordinal;
  for (const auto& n : c.nudges()) ordinal[n.id] = n.ordinal;
  EXPECT_EQ(ordinal["n1"], 1);
  EXPECT_EQ(ordinal["n2"], 2);
  EXPECT_EQ(ordinal["n3"], 1);
  EXPECT_EQ(ordinal["n4"], 0);
  EXPECT_EQ(ordinal["n5"], 3);
}

TEST(ContextFor, PriorSameItemSameRoomOnly) {
  auto c = ingest_corpus(DELIBQ_TEST_DATA "/reference_corpus.jsonl");
  const auto ctx = context_for("r1-target", c);
  EXPECT_EQ(ctx.topic, "Introduce a four-day working week for public employees");
  ASSERT_EQ(ctx.prior_contributions.size(), 2u);
  EXPECT_EQ(ctx.prior_contributions[0].id, "r1-a");
  EXPECT_EQ(ctx.prior_contributions[1].id, "r1-b");
  EXPECT_EQ(ctx.target.id, "r1-target");
}

TEST(ContextFor, FirstContributionHasEmptyContext) {
  auto c = ingest_corpus(DELIBQ_TEST_DATA "/reference_corpus.jsonl");
  EXPECT_TRUE(context_for("r1-a", c).prior_contributions.empty());
  EXPECT_THROW(context_for("r1-intro", c), InputError);
  EXPECT_THROW(context_for("nope", c), InputError);
}

TEST(ContextFor, MatchesBruteForceScanOnFixture) {
  const auto corpus = ingest_corpus(DELIBQ_FIXTURE_DIR "/corpus.jsonl");
  std::size_t checked = 0;
  for (const auto& target : corpus.contributions()) {
    if (target.agenda_item.phase != Phase::kAgenda) continue;
    std::vector<std::string> want;
    for (const auto& c : corpus.contributions()) {
      if (c.room_id == target.room_id && c.agenda_item == target.agenda_item && c.start_time < target.start_time) {
        want.push_back(c.id);
      }
    }
    std::vector<std::string> got;
    for (const auto& c : context_for(target, corpus).prior_contributions) got.push_back(c.id);
    EXPECT_EQ(got, want) << target.id;
    ++checked;
  }
  EXPECT_GT(checked, 100u);
}

TEST(CorpusStats, FixtureMatchesGeneratorManifest) {
  const auto expected = nlohmann::json::parse(read_file(DELIBQ_FIXTURE_DIR "/expected.json"))["corpus_stats"];
  const auto s = corpus_stats(ingest_corpus(DELIBQ_FIXTURE_DIR "/corpus.jsonl"));
  EXPECT_EQ(s.events, expected["events"].get<std::size_t>());
  EXPECT_EQ(s.sessions, expected["sessions"].get<std::size_t>());
  EXPECT_EQ(s.rooms, expected["rooms"].get<std::size_t>());
  EXPECT_EQ(s.unique_participants, expected["unique_participants"].get<std::size_t>());
  EXPECT_EQ(s.contributions, expected["contributions"].get<std::size_t>());
  EXPECT_EQ(s.filtered_contributions, expected["filtered_contributions"].get<std::size_t>());
  EXPECT_EQ(s.median_room_size, expected["median_room_size"].get<double>());
  EXPECT_DOUBLE_EQ(s.mean_room_size, expected["mean_room_size"].get<double>());
  EXPECT_DOUBLE_EQ(s.mean_filtered_length, expected["mean_filtered_length"].get<double>());
}

TEST(CorpusStats, FilterIsIdempotent) {
  const auto c = ingest_corpus(DELIBQ_FIXTURE_DIR "/corpus.jsonl");
  const auto once = filter_contributions(c);
  const auto twice = filter_contributions(once);
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i].id, twice[i].id);
}
