#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "delibq/annotation_cache.hpp"
#include "delibq/annotation_io.hpp"
#include "delibq/annotator.hpp"

using namespace delibq;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("delibq_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const Corpus& reference() {
  static const Corpus c = ingest_corpus(DELIBQ_TEST_DATA "/reference_corpus.jsonl");
  return c;
}

/// Answers from a fixed script, then repeats the last entry.
class ScriptedProvider : public CompletionProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> script) : script_(std::move(script)) {}
  ProviderResponse complete(const ProviderRequest&) override {
    std::lock_guard lock(mu_);
    const auto i = std::min(calls_++, script_.size() - 1);
    return {script_[i], {}};
  }
  std::string name() const override { return "scripted"; }
  std::size_t calls() const { return calls_; }

 private:
  std::mutex mu_;
  std::vector<std::string> script_;
  std::size_t calls_ = 0;
};

class FailingProvider : public CompletionProvider {
 public:
  ProviderResponse complete(const ProviderRequest&) override {
    ++calls;
    throw ProviderError(ProviderErrorKind::kAuth, "bad key");
  }
  std::string name() const override { return "failing"; }
  std::atomic<int> calls{0};
};

}  // namespace

TEST(Prompt, MatchesGoldenFiles) {
  const auto req = build_prompt(context_for("r1-target", reference()), CriterionId::kQ1, reference());
  EXPECT_EQ(req.system_instructions, read_file(DELIBQ_TEST_DATA "/golden_prompt_system.txt"));
  EXPECT_EQ(req.user_prompt, read_file(DELIBQ_TEST_DATA "/golden_prompt_user.txt"));
  EXPECT_EQ(req.truncated_prior, 0u);
}

TEST(Prompt, HashIsPinned) {
  const auto req = build_prompt(context_for("r1-target", reference()), CriterionId::kQ1, reference());
  EXPECT_EQ(prompt_hash(req), "a8fbfa0423e1201955145f8e49821d7d84224f826debdadaecb36929d0a50dbf");
}

TEST(Prompt, CriterionTextIsVerbatim) {
  EXPECT_EQ(criterion(CriterionId::kQ2).statement_text,
            "This statement introduces novel ideas, perspectives, or solutions.");
  EXPECT_EQ(criterion(CriterionId::kQ4).statement_text,
            "This statement raises points which will likely improve the quality of the following discussion.");
  const auto req = build_prompt(context_for("r1-target", reference()), CriterionId::kQ3, reference());
  EXPECT_NE(req.user_prompt.find("on whether: This statement builds on top of the previous statements and the "
                                 "proposal.."),
            std::string::npos);
}

TEST(Prompt, TruncatesOldestPriorFirst) {
  PromptOptions opts;
  const auto full = build_prompt(context_for("r1-target", reference()), CriterionId::kQ1, reference(), opts);
  opts.max_prompt_chars = count_scalar_values(full.user_prompt) - 10;
  const auto cut = build_prompt(context_for("r1-target", reference()), CriterionId::kQ1, reference(), opts);
  EXPECT_EQ(cut.truncated_prior, 1u);
  EXPECT_EQ(cut.user_prompt.find("Ana: I think shorter"), std::string::npos);
  EXPECT_NE(cut.user_prompt.find("Ben: but who pays"), std::string::npos);
}

TEST(Prompt, PlaceholderTextInValuesIsNotExpanded) {
  DiscussionContext ctx;
  ctx.topic = "{statement}";
  ctx.target.transcript = "the target";
  const auto req = build_prompt(ctx, CriterionId::kQ1, [](const std::string& id) { return id; });
  EXPECT_NE(req.user_prompt.find("proposals {statement}."), std::string::npos);
}

TEST(ParseRating, CanonicalForm) {
  const auto r = parse_rating("Rating: 4/5. Justification: It gives an example.");
  EXPECT_EQ(r.score, 4);
  EXPECT_EQ(r.justification, "It gives an example.");
  EXPECT_EQ(parse_rating(render_rating(2, "Too vague.")).score, 2);
}

TEST(ParseRating, InvertsRenderOnGeneratedPairs) {
  const std::vector<std::string> pieces{"a",  "Z", "7",  " ", "\n", ".",  ":",         "/5", "Rating: 4/5",
                                        "é", "ü", "**", "\t", "justification:", "5/5", "x"};
  std::mt19937_64 gen(17);
  for (int run = 0; run < 2000; ++run) {
    std::string text;
    const int len = 1 + static_cast<int>(gen() % 12);
    for (int i = 0; i < len; ++i) text += pieces[gen() % pieces.size()];
    // Well-formed justifications carry no surrounding whitespace.
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    text = text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);
    const int score = 1 + static_cast<int>(gen() % 5);
    const auto parsed = parse_rating(render_rating(score, text));
    EXPECT_EQ(parsed.score, score);
    EXPECT_EQ(parsed.justification, text);
  }
}

TEST(ParseRating, TolerantVariants) {
  EXPECT_EQ(parse_rating("**Rating:** 3/5\nJustification: ok").score, 3);
  EXPECT_EQ(parse_rating("rating 5 / 5 - strong anecdote").justification, "- strong anecdote");
  EXPECT_EQ(parse_rating("Sure. Rating: 1/5. The statement is off topic.").justification,
            "The statement is off topic.");
}

TEST(ParseRating, Errors) {
  auto kind_of = [](const std::string& text) {
    try {
      parse_rating(text);
    } catch (const RatingParseError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error for " << text;
    return RatingParseErrorKind::kNoRatingFound;
  };
  EXPECT_EQ(kind_of("I would say four."), RatingParseErrorKind::kNoRatingFound);
  EXPECT_EQ(kind_of("Rating: 4/50. Justification: x"), RatingParseErrorKind::kNoRatingFound);
  EXPECT_EQ(kind_of("Rating: 6/5. Justification: x"), RatingParseErrorKind::kScoreOutOfRange);
  EXPECT_EQ(kind_of("Rating: 0/5. Justification: x"), RatingParseErrorKind::kScoreOutOfRange);
  EXPECT_EQ(kind_of("Rating: 3/5. Justification:   "), RatingParseErrorKind::kEmptyJustification);
  EXPECT_EQ(kind_of("Rating: 3/5."), RatingParseErrorKind::kEmptyJustification);
}

TEST(Annotate, RetriesMalformedAnswersThenSucceeds) {
  ScriptedProvider provider({"no idea", "still no idea", "Rating: 4/5. Justification: fine."});
  AnnotationCache cache;
  AnnotateOptions opts;
  opts.retries = 2;
  const std::vector<Contribution> one{*reference().find_contribution("r1-target")};
  const auto res = annotate(reference(), one, {CriterionId::kQ1}, provider, cache, opts);
  EXPECT_EQ(provider.calls(), 3u);
  EXPECT_EQ(res.stats.provider_calls, 3u);
  ASSERT_EQ(res.annotations.size(), 1u);
  EXPECT_EQ(res.annotations.ratings().begin()->second.score, 4);
  EXPECT_TRUE(res.annotations.failures().empty());
}

TEST(Annotate, ExhaustedRetriesRecordFailure) {
  ScriptedProvider provider({"no idea"});
  AnnotationCache cache;
  AnnotateOptions opts;
  opts.retries = 1;
  const std::vector<Contribution> one{*reference().find_contribution("r1-target")};
  const auto res = annotate(reference(), one, {CriterionId::kQ1}, provider, cache, opts);
  EXPECT_EQ(provider.calls(), 2u);
  EXPECT_TRUE(res.annotations.empty());
  ASSERT_EQ(res.annotations.failures().size(), 1u);
  EXPECT_EQ(res.annotations.failures()[0].last_response, "no idea");
  EXPECT_EQ(res.stats.failures, 1u);
  // Failures are not cache hits: a later run asks again.
  ScriptedProvider good({"Rating: 2/5. Justification: meh."});
  const auto again = annotate(reference(), one, {CriterionId::kQ1}, good, cache, opts);
  EXPECT_EQ(good.calls(), 1u);
  EXPECT_EQ(again.annotations.size(), 1u);
}

TEST(Annotate, ProviderErrorAbortsRun) {
  FailingProvider provider;
  AnnotationCache cache;
  AnnotateOptions opts;
  opts.parallelism = 1;
  const auto filtered = filter_contributions(reference(), 1);
  EXPECT_THROW(annotate(reference(), filtered, {CriterionId::kQ1, CriterionId::kQ2}, provider, cache, opts),
               ProviderError);
  EXPECT_EQ(provider.calls.load(), 1);
}

TEST(Annotate, WarmCacheMakesNoCalls) {
  const auto dir = temp_dir("warm");
  const auto contributions = filter_contributions(reference(), 1);
  MockProvider mock(3);
  AnnotateOptions opts;
  AnnotateResult first;
  {
    AnnotationCache cache(dir / "cache.jsonl");
    first = annotate(reference(), contributions, {CriterionId::kQ1, CriterionId::kQ4}, mock, cache, opts);
  }
  EXPECT_EQ(first.stats.provider_calls, contributions.size() * 2);
  AnnotationCache reloaded(dir / "cache.jsonl");
  ScriptedProvider never({"Rating: 1/5. Justification: should not be used."});
  const auto second = annotate(reference(), contributions, {CriterionId::kQ1, CriterionId::kQ4}, never, reloaded, opts);
  EXPECT_EQ(never.calls(), 0u);
  EXPECT_EQ(second.stats.cache_hits, contributions.size() * 2);
  EXPECT_EQ(serialize_annotations(first.annotations), serialize_annotations(second.annotations));
  fs::remove_all(dir);
}

TEST(Annotate, ChangingTemplateInputsMissesCache) {
  const auto contributions = filter_contributions(reference(), 1);
  MockProvider mock(3);
  AnnotationCache cache;
  AnnotateOptions opts;
  annotate(reference(), contributions, {CriterionId::kQ1}, mock, cache, opts);
  opts.prompt.temperature = 0.7;
  const auto res = annotate(reference(), contributions, {CriterionId::kQ1}, mock, cache, opts);
  EXPECT_EQ(res.stats.cache_hits, 0u);
  opts.template_version = "other";
  EXPECT_EQ(annotate(reference(), contributions, {CriterionId::kQ1}, mock, cache, opts).stats.cache_hits, 0u);
}

TEST(Annotate, ParallelResultEqualsSerial) {
  const auto corpus = ingest_corpus(DELIBQ_FIXTURE_DIR "/corpus.jsonl");
  const auto filtered = filter_contributions(corpus);
  MockProvider mock(9);
  AnnotateOptions serial, parallel;
  serial.parallelism = 1;
  parallel.parallelism = 8;
  AnnotationCache c1, c2;
  const auto a = annotate(corpus, filtered, {CriterionId::kQ1, CriterionId::kQ2}, mock, c1, serial);
  const auto b = annotate(corpus, filtered, {CriterionId::kQ1, CriterionId::kQ2}, mock, c2, parallel);
  EXPECT_EQ(annotation_digest(a.annotations), annotation_digest(b.annotations));
  EXPECT_EQ(c2.size(), filtered.size() * 2);
}

TEST(Annotate, ConcurrentAppendsProduceWholeLines) {
  const auto dir = temp_dir("concurrent");
  const auto corpus = ingest_corpus(DELIBQ_FIXTURE_DIR "/corpus.jsonl");
  const auto filtered = filter_contributions(corpus);
  MockProvider mock(1);
  AnnotateOptions opts;
  opts.parallelism = 16;
  {
    AnnotationCache cache(dir / "c.jsonl");
    annotate(corpus, filtered, {CriterionId::kQ1, CriterionId::kQ2, CriterionId::kQ3}, mock, cache, opts);
  }
  std::ifstream in(dir / "c.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    EXPECT_TRUE(nlohmann::json::accept(line)) << line;
    ++n;
  }
  EXPECT_EQ(n, filtered.size() * 3);
  fs::remove_all(dir);
}

TEST(Annotate, TrialsAreSeparateKeys) {
  const auto contributions = filter_contributions(reference(), 1);
  MockProvider mock(5);
  AnnotationCache cache;
  AnnotateOptions opts;
  opts.trials = 3;
  const auto res = annotate(reference(), contributions, {CriterionId::kQ1}, mock, cache, opts);
  EXPECT_EQ(res.annotations.size(), contributions.size() * 3);
  // The mock answer depends only on the prompt, so trials agree.
  const auto tv = trial_variance(res.annotations, "mock");
  ASSERT_EQ(tv.size(), 1u);
  EXPECT_EQ(tv[0].statements, contributions.size());
  EXPECT_EQ(tv[0].mean_variance, 0.0);
}

TEST(Cache, TornFinalLineIsSkippedCorruptMiddleIsNot) {
  const auto dir = temp_dir("torn");
  CacheEntry e;
  e.key = CacheKey{"s1", CriterionId::kQ1, "h", "m", "v", 0.0, 0};
  e.score = 3;
  e.justification = "j";
  {
    AnnotationCache cache(dir / "c.jsonl");
    cache.append(e);
  }
  {
    std::ofstream out(dir / "c.jsonl", std::ios::app);
    out << R"({"statement_id":"s2","crit)";
  }
  AnnotationCache ok(dir / "c.jsonl");
  EXPECT_EQ(ok.size(), 1u);
  ASSERT_TRUE(ok.lookup(e.key));
  {
    std::ofstream out(dir / "c.jsonl", std::ios::app);
    out << "\n" << nlohmann::json{{"statement_id", "s3"}}.dump() << "\n";
  }
  EXPECT_THROW(AnnotationCache(dir / "c.jsonl"), InputError);
  fs::remove_all(dir);
}

TEST(Cache, FailureNeverHidesSuccess) {
  AnnotationCache cache;
  CacheEntry ok;
  ok.key = CacheKey{"s1", CriterionId::kQ1, "h", "m", "v", 0.0, 0};
  ok.score = 5;
  ok.justification = "j";
  cache.append(ok);
  CacheEntry bad = ok;
  bad.status = CacheStatus::kFailed;
  cache.append(bad);
  ASSERT_TRUE(cache.lookup(ok.key));
  EXPECT_EQ(cache.lookup(ok.key)->score, 5);
}

TEST(AnnotationSet, RejectsDuplicatesAndInvalidScores) {
  AnnotationSet set;
  set.add({"s1", CriterionId::kQ1, "h1", 3, "j", 0});
  EXPECT_THROW(set.add({"s1", CriterionId::kQ1, "h1", 4, "j", 0}), InputError);
  EXPECT_NO_THROW(set.add({"s1", CriterionId::kQ1, "h1", 4, "j", 1}));
  EXPECT_THROW(set.add({"s2", CriterionId::kQ1, "h1", 6, "j", 0}), InputError);
  EXPECT_THROW(set.add({"s2", CriterionId::kQ1, "h1", 2, "", 0}), InputError);
}

TEST(AnnotationIo, RoundTripAndCacheRecords) {
  AnnotationSet set;
  set.add({"s2", CriterionId::kQ2, "h1", 3, "tab\there", 0});
  set.add({"s1", CriterionId::kQ1, "h2", 5, "ünïcode", 2});
  const auto text = serialize_annotations(set);
  EXPECT_EQ(serialize_annotations(parse_annotations(text)), text);

  const std::string cache_line =
      R"({"statement_id":"s9","criterion":"Q3","model_id":"gpt","prompt_hash":"x","template_version":"v","status":"failed","error":"parse"})";
  const auto parsed = parse_annotations(cache_line + "\n");
  EXPECT_TRUE(parsed.empty());
  ASSERT_EQ(parsed.failures().size(), 1u);
  EXPECT_EQ(parsed.failures()[0].rater, "gpt");
}

TEST(AnnotationIo, RatingMatrixAndScores) {
  AnnotationSet set;
  set.add({"s1", CriterionId::kQ1, "h1", 3, "j", 0});
  set.add({"s1", CriterionId::kQ1, "h2", 4, "j", 0});
  set.add({"s2", CriterionId::kQ1, "h1", 5, "j", 0});
  const auto m = rating_matrix(set, CriterionId::kQ1);
  EXPECT_EQ(m.num_statements(), 2u);
  EXPECT_EQ(m.num_raters(), 2u);
  EXPECT_FALSE(m.complete());
  EXPECT_THROW(m.require_complete(), InputError);
  EXPECT_EQ(rater_scores(set, CriterionId::kQ1, "h1", {"s2", "s1"}), (std::vector<double>{5, 3}));
  EXPECT_THROW(rater_scores(set, CriterionId::kQ1, "h2", {"s2"}), InputError);
}

TEST(Criteria, ParseLists) {
  EXPECT_EQ(parse_criteria_list("Q1..Q4").size(), 4u);
  EXPECT_EQ(parse_criteria_list("Q3,Q1"), (std::vector<CriterionId>{CriterionId::kQ1, CriterionId::kQ3}));
  EXPECT_EQ(parse_criteria_list("all").size(), 4u);
  EXPECT_THROW(parse_criteria_list("Q5"), InputError);
}
