#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "delibq/corpus.hpp"
#include "delibq/error.hpp"
#include "delibq/provider.hpp"

namespace delibq {

enum class CriterionId { kQ1, kQ2, kQ3, kQ4 };

struct Criterion {
  CriterionId id;
  std::string_view statement_text;
};

/// Q1 justification, Q2 novelty, Q3 builds on the conversation, Q4 enables
/// further discussion.
const std::array<Criterion, 4>& all_criteria();
const Criterion& criterion(CriterionId id);
std::string_view to_string(CriterionId id);
CriterionId parse_criterion(std::string_view text);
/// Accepts "Q1,Q3", "Q1..Q4" and "all".
std::vector<CriterionId> parse_criteria_list(std::string_view text);

inline constexpr std::string_view kTemplateVersion = "dq-query-v1";

struct Rating {
  std::string statement_id;
  CriterionId criterion = CriterionId::kQ1;
  std::string rater;
  int score = 0;
  std::string justification;
  /// Repetition index for repeated-trial runs; 0 otherwise.
  int trial = 0;
};

/// A statement/criterion the provider never answered in the expected format.
struct AnnotationFailure {
  std::string statement_id;
  CriterionId criterion = CriterionId::kQ1;
  std::string rater;
  int trial = 0;
  std::string reason;
  std::string last_response;
};

/// Ratings keyed by (statement, criterion, rater, trial).
class AnnotationSet {
 public:
  using Key = std::tuple<std::string, CriterionId, std::string, int>;

  /// Throws InputError on a duplicate key or an invalid rating.
  void add(Rating rating);
  void add_failure(AnnotationFailure failure);
  /// Keeps existing entries; throws on conflicting duplicates.
  void merge(const AnnotationSet& other);

  const std::map<Key, Rating>& ratings() const { return ratings_; }
  const std::vector<AnnotationFailure>& failures() const { return failures_; }
  std::vector<std::string> raters() const;
  std::size_t size() const { return ratings_.size(); }
  bool empty() const { return ratings_.empty(); }

  /// Throws InputError naming the first statement id missing from the corpus.
  void validate_against(const Corpus& corpus) const;

 private:
  std::map<Key, Rating> ratings_;
  std::vector<AnnotationFailure> failures_;
};

using SpeakerNameFn = std::function<std::string(const std::string& participant_id)>;

struct PromptOptions {
  std::string model_id;
  double temperature = 0.0;
  /// Upper bound on the user prompt in characters; oldest prior statements are
  /// dropped first. Zero disables the limit.
  std::size_t max_prompt_chars = 100'000;
};

/// Renders the rating query for one statement and criterion. Prior statements
/// appear one per line as "<screen name>: <transcript>".
ProviderRequest build_prompt(const DiscussionContext& context, CriterionId criterion, const SpeakerNameFn& speaker_name,
                             const PromptOptions& options = {});
ProviderRequest build_prompt(const DiscussionContext& context, CriterionId criterion, const Corpus& corpus,
                             const PromptOptions& options = {});

enum class RatingParseErrorKind { kNoRatingFound, kScoreOutOfRange, kEmptyJustification };

class RatingParseError : public InputError {
 public:
  RatingParseError(RatingParseErrorKind kind, const std::string& what) : InputError(what), kind_(kind) {}
  RatingParseErrorKind kind() const noexcept { return kind_; }

 private:
  RatingParseErrorKind kind_;
};

struct ParsedRating {
  int score = 0;
  std::string justification;
};

/// Finds the first "Rating: x/5" in the response and the justification text
/// after it. Throws RatingParseError.
ParsedRating parse_rating(std::string_view response_text);

/// The answer format requested from the model.
std::string render_rating(int score, std::string_view justification);

class AnnotationCache;

struct AnnotateOptions {
  /// Extra provider calls after an unparseable answer.
  int retries = 2;
  int parallelism = 4;
  /// Independent repetitions per statement and criterion.
  int trials = 1;
  std::string model_id = "mock";
  std::string template_version{kTemplateVersion};
  PromptOptions prompt;
  /// Invoked for every provider call with the request being sent.
  std::function<void(const ProviderRequest&)> on_call;
};

struct AnnotateStats {
  std::size_t requested = 0;
  std::size_t cache_hits = 0;
  std::size_t provider_calls = 0;
  std::size_t failures = 0;
  std::size_t truncated_prompts = 0;
  std::size_t prompt_chars = 0;
};

struct AnnotateResult {
  AnnotationSet annotations;
  AnnotateStats stats;
};

/// Rates every contribution on every criterion. Cached answers are reused,
/// new answers are appended to the cache as they arrive, and results are
/// merged by key regardless of completion order. Provider errors abort the
/// run after in-flight work has been written to the cache.
AnnotateResult annotate(const Corpus& corpus, const std::vector<Contribution>& contributions,
                        const std::vector<CriterionId>& criteria, CompletionProvider& provider, AnnotationCache& cache,
                        const AnnotateOptions& options);

struct TrialVariance {
  CriterionId criterion = CriterionId::kQ1;
  std::size_t statements = 0;
  /// Mean over statements of the across-trial sample variance.
  double mean_variance = 0.0;
};

std::vector<TrialVariance> trial_variance(const AnnotationSet& annotations, const std::string& rater);

}  // namespace delibq
