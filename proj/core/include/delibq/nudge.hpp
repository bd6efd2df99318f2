#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "delibq/annotator.hpp"
#include "delibq/bootstrap.hpp"
#include "delibq/corpus.hpp"

namespace delibq {

inline constexpr Millis kDefaultResponseWindow{30'000};
inline constexpr Millis kDefaultBin{5'000};

struct NudgeOutcome {
  NudgeEvent nudge;
  bool responded = false;
  std::optional<Millis> response_delay;
  std::optional<std::string> contribution_id;
};

/// Joins every individual nudge to the earliest same-participant, same-room
/// speak request with 0 < delay <= window. Nudges are visited in time order
/// (ties by id) and each request satisfies at most one nudge. Whole-room
/// nudges are dropped before linking.
std::vector<NudgeOutcome> link_nudges(const std::vector<NudgeEvent>& nudges, const std::vector<SpeakRequest>& requests,
                                      Millis window = kDefaultResponseWindow);

struct RateEstimate {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 0;
  double rate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Proportion with a Wilson 95% interval.
RateEstimate rate_estimate(std::uint64_t numerator, std::uint64_t denominator);

enum class ResponseTarget {
  /// Any speak request inside the window.
  kRequest,
  /// A speak request that produced a contribution.
  kContribution,
};

struct ArmRates {
  RateEstimate sent;
  RateEstimate skipped;
  /// (rate_sent - rate_skipped) / rate_skipped.
  double relative_uplift = 0.0;
};

ArmRates arm_rates(std::uint64_t sent_hits, std::uint64_t sent_total, std::uint64_t skipped_hits,
                   std::uint64_t skipped_total);

/// When `eligible` is given, contribution outcomes only count if the linked
/// contribution is in the set (for example, the filtered contributions).
ArmRates arm_rates(const std::vector<NudgeOutcome>& outcomes, ResponseTarget target,
                   const std::set<std::string>* eligible = nullptr);

struct BinRate {
  NudgeArm arm = NudgeArm::kSent;
  /// 1-based; covers delays in ((bin-1)*width, bin*width].
  int bin = 0;
  Millis from{0};
  Millis to{0};
  RateEstimate estimate;
};

/// Response rate per arm and delay bin; denominators are whole arm sizes.
std::vector<BinRate> interval_breakdown(const std::vector<NudgeOutcome>& outcomes, Millis bin = kDefaultBin,
                                        Millis window = kDefaultResponseWindow);

struct OrdinalRate {
  /// 1..4, with 5 standing for "5 or later".
  int ordinal = 0;
  RateEstimate estimate;
};

inline constexpr int kOrdinalBuckets = 5;

/// Sent-arm response rate by nudge ordinal.
std::vector<OrdinalRate> repeated_nudge_effect(const std::vector<NudgeOutcome>& outcomes);

/// Per (statement, criterion) quality score for one rater, averaged over trials.
class QualityScores {
 public:
  QualityScores() = default;
  /// Takes the successful ratings of `rater`. An empty rater selects the only
  /// rater present and throws if there are several.
  QualityScores(const AnnotationSet& annotations, const std::string& rater = {});

  void set(const std::string& statement_id, CriterionId criterion, double score);
  std::optional<double> get(const std::string& statement_id, CriterionId criterion) const;
  const std::string& rater() const { return rater_; }
  std::set<CriterionId> criteria() const;

 private:
  std::string rater_;
  std::map<std::pair<std::string, CriterionId>, double> scores_;
};

struct QualityComparison {
  CriterionId criterion = CriterionId::kQ1;
  std::size_t n_first = 0;
  std::size_t n_second = 0;
  double first_mean = 0.0;
  double second_mean = 0.0;
  /// first_mean - second_mean with an unpaired bootstrap CI.
  BootstrapCI diff;
  /// Sample standard deviation over both groups together.
  double stddev = 0.0;
};

struct BootstrapOptions {
  int resamples = kDefaultResamples;
  std::uint64_t seed = 0;
};

/// Analysis 1: quality after sent (first) versus skipped (second) nudges.
/// Only responded outcomes whose contribution is in `filtered` take part.
/// Throws AnalysisError listing contributions that lack a rating.
std::vector<QualityComparison> quality_by_arm(const QualityScores& scores, const std::vector<NudgeOutcome>& outcomes,
                                              const std::vector<Contribution>& filtered,
                                              const std::vector<CriterionId>& criteria, BootstrapOptions opts = {});

/// Contributions whose speak request answered a sent nudge.
std::set<std::string> nudged_contributions(const std::vector<NudgeOutcome>& outcomes);

struct NudgedSplitOptions {
  /// Drop contributions that answered a skipped nudge from the "other" group.
  bool exclude_skipped_responses = false;
};

/// Analysis 2: nudged (first) versus all other filtered contributions (second).
std::vector<QualityComparison> quality_nudged_vs_rest(const QualityScores& scores,
                                                      const std::vector<NudgeOutcome>& outcomes,
                                                      const std::vector<Contribution>& filtered,
                                                      const std::vector<CriterionId>& criteria,
                                                      BootstrapOptions opts = {}, NudgedSplitOptions split = {});

struct ParticipantEffect {
  CriterionId criterion = CriterionId::kQ1;
  std::size_t n_participants = 0;
  /// Mean of per-participant (nudged mean - other mean), with a bootstrap CI
  /// over participants.
  BootstrapCI effect;
  /// Per eligible participant, ordered by participant id.
  std::vector<std::pair<std::string, double>> per_participant;
};

/// Analysis 3: within-participant nudge effect for participants with at
/// least one nudged and one other filtered contribution.
std::vector<ParticipantEffect> per_participant_effect(const QualityScores& scores,
                                                      const std::vector<NudgeOutcome>& outcomes,
                                                      const std::vector<Contribution>& filtered,
                                                      const std::vector<CriterionId>& criteria,
                                                      BootstrapOptions opts = {});

struct ActivityCorrelation {
  CriterionId criterion = CriterionId::kQ1;
  std::size_t n_participants = 0;
  double pearson_r = 0.0;
};

/// Pearson r between a participant's number of filtered contributions and
/// their mean quality, over participants with at least one rated contribution.
std::vector<ActivityCorrelation> activity_quality_correlation(const QualityScores& scores,
                                                              const std::vector<Contribution>& filtered,
                                                              const std::vector<CriterionId>& criteria);

}  // namespace delibq
