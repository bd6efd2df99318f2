#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "delibq/bootstrap.hpp"
#include "delibq/reliability.hpp"

namespace delibq {

/// Mean score of one statement over the raters that are not excluded.
/// Rater indices refer to matrix columns.
double golden_rating(const RatingMatrix& matrix, std::size_t statement, const std::set<std::size_t>& excluded);

/// Every size-g subset of rater indices [0, n), in lexicographic order.
std::vector<std::vector<std::size_t>> enumerate_groups(std::size_t n, std::size_t g);

/// Outcome of pitting the model against one group of human raters.
struct GroupOutcome {
  std::vector<std::size_t> group;
  /// Per statement: golden rating from raters outside the group.
  std::vector<double> golden;
  /// Per statement: mean score of the group members.
  std::vector<double> group_mean;
  /// Per statement win score for the model: 1 win, 0.5 tie, 0 loss.
  std::vector<double> model_score;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  double model_l1 = 0.0;
  double group_l1 = 0.0;
};

/// Two distances closer than this are a tie.
inline constexpr double kTieTolerance = 1e-12;

/// 1 if the model error is smaller, 0.5 on a tie, 0 otherwise.
double win_score(double model_error, double group_error);

GroupOutcome compare_against_group(const RatingMatrix& matrix, std::span<const double> model_scores,
                                   const std::vector<std::size_t>& group);

struct GoldenComparison {
  std::size_t group_size = 0;
  std::size_t num_groups = 0;
  /// Fraction of (group, statement) points won by the model.
  double per_statement_wins = 0.0;
  /// Fraction of groups on which the model wins more statements than it loses.
  double per_group_wins = 0.0;
  /// Fraction of groups whose summed absolute error exceeds the model's.
  double per_group_wins_1norm = 0.0;
};

/// Model versus every C(n, g) group of raters; ties count as half wins in all
/// three aggregates. Groups are evaluated in parallel and reduced in
/// enumeration order.
GoldenComparison compare_model_vs_groups(const RatingMatrix& matrix, std::span<const double> model_scores,
                                         std::size_t group_size);

/// Leave-one-out mean correction: each statement's model score minus the
/// mean model-minus-human offset on all other statements.
std::vector<double> debias_model_scores(std::span<const double> model_scores, std::span<const double> human_means);

/// Mean over all raters per statement.
std::vector<double> statement_means(const RatingMatrix& matrix);

/// One evaluator's score for a rating-justification pair.
struct PairEvaluation {
  std::string statement_id;
  std::string criterion;
  /// "model" or an annotator id.
  std::string source;
  std::string evaluator;
  int score = 0;

  bool from_model() const { return source == "model"; }
};

struct PairSummaryRow {
  std::string criterion;
  /// "model", "humans", or an annotator id in the per-source breakdown.
  std::string source;
  std::size_t n = 0;
  double mean = 0.0;
  BootstrapCI ci;
};

struct PairSummary {
  std::vector<PairSummaryRow> by_class;
  std::vector<PairSummaryRow> by_source;
  /// Model minus humans per criterion, unpaired.
  std::vector<PairSummaryRow> difference;
};

/// Rejects evaluations where an annotator scores their own pair.
PairSummary summarize_pair_evaluations(const std::vector<PairEvaluation>& evals, int resamples = kDefaultResamples,
                                       std::uint64_t seed = 0);

}  // namespace delibq
