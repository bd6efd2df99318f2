#include "delibq/benchmarking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "delibq/error.hpp"
#include "delibq/stats.hpp"

namespace delibq {

double golden_rating(const RatingMatrix& matrix, std::size_t statement, const std::set<std::size_t>& excluded) {
  if (statement >= matrix.num_statements()) throw InputError("statement index out of range");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < matrix.num_raters(); ++r) {
    if (excluded.count(r)) continue;
    sum += matrix.at(statement, r);
    ++n;
  }
  if (n == 0) throw InputError("golden rating: every rater is excluded");
  return sum / static_cast<double>(n);
}

std::vector<std::vector<std::size_t>> enumerate_groups(std::size_t n, std::size_t g) {
  if (g < 1 || g > n) {
    throw InputError("group size " + std::to_string(g) + " out of range for " + std::to_string(n) + " raters");
  }
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> idx(g);
  for (std::size_t i = 0; i < g; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    // Advance to the next combination in lexicographic order.
    std::size_t i = g;
    while (i > 0 && idx[i - 1] == n - g + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < g; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

double win_score(double model_error, double group_error) {
  if (std::abs(model_error - group_error) <= kTieTolerance) return 0.5;
  return model_error < group_error ? 1.0 : 0.0;
}

GroupOutcome compare_against_group(const RatingMatrix& matrix, std::span<const double> model_scores,
                                   const std::vector<std::size_t>& group) {
  if (model_scores.size() != matrix.num_statements()) {
    throw InputError("model scores cover " + std::to_string(model_scores.size()) + " statements, matrix has " +
                     std::to_string(matrix.num_statements()));
  }
  const std::set<std::size_t> members(group.begin(), group.end());
  if (members.size() != group.size() || members.empty()) throw InputError("group must list distinct raters");
  for (auto r : members) {
    if (r >= matrix.num_raters()) throw InputError("group member out of range");
  }

  GroupOutcome out;
  out.group = group;
  const std::size_t n = matrix.num_statements();
  out.golden.resize(n);
  out.group_mean.resize(n);
  out.model_score.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    out.golden[s] = golden_rating(matrix, s, members);
    double sum = 0.0;
    for (auto r : group) sum += matrix.at(s, r);
    out.group_mean[s] = sum / static_cast<double>(group.size());

    const double model_err = std::abs(model_scores[s] - out.golden[s]);
    const double group_err = std::abs(out.group_mean[s] - out.golden[s]);
    out.model_l1 += model_err;
    out.group_l1 += group_err;
    out.model_score[s] = win_score(model_err, group_err);
    if (out.model_score[s] == 1.0) {
      ++out.wins;
    } else if (out.model_score[s] == 0.0) {
      ++out.losses;
    } else {
      ++out.ties;
    }
  }
  return out;
}

GoldenComparison compare_model_vs_groups(const RatingMatrix& matrix, std::span<const double> model_scores,
                                         std::size_t group_size) {
  matrix.require_complete();
  if (matrix.num_statements() == 0) throw InputError("no statements to compare");
  if (group_size >= matrix.num_raters()) {
    throw InputError("group size " + std::to_string(group_size) + " leaves no raters for the golden rating");
  }
  if (model_scores.size() != matrix.num_statements()) {
    throw InputError("model scores cover " + std::to_string(model_scores.size()) + " statements, matrix has " +
                     std::to_string(matrix.num_statements()));
  }
  const auto groups = enumerate_groups(matrix.num_raters(), group_size);

  struct Tally {
    double statement_points = 0.0;
    double group_point = 0.0;
    double l1_point = 0.0;
  };
  std::vector<Tally> tallies(groups.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto outcome = compare_against_group(matrix, model_scores, groups[i]);
      Tally& t = tallies[i];
      for (double p : outcome.model_score) t.statement_points += p;
      t.group_point = outcome.wins > outcome.losses ? 1.0 : (outcome.wins == outcome.losses ? 0.5 : 0.0);
      t.l1_point = win_score(outcome.model_l1, outcome.group_l1);
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(1, groups.size() / 8));
  if (workers <= 1) {
    work(0, groups.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (groups.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(groups.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }

  // Reduce in enumeration order so results do not depend on scheduling.
  GoldenComparison out;
  out.group_size = group_size;
  out.num_groups = groups.size();
  double statement_points = 0.0, group_points = 0.0, l1_points = 0.0;
  for (const auto& t : tallies) {
    statement_points += t.statement_points;
    group_points += t.group_point;
    l1_points += t.l1_point;
  }
  const double n_groups = static_cast<double>(groups.size());
  out.per_statement_wins = statement_points / (n_groups * static_cast<double>(matrix.num_statements()));
  out.per_group_wins = group_points / n_groups;
  out.per_group_wins_1norm = l1_points / n_groups;
  return out;
}

std::vector<double> debias_model_scores(std::span<const double> model_scores, std::span<const double> human_means) {
  if (model_scores.size() != human_means.size()) throw InputError("debias: model and human scores differ in length");
  const std::size_t n = model_scores.size();
  if (n < 2) throw InputError("debias needs at least two statements");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += model_scores[i] - human_means[i];
  std::vector<double> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double offset = model_scores[s] - human_means[s];
    const double bias = (total - offset) / static_cast<double>(n - 1);
    out[s] = model_scores[s] - bias;
  }
  return out;
}

std::vector<double> statement_means(const RatingMatrix& matrix) {
  std::vector<double> out(matrix.num_statements());
  for (std::size_t s = 0; s < matrix.num_statements(); ++s) out[s] = golden_rating(matrix, s, {});
  return out;
}

PairSummary summarize_pair_evaluations(const std::vector<PairEvaluation>& evals, int resamples, std::uint64_t seed) {
  if (evals.empty()) throw AnalysisError("no pair evaluations to summarize");
  std::map<std::string, std::map<std::string, std::vector<double>>> by_class, by_source;
  for (const auto& e : evals) {
    if (e.score < 1 || e.score > 5) throw InputError("pair evaluation score outside 1..5");
    if (!e.from_model() && e.source == e.evaluator) {
      throw InputError("annotator '" + e.evaluator + "' evaluates their own rating on statement '" + e.statement_id +
                       "'");
    }
    by_class[e.criterion][e.from_model() ? "model" : "humans"].push_back(e.score);
    by_source[e.criterion][e.source].push_back(e.score);
  }

  PairSummary out;
  auto row = [&](const std::string& criterion, const std::string& source, const std::vector<double>& xs) {
    PairSummaryRow r;
    r.criterion = criterion;
    r.source = source;
    r.n = xs.size();
    r.ci = bootstrap_mean(xs, resamples, seed);
    r.mean = r.ci.point;
    return r;
  };
  for (const auto& [criterion, groups] : by_class) {
    for (const auto& [cls, xs] : groups) out.by_class.push_back(row(criterion, cls, xs));
    auto m = groups.find("model");
    auto h = groups.find("humans");
    if (m != groups.end() && h != groups.end()) {
      PairSummaryRow d;
      d.criterion = criterion;
      d.source = "model-humans";
      d.n = m->second.size() + h->second.size();
      d.ci = bootstrap_mean_diff(m->second, h->second, Pairing::kUnpaired, resamples, seed);
      d.mean = d.ci.point;
      out.difference.push_back(d);
    }
  }
  for (const auto& [criterion, groups] : by_source) {
    for (const auto& [source, xs] : groups) out.by_source.push_back(row(criterion, source, xs));
  }
  return out;
}

}  // namespace delibq
