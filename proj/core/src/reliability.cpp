#include "delibq/reliability.hpp"

#include <cmath>

#include "delibq/error.hpp"

namespace delibq {

RatingMatrix::RatingMatrix(std::vector<std::string> statements, std::vector<std::string> raters, int options)
    : statements_(std::move(statements)), raters_(std::move(raters)), options_(options) {
  if (options_ < 2) throw InputError("a Likert scale needs at least two options");
  cells_.assign(statements_.size() * raters_.size(), std::nullopt);
}

void RatingMatrix::set(std::size_t statement, std::size_t rater, int score) {
  if (statement >= statements_.size() || rater >= raters_.size()) throw InvariantError("rating matrix index out of range");
  if (score < 1 || score > options_) {
    throw InputError("score " + std::to_string(score) + " outside 1.." + std::to_string(options_) + " for statement '" +
                     statements_[statement] + "'");
  }
  cells_[statement * raters_.size() + rater] = score;
}

std::optional<int> RatingMatrix::get(std::size_t statement, std::size_t rater) const {
  return cells_.at(statement * raters_.size() + rater);
}

int RatingMatrix::at(std::size_t statement, std::size_t rater) const {
  auto v = get(statement, rater);
  if (!v) {
    throw InputError("missing score for statement '" + statements_[statement] + "', rater '" + raters_[rater] + "'");
  }
  return *v;
}

bool RatingMatrix::complete() const {
  for (const auto& c : cells_) {
    if (!c) return false;
  }
  return true;
}

void RatingMatrix::require_complete() const {
  for (std::size_t s = 0; s < statements_.size(); ++s) {
    for (std::size_t r = 0; r < raters_.size(); ++r) (void)at(s, r);
  }
}

RatingMatrix RatingMatrix::from_rows(const std::vector<std::vector<int>>& rows, int options) {
  const std::size_t n_raters = rows.empty() ? 0 : rows.front().size();
  std::vector<std::string> statements, raters;
  for (std::size_t s = 0; s < rows.size(); ++s) statements.push_back("s" + std::to_string(s + 1));
  for (std::size_t r = 0; r < n_raters; ++r) raters.push_back("h" + std::to_string(r + 1));
  RatingMatrix m(std::move(statements), std::move(raters), options);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].size() != n_raters) throw InputError("ragged rating rows");
    for (std::size_t r = 0; r < n_raters; ++r) m.set(s, r, rows[s][r]);
  }
  return m;
}

double uniform_null_variance(int options) {
  const double m = options;
  return (m * m - 1.0) / 12.0;
}

IrrResult rwg_star(const RatingMatrix& matrix) {
  if (matrix.num_raters() < 2) throw InputError("r*_wg needs at least two raters");
  if (matrix.num_statements() < 1) throw InputError("r*_wg needs at least one statement");
  matrix.require_complete();

  const std::size_t k = matrix.num_raters();
  double variance_sum = 0.0;
  for (std::size_t s = 0; s < matrix.num_statements(); ++s) {
    // Integer sums keep the per-statement variance exact up to one division.
    long long sum = 0, sum_sq = 0;
    for (std::size_t r = 0; r < k; ++r) {
      const long long v = matrix.at(s, r);
      sum += v;
      sum_sq += v * v;
    }
    const long long n = static_cast<long long>(k);
    variance_sum += static_cast<double>(n * sum_sq - sum * sum) / static_cast<double>(n * (n - 1));
  }

  IrrResult out;
  out.s_x_squared = variance_sum / static_cast<double>(matrix.num_statements());
  out.sigma_eu_squared = uniform_null_variance(matrix.options());
  out.r_wg_star = 1.0 - out.s_x_squared / out.sigma_eu_squared;
  return out;
}

std::string_view to_string(IrrBand band) {
  switch (band) {
    case IrrBand::kLack: return "lack";
    case IrrBand::kWeak: return "weak";
    case IrrBand::kModerate: return "moderate";
    case IrrBand::kStrong: return "strong";
    case IrrBand::kVeryStrong: return "very-strong";
  }
  return "lack";
}

IrrBand irr_band(double r) {
  const long long hundredths = std::llround(r * 100.0);
  if (hundredths < 31) return IrrBand::kLack;
  if (hundredths < 51) return IrrBand::kWeak;
  if (hundredths < 71) return IrrBand::kModerate;
  if (hundredths < 91) return IrrBand::kStrong;
  return IrrBand::kVeryStrong;
}

}  // namespace delibq
