#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace delibq {

/// Dense statement x rater score table. Cells may be empty while the matrix
/// is being assembled; reliability and benchmarking require it complete.
class RatingMatrix {
 public:
  RatingMatrix(std::vector<std::string> statements, std::vector<std::string> raters, int options = 5);

  const std::vector<std::string>& statements() const { return statements_; }
  const std::vector<std::string>& raters() const { return raters_; }
  std::size_t num_statements() const { return statements_.size(); }
  std::size_t num_raters() const { return raters_.size(); }
  /// Number of Likert response options, m.
  int options() const { return options_; }

  void set(std::size_t statement, std::size_t rater, int score);
  std::optional<int> get(std::size_t statement, std::size_t rater) const;
  /// Score of a complete cell; throws InputError when the cell is empty.
  int at(std::size_t statement, std::size_t rater) const;

  bool complete() const;
  /// Throws InputError naming the first missing cell.
  void require_complete() const;

  /// Builds a complete matrix from row-major scores.
  static RatingMatrix from_rows(const std::vector<std::vector<int>>& rows, int options = 5);

 private:
  std::vector<std::string> statements_;
  std::vector<std::string> raters_;
  int options_;
  std::vector<std::optional<int>> cells_;
};

struct IrrResult {
  double r_wg_star = 0.0;
  /// Mean over statements of the across-rater sample variance.
  double s_x_squared = 0.0;
  /// Variance of the discrete uniform null, (m^2 - 1) / 12.
  double sigma_eu_squared = 0.0;
};

/// Null variance of an m-option rectangular distribution.
double uniform_null_variance(int options);

/// Within-group agreement r*_wg = 1 - S_x^2 / sigma_eu^2, averaged over
/// statements. Uses the n - 1 variance and does not clamp negative values.
IrrResult rwg_star(const RatingMatrix& matrix);

enum class IrrBand { kLack, kWeak, kModerate, kStrong, kVeryStrong };

std::string_view to_string(IrrBand band);

/// Agreement band after rounding to two decimals:
/// [..,0.31) lack, [0.31,0.51) weak, [0.51,0.71) moderate,
/// [0.71,0.91) strong, [0.91,1] very strong.
IrrBand irr_band(double r);

}  // namespace delibq
