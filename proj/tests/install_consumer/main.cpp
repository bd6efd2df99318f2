#include <iostream>

#include "delibq/reliability.hpp"

int main() {
  const auto m = delibq::RatingMatrix::from_rows({{3, 3, 4}, {5, 4, 5}});
  std::cout << delibq::rwg_star(m).r_wg_star << "\n";
  return delibq::uniform_null_variance(5) == 2.0 ? 0 : 1;
}
