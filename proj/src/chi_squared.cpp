#include "rdassoc/chi_squared.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rdassoc {

namespace {

void check_dof(int dof) {
  if (dof <= 0 || dof % 2 != 0) {
    throw std::invalid_argument("chi-squared helpers support positive even degrees of freedom only");
  }
}

}  // namespace

double chi_squared_survival(double x, int dof) {
  check_dof(dof);
  if (!(x > 0.0)) return 1.0;
  const double half = x / 2.0;
  // e^{-x/2} * sum_{k < dof/2} (x/2)^k / k!, accumulated in log space for large x.
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < dof / 2; ++k) {
    term *= half / k;
    sum += term;
  }
  return std::exp(std::log(sum) - half);
}

double chi_squared_cdf(double x, int dof) { return 1.0 - chi_squared_survival(x, dof); }

double chi_squared_quantile(double probability, int dof) {
  check_dof(dof);
  if (!(probability >= 0.0) || !(probability < 1.0)) {
    throw std::invalid_argument("quantile probability must lie in [0, 1)");
  }
  if (probability == 0.0) return 0.0;
  const double tail = 1.0 - probability;

  double lo = 0.0;
  double hi = static_cast<double>(dof);
  while (chi_squared_survival(hi, dof) > tail) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (chi_squared_survival(mid, dof) > tail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace rdassoc
