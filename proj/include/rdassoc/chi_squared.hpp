#pragma once

namespace rdassoc {

// Chi-squared tail functions for even degrees of freedom, where the
// distribution reduces to an Erlang law with a finite-series survival
// function. Thresholds in this library are always over 2n degrees of freedom
// (n range-Doppler pairs), so odd orders are rejected.

/// P(X > x) for X ~ chi^2_dof. Throws std::invalid_argument for odd or non-positive dof.
double chi_squared_survival(double x, int dof);

/// P(X <= x).
double chi_squared_cdf(double x, int dof);

/// x such that P(X <= x) = probability, for probability in [0, 1).
double chi_squared_quantile(double probability, int dof);

}  // namespace rdassoc
