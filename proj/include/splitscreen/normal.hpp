#pragma once

#include <cstddef>

namespace splitscreen {

double normal_pdf(double x);
double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate far into the tail.
double normal_sf(double x);
double normal_quantile(double p);
// Phi^{-1}(1 - alpha).
double z_upper(double alpha);

// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t n, std::size_t k, double p);

// P(X > a, Y > b) for a standard bivariate normal with correlation rho.
double bivariate_normal_upper(double a, double b, double rho);

}  // namespace splitscreen
