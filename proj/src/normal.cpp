#include "splitscreen/normal.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace splitscreen {

namespace {
const boost::math::normal_distribution<double> standard{0.0, 1.0};
}

double normal_pdf(double x) { return boost::math::pdf(standard, x); }

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::sqrt(2.0)); }

double normal_sf(double x) { return 0.5 * boost::math::erfc(x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(standard, p);
}

double z_upper(double alpha) {
  if (alpha <= 0.0) return std::numeric_limits<double>::infinity();
  if (alpha >= 1.0) return -std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::complement(standard, alpha));
}

double binomial_upper_tail(std::size_t n, std::size_t k, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
  // cdf(complement(dist, k-1)) = P(X > k-1) = P(X >= k)
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(k - 1)));
}

double bivariate_normal_upper(double a, double b, double rho) {
  if (rho <= -1.0 || rho >= 1.0) throw std::invalid_argument("correlation must lie in (-1, 1)");
  const double s = std::sqrt(1.0 - rho * rho);
  auto integrand = [&](double x) { return normal_pdf(x) * normal_sf((b - rho * x) / s); };
  const double upper = std::max(a, 0.0) + 40.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, a, upper, 15,
                                                                       1e-14);
}

}  // namespace splitscreen
