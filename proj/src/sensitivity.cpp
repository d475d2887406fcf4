#include "splitscreen/sensitivity.hpp"

#include "splitscreen/errors.hpp"
#include "splitscreen/normal.hpp"
#include "splitscreen/rng.hpp"

#include <algorithm>
#include <cmath>

namespace splitscreen {

namespace {

double upper_tail(const ScoredSample& s, double kappa, double T, std::size_t n_pos, bool exact) {
  if (exact) return binomial_upper_tail(s.I, n_pos, kappa);
  const double sd = std::sqrt(kappa * (1.0 - kappa) * s.scaled_variance());
  return normal_sf((T - kappa) / sd);
}

void check_exact(const ScoredSample& s, bool exact) {
  if (!exact) return;
  double first = 0;
  for (double q : s.q) {
    if (q <= 0) continue;
    if (first == 0) first = q;
    if (q != first) throw UnsupportedExactError("exact tails need equal scores (sign or mcnemar)");
  }
}

}  // namespace

PValues worst_case_p(const ScoredSample& s, double gamma, bool exact) {
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  if (!(s.sum_q > 0)) throw EmptyOutcomeError("all scores are zero");
  check_exact(s, exact);
  PValues p;
  p.exact = exact;
  p.upper = upper_tail(s, kappa_of_gamma(gamma), s.T, s.n_positive, exact);
  p.lower = upper_tail(s, kappa_of_gamma(1.0 / gamma), s.T, s.n_positive, exact);
  return p;
}

double two_sided_p(const ScoredSample& s, double gamma, bool exact) {
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  check_exact(s, exact);
  const double kappa = kappa_of_gamma(gamma);
  double up = upper_tail(s, kappa, s.T, s.n_positive, exact);
  double down = upper_tail(s, kappa, 1.0 - s.T, s.I - s.n_positive, exact);
  return std::min(1.0, 2.0 * std::min(up, down));
}

KappaSolution solve_kappa(double T, double scaled_variance, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  const double z = z_upper(alpha);
  const double c = z * z * scaled_variance;
  double kappa;
  if (z == 0) {
    kappa = T;
  } else {
    const double disc = std::sqrt(c * (c + 4.0 * T * (1.0 - T)));
    kappa = z > 0 ? (2.0 * T + c - disc) / (2.0 * (1.0 + c))
                  : (2.0 * T + c + disc) / (2.0 * (1.0 + c));
  }
  KappaSolution out{kappa, false};
  if (!(kappa > kKappaFloor)) out = {kKappaFloor, true};
  if (!(kappa < 1.0 - kKappaFloor)) out = {1.0 - kKappaFloor, true};
  return out;
}

double kappa_star_bisection(const ScoredSample& s, double alpha, double tol) {
  double lo = kKappaFloor, hi = 1.0 - kKappaFloor;
  auto p_at = [&](double kappa) { return worst_case_p(s, gamma_of_kappa(kappa)).upper; };
  if (p_at(lo) >= alpha) return lo;
  if (p_at(hi) < alpha) return hi;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (p_at(mid) >= alpha)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

SensitivityResult sensitivity_value(const ScoredSample& s, double alpha, double gamma,
                                    bool exact) {
  SensitivityResult r;
  r.gamma = gamma;
  auto p = worst_case_p(s, gamma, exact);
  r.p_upper = p.upper;
  r.p_lower = p.lower;
  r.used_exact_tail = exact;
  auto k = solve_kappa(s, alpha);
  r.kappa_star = k.kappa;
  r.gamma_star = gamma_of_kappa(k.kappa);
  r.saturated = k.saturated;
  return r;
}

BootstrapEstimate bootstrap_sigma(std::span<const double> y_plan, const ScoreSpec& spec,
                                  double alpha_plan, std::size_t B, std::uint64_t seed) {
  if (B < 2) throw ConfigError("bootstrap needs at least two replicates");
  const std::size_t n = y_plan.size();
  if (n == 0) throw EmptyOutcomeError("no planning differences to bootstrap");
  BootstrapEstimate est;
  est.B = B;
  est.seed = seed;
  est.kappas.resize(B);
  std::vector<double> draw(n);
  for (std::size_t b = 0; b < B; ++b) {
    Rng rng = make_rng(seed, {b});
    for (int attempt = 0;; ++attempt) {
      if (attempt == kBootstrapRetryCap)
        throw NumericalError("bootstrap resamples kept coming out all zero");
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        draw[i] = y_plan[uniform_index(rng, n)];
        any = any || draw[i] != 0.0;
      }
      if (any) break;
    }
    est.kappas[b] = solve_kappa(score(draw, spec), alpha_plan).kappa;
  }
  double mean = 0;
  for (double k : est.kappas) mean += k;
  mean /= static_cast<double>(B);
  double ss = 0;
  for (double k : est.kappas) ss += (k - mean) * (k - mean);
  est.mean_kappa = mean;
  est.sigma_F_hat = std::sqrt(static_cast<double>(n) * ss / static_cast<double>(B - 1));
  return est;
}

EdgeworthDiagnostics edgeworth_diagnostics(const ScoredSample& s, double alpha, double sigma_F,
                                           double center) {
  if (!(sigma_F > 0)) throw ConfigError("sigma_F must be positive");
  const double z = z_upper(alpha);
  const double kappa = solve_kappa(s, alpha).kappa;
  const double n = static_cast<double>(s.I);
  EdgeworthDiagnostics d;
  d.V = std::sqrt(n) * (kappa - center) / sigma_F +
        z * std::sqrt(s.sigma_qI_sq) * std::sqrt(kappa * (1.0 - kappa)) / sigma_F;
  d.c1 = s.c_qI * (z * z - 1.0) / 6.0 / sigma_F;
  return d;
}

}  // namespace splitscreen
