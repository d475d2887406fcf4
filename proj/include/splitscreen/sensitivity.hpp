#pragma once

#include "splitscreen/score_stats.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splitscreen {

// Clamp applied to kappa when the sensitivity value has no interior root.
inline constexpr double kKappaFloor = 1e-12;

struct PValues {
  double upper = 1.0;
  double lower = 1.0;
  bool exact = false;
};

// Worst-case one-sided p-values at gamma. exact=true uses binomial tails and
// is only defined for equal-score statistics (sign, mcnemar).
PValues worst_case_p(const ScoredSample& s, double gamma, bool exact = false);

// min(1, 2 min(upper p for y, upper p for -y)), for two-sided testing.
double two_sided_p(const ScoredSample& s, double gamma, bool exact = false);

inline double kappa_of_gamma(double gamma) { return gamma / (1.0 + gamma); }
inline double gamma_of_kappa(double kappa) { return kappa / (1.0 - kappa); }

struct KappaSolution {
  double kappa = 0.5;
  bool saturated = false;
};

// Closed-form root of T = kappa + z_alpha sqrt(kappa (1 - kappa)) sigma_q / sqrt(I).
KappaSolution solve_kappa(double T, double scaled_variance, double alpha);
inline KappaSolution solve_kappa(const ScoredSample& s, double alpha) {
  return solve_kappa(s.T, s.scaled_variance(), alpha);
}

// Reference root of upper p(kappa) = alpha by bisection on worst_case_p.
double kappa_star_bisection(const ScoredSample& s, double alpha, double tol = 1e-13);

struct SensitivityResult {
  double gamma = 1.0;
  double p_upper = 1.0;
  double p_lower = 1.0;
  double kappa_star = 0.5;
  double gamma_star = 1.0;
  bool used_exact_tail = false;
  bool saturated = false;
};

SensitivityResult sensitivity_value(const ScoredSample& s, double alpha, double gamma = 1.0,
                                    bool exact = false);

struct BootstrapEstimate {
  double sigma_F_hat = 0.0;
  double mean_kappa = 0.0;
  std::size_t B = 0;
  std::vector<double> kappas;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultBootstrap = 250;
inline constexpr int kBootstrapRetryCap = 100;

// Pair-level bootstrap of the transformed sensitivity value at alpha_plan.
// sigma_F_hat^2 = I_plan * sample variance of the replicate kappas.
BootstrapEstimate bootstrap_sigma(std::span<const double> y_plan, const ScoreSpec& spec,
                                  double alpha_plan, std::size_t B, std::uint64_t seed);

struct EdgeworthDiagnostics {
  double V = 0.0;
  double c1 = 0.0;
};

// V = sqrt(I)(kappa* - center)/sigma_F + z sigma_q sqrt(kappa*(1 - kappa*))/sigma_F and
// c1 = c_qI (z^2 - 1) / (6 sigma_F).
EdgeworthDiagnostics edgeworth_diagnostics(const ScoredSample& s, double alpha, double sigma_F,
                                           double center);

}  // namespace splitscreen
