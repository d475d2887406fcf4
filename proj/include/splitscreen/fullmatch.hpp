#pragma once

#include "splitscreen/matched_data.hpp"
#include "splitscreen/score_stats.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splitscreen {

// One matched set after scoring. Unordered unit pairs {j, k} inside a set are
// scored jointly across all sets; contributions[j] is the signed-score total
// the set would produce if unit j were the lone treated (or lone control) unit,
// and denominators[j] the matching score total.
struct FullMatchSet {
  std::vector<double> contributions;
  std::vector<double> denominators;
  std::size_t lone = 0;
  std::vector<double> q;  // scores of the observed lone-versus-like comparisons
  std::vector<int> sgn;
};

struct FullMatchScored {
  std::vector<FullMatchSet> sets;
  std::vector<std::size_t> set_ids;
  double numerator = 0.0;
  double D = 0.0;  // sum of observed comparison scores
  double T_g = 0.0;
  std::size_t dropped_sets = 0;
  std::size_t dropped_units = 0;

  std::size_t I() const { return sets.size(); }
};

FullMatchScored statistic_full(const MatchedSample& sample, std::size_t outcome,
                               const ScoreSpec& spec, std::span<const std::size_t> ids,
                               int direction = 1);
inline FullMatchScored statistic_full(const MatchedSample& sample, std::size_t outcome,
                                      const ScoreSpec& spec) {
  auto ids = all_ids(sample);
  return statistic_full(sample, outcome, spec, ids);
}

struct SetBound {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t top_k = 0;
};

// Worst-case moments of one set's contribution: weight gamma on the k largest
// contributions, k chosen to maximize the mean (minimize for gamma < 1), ties
// broken by the larger variance.
SetBound set_bound(std::span<const double> contributions, double gamma);

struct SeparableBounds {
  double a_gamma = 0.0;
  double b_gamma = 0.0;  // b^2 / I = sum of set variances / D^2
  double mean_total = 0.0;
  double variance_total = 0.0;
};

SeparableBounds separable_bounds(const FullMatchScored& scored, double gamma);

double worst_case_p_full(const FullMatchScored& scored, double gamma);

inline constexpr double kGammaMin = 1e-3;
inline constexpr double kGammaMax = 1e3;

struct FullSensitivity {
  double gamma_star = 1.0;
  bool saturated = false;
};

FullSensitivity sensitivity_value_full(const FullMatchScored& scored, double alpha);

// Bootstrap of planning sets for the full-matching screen.
enum class FullScale { gamma, kappa };
enum class FullBias { bootstrap, analytic };

struct FullPlanningEstimate {
  double value = 1.0;  // Gamma* (or kappa*) on the planning sets
  double sigma_F_hat = 0.0;
  double bias = 0.0;   // the mu-hat term
  double boot_mean = 0.0;
  std::vector<double> boots;
  bool saturated = false;
};

FullPlanningEstimate full_planning_estimate(const MatchedSample& sample, std::size_t outcome,
                                            const ScoreSpec& spec,
                                            std::span<const std::size_t> planning_ids,
                                            int direction, double alpha_plan, std::size_t B,
                                            std::uint64_t seed, FullScale scale, FullBias bias);

}  // namespace splitscreen
