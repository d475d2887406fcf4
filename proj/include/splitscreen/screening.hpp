#pragma once

#include "splitscreen/fullmatch.hpp"
#include "splitscreen/matched_data.hpp"
#include "splitscreen/score_stats.hpp"
#include "splitscreen/sensitivity.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace splitscreen {

enum class Method { naive, sensval, approx, sensval_full };

Method parse_method(const std::string& text);
std::string to_string(Method m);

struct AlphaPolicy {
  enum class Kind { bonferroni, dynamic, fixed };
  Kind kind = Kind::dynamic;
  std::vector<double> fixed;  // one value (broadcast) or one per outcome

  // "bonferroni", "dynamic", "fixed:a1,a2,..."
  static AlphaPolicy parse(const std::string& text);
  std::string to_string() const;
};

struct ScreeningPlan {
  double gamma_con = 1.0;
  double alpha = 0.05;
  double alpha_plan = 0.05;
  double alpha_coverage = 0.05;
  AlphaPolicy alpha_l;
  double r = 0.2;
  std::size_t B = kDefaultBootstrap;
  Method method = Method::sensval;
  std::vector<ScoreSpec> specs{ScoreSpec::wilcoxon()};  // one entry applies to every outcome
  std::vector<int> directions;  // empty: estimate each outcome's direction on the planning sample
  std::uint64_t seed = 1;
  unsigned threads = 1;
  FullScale full_scale = FullScale::gamma;
  FullBias full_bias = FullBias::bootstrap;

  double kappa_con() const { return kappa_of_gamma(gamma_con); }
  const ScoreSpec& spec(std::size_t outcome) const;
  void validate() const;
};

// Everything selection needs to know about one outcome from the planning sample.
struct PlanningSummary {
  bool usable = false;
  std::string note;
  int direction = 1;
  std::size_t I_plan = 0;
  double I_total = 0.0;  // I_plan / planning fraction: the pair count the inequality uses
  bool full_mode = false;
  double planning_fraction = 0.2;
  double T = 0.0;
  double sigma_qI_sq = 1.0;
  double scaled_variance = 0.0;  // sum q^2 / (sum q)^2
  double kappa_plan = 0.5;
  double p_upper_con = 1.0;
  bool saturated = false;
  bool has_sigma = false;
  double sigma_F_hat = 0.0;
  // full-matching screen
  double full_value = 1.0;
  double full_bias = 0.0;
};

// Summary of one outcome from its direction-adjusted planning differences.
PlanningSummary summarize_outcome(std::span<const double> y_plan, double planning_fraction,
                                  const ScoreSpec& spec, const ScreeningPlan& plan,
                                  bool bootstrap, std::uint64_t boot_seed, int direction = 1);

bool needs_bootstrap(Method m);

std::vector<PlanningSummary> summarize_planning(const MatchedSample& sample,
                                                const SplitHandle& split,
                                                const ScreeningPlan& plan);

std::uint64_t outcome_boot_seed(std::uint64_t seed, std::size_t outcome);

struct Decision {
  bool selected = false;
  double margin = 0.0;  // positive when selected
};

Decision naive_decision(const PlanningSummary& s, const ScreeningPlan& plan);
Decision sensval_decision(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l);
Decision approx_decision(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l);
Decision full_decision(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l);
Decision decide(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l);

// Pieces of the approximate rule.
double approx_center(double mu, double eta);  // f
double approx_slope(double mu, double eta);   // g = f'

struct Selection {
  std::vector<std::size_t> selected;
  std::vector<double> alpha_l;  // level used for selection, per outcome
  std::vector<Decision> decisions;
  int iterations = 1;
  bool converged = true;
  bool cycled = false;
};

Selection select_with_levels(std::span<const PlanningSummary> summaries,
                             const ScreeningPlan& plan, std::span<const double> alpha_l);
Selection naive_select(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan);
Selection sensval_select(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan);
Selection approx_select(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan);
Selection dynamic_alpha(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan);
// Applies plan.method and plan.alpha_l.
Selection select_outcomes(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan);

struct GuardResult {
  double max_r = 0.0;
  double max_L = 0.0;
  bool ok = false;
};

GuardResult guard_hyperparameters(double alpha_plan, double alpha, double r, std::size_t L);
// Same check for explicit per-outcome levels.
double guard_max_r(double alpha_plan, std::span<const double> alpha_l);

// Levels used when testing the selected outcomes; their sum never exceeds alpha.
std::vector<double> analysis_levels(const Selection& sel, const ScreeningPlan& plan,
                                    std::size_t L);

struct OutcomeAudit {
  std::string name;
  bool usable = false;
  std::string note;
  int direction = 1;
  std::size_t I_plan = 0;
  std::size_t I_analysis = 0;
  double kappa_plan = 0.0;
  double sigma_F_hat = 0.0;
  double selection_margin = 0.0;
  double alpha_l = 0.0;
  double analysis_p_upper = 1.0;
  bool selected = false;
  bool rejected = false;
};

struct SelectionReport {
  Method method = Method::sensval;
  double gamma_con = 1.0;
  double alpha = 0.05;
  std::vector<std::size_t> selected;
  std::vector<std::size_t> rejected;
  std::vector<OutcomeAudit> outcomes;
  int iterations = 1;
  bool converged = true;
  std::size_t I_planning = 0;
  std::size_t I_analysis = 0;
};

// Tests the selected outcomes on the analysis sets at their levels.
SelectionReport analyze(const MatchedSample& sample, const SplitHandle& split,
                        const Selection& sel, std::span<const double> levels,
                        std::span<const PlanningSummary> summaries, const ScreeningPlan& plan);

// split -> summarize -> select -> analyze
SelectionReport screen(const MatchedSample& sample, const ScreeningPlan& plan);

// McNemar for binary outcomes, Wilcoxon otherwise.
std::vector<ScoreSpec> default_specs(const MatchedSample& sample);

// Full-sample baseline: two-sided worst-case tests of every outcome at alpha / L.
struct BonferroniResult {
  std::vector<double> p_two_sided;
  std::vector<std::size_t> rejected;
  std::size_t tested = 0;
};
BonferroniResult bonferroni_full(const MatchedSample& sample, const ScreeningPlan& plan);

struct LocalPowerInputs {
  double h = 0.2;
  double r = 0.2;
  double gamma_con = 2.0;
  double alpha_l = 0.05;
  double alpha_coverage = 0.05;
  double mu_prime_theta0 = 0.0;
  double sigma_theta0 = 1.0;
  double sigma_q = 1.0;
};

double local_power(const LocalPowerInputs& in);

// Wilcoxon under Normal(theta, 1) pair differences: mu(theta) = Phi(sqrt(2) theta),
// derivative, and the U-statistic standard deviation 2 sqrt(P(Y1+Y2>0, Y1+Y3>0) - mu^2).
struct WilcoxonNormalLaw {
  double mu = 0.0;
  double mu_prime = 0.0;
  double sigma = 0.0;
};
WilcoxonNormalLaw wilcoxon_normal_law(double theta);

struct ScreeRow {
  double gamma_con = 1.0;
  std::size_t selected = 0;
};

std::vector<ScreeRow> scree(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan,
                            std::span<const double> gamma_grid);
std::vector<ScreeRow> scree(const MatchedSample& sample, const ScreeningPlan& plan,
                            std::span<const double> gamma_grid);

}  // namespace splitscreen
