#pragma once

#include "splitscreen/matched_data.hpp"
#include "splitscreen/rng.hpp"
#include "splitscreen/score_stats.hpp"
#include "splitscreen/screening.hpp"

#include <json.hpp>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace splitscreen {

enum class Assignment { randomized, confounded };
enum class Matching { paired_directly, propensity_caliper };
enum class NoiseLaw { normal, logistic, t4 };
enum class TreatedCount { complete, bernoulli };
enum class DirectionPolicy { planning, known_positive };

struct SimConfig {
  std::string name = "custom";
  std::size_t N = 1000;
  std::size_t L = 500;
  std::vector<std::size_t> signals{0, 1, 2, 3, 4};  // 0-based outcome indices
  double tau = 1.0;
  std::vector<double> outcome_tau;  // optional per-outcome effect, overrides tau/signals
  std::size_t d = 20;

  Assignment assignment = Assignment::randomized;
  double treat_prob = 0.5;
  TreatedCount treated_count = TreatedCount::bernoulli;
  double gamma_data = 1.0;
  bool gamma_data_tracks_con = false;  // UC designs: gamma_data = gamma_con
  bool beta_proportion = true;         // treated share ~ Beta(10,10), else fixed_proportion
  double fixed_proportion = 0.71;

  Matching matching = Matching::paired_directly;
  double caliper = 0.2;

  NoiseLaw noise = NoiseLaw::normal;
  double noise_scale = 1.0;

  // Sub-populations: pairs are assigned to group k with probability subpop_props[k];
  // subpop_tau[l][k] is the effect for outcome l in group k.
  std::vector<double> subpop_props;
  std::vector<std::vector<double>> subpop_tau;

  double r = 0.2;
  std::vector<std::string> methods{"bonferroni", "naive", "sensval", "oracle"};
  double gamma_con = 1.0;
  double alpha = 0.05;
  double alpha_plan = 0.05;
  double alpha_coverage = 0.05;
  AlphaPolicy alpha_l = AlphaPolicy::parse("bonferroni");
  std::size_t B = 250;
  ScoreSpec spec = ScoreSpec::wilcoxon();
  DirectionPolicy direction = DirectionPolicy::known_positive;
  bool bonferroni_two_sided = false;

  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;

  double effect(std::size_t outcome) const;
  std::vector<std::size_t> signal_outcomes() const;
  void validate() const;
  nlohmann::json to_json() const;
  // Overrides fields present in j; unknown keys are an error.
  void apply_json(const nlohmann::json& j);
  // key=value assignment used by sweeps and the CLI.
  void set(const std::string& key, const std::string& value);
};

// Subjects drawn by the confounded generator, before matching.
struct Subjects {
  std::size_t N = 0, d = 0, L = 0;
  std::vector<double> X;         // N x d, row major
  std::vector<double> U;         // N
  std::vector<int> Z;            // N
  std::vector<double> outcomes;  // N x L observed outcomes
  double alpha0 = 0.0;
  double target_proportion = 0.5;
};

double draw_noise(NoiseLaw law, double scale, Rng& rng, NormalSampler& normal);

MatchedSample gen_randomized(const SimConfig& config, std::uint64_t rep_seed);
Subjects gen_confounded(const SimConfig& config, std::uint64_t rep_seed);

// Bisection on alpha0 so the mean assignment probability hits target within 1e-4.
// score[i] = x_i' mu and u as drawn.
double calibrate_alpha0(double target_prop, const std::vector<double>& linear_score,
                        const std::vector<double>& u, double gamma_data);

struct LogisticFit {
  std::vector<double> coef;  // intercept first
  int iterations = 0;
  bool converged = false;
};
LogisticFit fit_logistic(const std::vector<double>& X, std::size_t N, std::size_t d,
                         const std::vector<int>& Z);

// Greedy nearest-neighbour pair matching on the fitted logit, treated units
// taken in descending logit order, caliper = caliper_sd_mult * SD(logit).
MatchedSample propensity_match(const Subjects& subjects, double caliper_sd_mult,
                               std::vector<std::string> names = {});

// Expands each outcome into one outcome per sub-population (values outside the
// group become missing). group[i] is the group of set i.
MatchedSample expand_subpopulations(const MatchedSample& sample, const std::vector<int>& group,
                                    std::size_t K);

struct ReplicateResult {
  bool ok = true;
  std::string error;
  // per method
  std::vector<double> tpr;
  std::vector<int> false_rejection;
  std::vector<std::size_t> selected;
  std::vector<int> iterations;
  std::vector<std::vector<bool>> outcome_rejected;
};

ReplicateResult run_replicate(const SimConfig& config, std::size_t rep);

struct MethodEstimate {
  std::string method;
  double tpr = 0.0;
  double tpr_se = 0.0;
  double fwer = 0.0;
  double fwer_se = 0.0;
  double mean_selected = 0.0;
  std::size_t reps = 0;
  std::vector<double> outcome_rejection_rate;
};

struct PowerEstimate {
  std::string config_name;
  std::vector<MethodEstimate> methods;
  std::size_t reps_requested = 0;
  std::size_t reps_used = 0;
  std::size_t reps_excluded = 0;
  std::vector<std::string> errors;
  bool se_degenerate = false;  // one replicate: standard errors are zero

  const MethodEstimate& at(const std::string& method) const;
};

PowerEstimate run_experiment(const SimConfig& config);

struct SweepPoint {
  std::string key;
  std::string value;
  PowerEstimate estimate;
};

// "key=v1,v2,..." grid over one configuration field.
std::vector<SweepPoint> run_sweep(const SimConfig& config, const std::string& sweep);

void write_power_csv_header(std::ostream& out);
void write_power_csv(const PowerEstimate& est, std::ostream& out, const std::string& key = "",
                     const std::string& value = "");

// Named experiment configurations.
SimConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace splitscreen
