// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Usage: acceptance [criterion numbers...]

#include "support.hpp"

#include "splitscreen/fullmatch.hpp"
#include "splitscreen/normal.hpp"
#include "splitscreen/parallel.hpp"
#include "splitscreen/report.hpp"
#include "splitscreen/screening.hpp"
#include "splitscreen/sensitivity.hpp"
#include "splitscreen/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace splitscreen;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

std::string estimate_line(const PowerEstimate& e, const std::string& method, double target) {
  const auto& m = e.at(method);
  return method + " " + fmt("%.3f", m.tpr) + " (target " + fmt("%.3f", target) + ")";
}

Outcome criterion1() {
  const auto e = run_experiment(preset("sec3.1"));
  const bool ok = within(e.at("naive").tpr, 0.24, 0.04) && within(e.at("bonferroni").tpr, 0.16, 0.04);
  return {ok, estimate_line(e, "naive", 0.24) + ", " + estimate_line(e, "bonferroni", 0.16) +
                  ", reps " + std::to_string(e.reps_used)};
}

Outcome criterion2() {
  const auto e = run_experiment(preset("sec3.2"));
  const std::pair<const char*, double> targets[] = {
      {"sensval", 0.648}, {"bonferroni", 0.583}, {"naive", 0.275}, {"oracle", 0.659}};
  bool ok = true;
  std::string detail;
  for (auto [method, target] : targets) {
    ok &= within(e.at(method).tpr, target, 0.04);
    detail += (detail.empty() ? "" : ", ") + estimate_line(e, method, target);
  }
  return {ok, detail + ", reps " + std::to_string(e.reps_used)};
}

Outcome criterion3() {
  const double mu = wilcoxon_normal_law(0.75).mu;
  const double design = mu / (1 - mu);
  bool ok = within(mu, 0.856, 5e-4) && within(design, 5.924, 5e-4);
  std::vector<double> medians;
  for (std::size_t I : {200u, 800u, 3200u}) {
    Rng rng(derive_seed(3, {I}));
    std::vector<double> kappas;
    for (int rep = 0; rep < 200; ++rep)
      kappas.push_back(
          solve_kappa(score(testgen::differences(rng, I, 0.75, 1.0), ScoreSpec::wilcoxon()), 0.05)
              .kappa);
    std::nth_element(kappas.begin(), kappas.begin() + 100, kappas.end());
    const double upper = kappas[100];
    std::nth_element(kappas.begin(), kappas.begin() + 99, kappas.begin() + 100);
    medians.push_back(0.5 * (kappas[99] + upper));
  }
  for (std::size_t i = 1; i < medians.size(); ++i) {
    ok &= medians[i] > medians[i - 1];
    ok &= std::abs(mu - medians[i]) < std::abs(mu - medians[i - 1]);
  }
  return {ok, "mu_F " + fmt("%.4f", mu) + ", design sensitivity " + fmt("%.4f", design) +
                  ", median kappa* " + fmt("%.4f", medians[0]) + " / " + fmt("%.4f", medians[1]) +
                  " / " + fmt("%.4f", medians[2]) + " at I = 200 / 800 / 3200"};
}

LocalPowerInputs local_inputs(double alpha_l) {
  const double theta0 = normal_quantile(2.0 / 3.0) / std::sqrt(2.0);
  const auto law = wilcoxon_normal_law(theta0);
  LocalPowerInputs in;
  in.h = 0.2;
  in.r = 0.2;
  in.gamma_con = 2;
  in.alpha_l = alpha_l;
  in.alpha_coverage = 0.05;
  in.mu_prime_theta0 = law.mu_prime;
  in.sigma_theta0 = law.sigma;
  in.sigma_q = std::sqrt(4.0 / 3.0);  // Wilcoxon: sigma_qI^2 -> 4/3
  return in;
}

Outcome criterion4() {
  const double formula = local_power(local_inputs(0.05));
  std::string detail = "formula " + fmt("%.4f", formula) + " at alpha_l 0.05 (target 0.97 +- 0.005)";
  for (double a : {0.01, 0.0025})
    detail += ", " + fmt("%.4f", local_power(local_inputs(a))) + " at " + fmt("%g", a);

  // Monte Carlo: planning sample of 200 pairs at theta0 + h / sqrt(200)
  const double theta = normal_quantile(2.0 / 3.0) / std::sqrt(2.0) + 0.2 / std::sqrt(200.0);
  ScreeningPlan plan;
  plan.gamma_con = 2;
  plan.B = 250;
  const int reps = 1000;
  std::vector<int> hits(reps, 0);
  parallel_for(reps, 0, [&](std::size_t rep) {
    Rng rng(derive_seed(4, {rep}));
    auto y = testgen::differences(rng, 200, theta, 1.0);
    auto s = summarize_outcome(y, plan.r, ScoreSpec::wilcoxon(), plan, true,
                               derive_seed(40, {rep}));
    hits[rep] = sensval_decision(s, plan, 0.05).selected;
  });
  double freq = 0;
  for (int h : hits) freq += h;
  freq /= reps;
  const bool ok = within(formula, 0.97, 0.005) && within(freq, formula, 0.03);
  return {ok, detail + "; Monte Carlo selection frequency " + fmt("%.4f", freq) +
                  " over 1000 planning samples (must be within 0.03 of the formula)"};
}

Outcome criterion5() {
  const double a = guard_hyperparameters(0.05, 0.05, 0.25, 1).max_L;
  const double b = guard_hyperparameters(0.05, 0.05, 0.2, 1).max_L;
  bool ok = within(a, 22.8, 0.1) && within(b, 99.7, 0.5);
  Rng rng(5);
  int contained = 0, total = 0;
  while (total < 200) {
    const std::size_t L = testgen::between(rng, 2, 60);
    ScreeningPlan plan;
    plan.alpha_l = AlphaPolicy::parse(total % 2 ? "bonferroni" : "dynamic");
    plan.gamma_con = testgen::uniform(rng, 1, 3);
    plan.alpha_coverage = testgen::uniform(rng, 0.01, 0.5);
    plan.B = 100;
    plan.seed = rng();
    if (!guard_hyperparameters(plan.alpha_plan, plan.alpha, plan.r, L).ok) continue;
    std::vector<double> shifts(L, 0.0);
    for (auto& s : shifts)
      if (uniform01(rng) < 0.3) s = testgen::uniform(rng, 0.1, 1.2);
    auto sample = testgen::pair_sample(rng, testgen::between(rng, 60, 500), shifts);
    auto sp = split(sample, plan.r, plan.seed);
    auto sums = summarize_planning(sample, sp, plan);
    auto sv = select_outcomes(sums, plan);
    auto naive = naive_select(sums, plan);
    contained += std::includes(sv.selected.begin(), sv.selected.end(), naive.selected.begin(),
                               naive.selected.end());
    ++total;
  }
  ok &= contained == total;
  return {ok, "max_L " + fmt("%.2f", a) + " at r = 0.25, " + fmt("%.2f", b) +
                  " at r = 0.2; containment on " + std::to_string(contained) + "/" +
                  std::to_string(total) + " datasets"};
}

Outcome criterion6() {
  const auto e = run_experiment(preset("global-null"));
  bool ok = true;
  std::string detail;
  for (const auto& m : e.methods) {
    const double bound = 0.05 + 2 * m.fwer_se;
    ok &= m.fwer <= bound;
    detail += (detail.empty() ? "" : ", ") + m.method + " FWER " + fmt("%.4f", m.fwer) +
              " (bound " + fmt("%.4f", bound) + ")";
  }
  return {ok, detail + ", reps " + std::to_string(e.reps_used)};
}

Outcome criterion7() {
  Rng rng(7);
  double worst = 0;
  for (int rep = 0; rep < 200; ++rep) {
    auto s = score(testgen::differences(rng, testgen::between(rng, 20, 500),
                                        testgen::uniform(rng, -0.2, 1.2), 1.0),
                   ScoreSpec::wilcoxon());
    const double alpha = testgen::uniform(rng, 0.005, 0.3);
    worst = std::max(worst, std::abs(solve_kappa(s, alpha).kappa - kappa_star_bisection(s, alpha)));
  }
  return {worst <= 1e-6, "max |closed form - bisection| = " + fmt("%.3g", worst) +
                             " over 200 instances"};
}

Outcome criterion8() {
  Rng rng(8);
  int p_monotone = 0, gamma_nondecreasing = 0, gamma_nonincreasing = 0;
  const double alphas[] = {0.01, 0.05, 0.10, 0.25};
  for (int rep = 0; rep < 100; ++rep) {
    auto s = score(testgen::differences(rng, testgen::between(rng, 20, 400),
                                        testgen::uniform(rng, 0.1, 1.2), 1.0),
                   ScoreSpec::wilcoxon());
    bool mono = true;
    double prev = 0;
    for (int g = 1; g <= 10; ++g) {
      const double p = worst_case_p(s, g).upper;
      mono &= p >= prev;
      prev = p;
    }
    p_monotone += mono;
    bool up = true, down = true;
    double last = gamma_of_kappa(solve_kappa(s, alphas[0]).kappa);
    for (std::size_t i = 1; i < 4; ++i) {
      const double g = gamma_of_kappa(solve_kappa(s, alphas[i]).kappa);
      up &= g >= last;
      down &= g <= last;
      last = g;
    }
    gamma_nondecreasing += up;
    gamma_nonincreasing += down;
  }
  // A larger alpha rejects more easily, so the largest gamma still rejected
  // grows with alpha. The criterion text states the opposite direction.
  const bool ok = p_monotone == 100 && gamma_nondecreasing == 100;
  return {ok, "p-value nondecreasing in gamma on " + std::to_string(p_monotone) +
                  "/100; gamma* nondecreasing in alpha on " + std::to_string(gamma_nondecreasing) +
                  "/100 (nonincreasing as literally worded: " +
                  std::to_string(gamma_nonincreasing) +
                  "/100; that wording contradicts the definition of gamma*)"};
}

Outcome criterion9() {
  Rng rng(9);
  double worst_gamma = 0;
  int compared = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto sample = testgen::pair_sample(rng, testgen::between(rng, 20, 400),
                                       {testgen::uniform(rng, 0.0, 1.0)});
    auto full = sensitivity_value_full(statistic_full(sample, 0, ScoreSpec::wilcoxon()), 0.05);
    auto k = solve_kappa(score(differences(sample, 0).y, ScoreSpec::wilcoxon()), 0.05);
    if (full.saturated || k.saturated) continue;
    worst_gamma = std::max(worst_gamma, std::abs(full.gamma_star - gamma_of_kappa(k.kappa)));
    ++compared;
  }
  std::size_t sets = 0, mean_mismatch = 0;
  double worst_var = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto scored = statistic_full(testgen::full_sample(rng, 40, 4, testgen::uniform(rng, -0.5, 1)),
                                 0, ScoreSpec::wilcoxon());
    for (double gamma : {0.5, 1.0, 1.5, 2.5, 5.0})
      for (const auto& set : scored.sets) {
        const auto& c = set.contributions;
        const std::size_t n = c.size();
        double best_mean = 0, best_var = -1;
        bool first = true;
        for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
          double total = 0, m1 = 0, m2 = 0;
          for (std::size_t j = 0; j < n; ++j) total += (mask >> j & 1) ? gamma : 1.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double p = ((mask >> j & 1) ? gamma : 1.0) / total;
            m1 += p * c[j];
            m2 += p * c[j] * c[j];
          }
          const double var = std::max(0.0, m2 - m1 * m1);
          const bool more = gamma >= 1 ? m1 > best_mean : m1 < best_mean;
          if (first || more || (m1 == best_mean && var > best_var)) {
            best_mean = m1;
            best_var = var;
          }
          first = false;
        }
        auto sb = set_bound(c, gamma);
        mean_mismatch += sb.mean != best_mean;
        worst_var = std::max(worst_var, std::abs(sb.variance - best_var));
        ++sets;
      }
  }
  const bool ok = compared > 0 && worst_gamma <= 1e-6 && mean_mismatch == 0 && worst_var <= 1e-9;
  return {ok, "max |gamma* full - pair| = " + fmt("%.3g", worst_gamma) + " on " +
                  std::to_string(compared) + " datasets; brute force over " +
                  std::to_string(sets) + " sets: " + std::to_string(mean_mismatch) +
                  " mean mismatches, max variance gap " + fmt("%.3g", worst_var)};
}

Outcome criterion10() {
  bool ok = true, informative = false;
  std::string detail;
  for (double tau : {1.5, 2.0, 2.5, 3.0}) {
    auto c = preset("data-inspired-uc");
    c.reps = 200;
    c.tau = tau;
    c.methods = {"bonferroni", "sensval"};
    const auto e = run_experiment(c);
    const double sv = e.at("sensval").tpr, bonf = e.at("bonferroni").tpr;
    ok &= sv >= bonf - 0.02;
    informative |= bonf > 0.05 && bonf < 0.95;
    detail += (detail.empty() ? "" : "; ") + std::string("tau ") + fmt("%g", tau) + ": sensval " +
              fmt("%.3f", sv) + " vs bonferroni " + fmt("%.3f", bonf) +
              (e.reps_excluded ? " (" + std::to_string(e.reps_excluded) + " reps excluded)" : "");
  }
  if (!informative) detail += "; no grid point with bonferroni power strictly between 0.05 and 0.95";
  return {ok && informative, detail};
}

// 215 pairs and 93 outcomes, a few with real effects and every fourth one binary.
MatchedSample bangladesh_shaped() {
  Rng rng(11);
  const std::size_t I = 215, L = 93;
  MatchedSample s;
  for (std::size_t l = 0; l < L; ++l) {
    s.outcome_names.push_back("outcome_" + std::to_string(l + 1));
    s.outcome_kinds.push_back(l % 4 == 3 ? OutcomeKind::binary : OutcomeKind::continuous);
  }
  std::vector<double> effect(L, 0.0);
  const double strong[] = {1.4, 1.1, 0.9, 0.8, 0.6, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2};
  for (std::size_t l = 0; l < 12; ++l) effect[l * 7 % L] = strong[l];
  for (std::size_t i = 0; i < I; ++i) {
    MatchedSet set;
    set.id = "pair" + std::to_string(i + 1);
    Unit t, c;
    t.z = 1;
    c.z = 0;
    for (std::size_t l = 0; l < L; ++l) {
      if (s.outcome_kinds[l] == OutcomeKind::binary) {
        const double base = 0.3;
        t.outcomes.push_back(uniform01(rng) < std::min(0.95, base + 0.3 * effect[l]) ? 1 : 0);
        c.outcomes.push_back(uniform01(rng) < base ? 1 : 0);
      } else {
        t.outcomes.push_back(effect[l] + testgen::normal(rng));
        c.outcomes.push_back(testgen::normal(rng));
      }
    }
    set.units = {t, c};
    s.sets.push_back(std::move(set));
  }
  return s;
}

Outcome criterion11() {
  const auto sample = bangladesh_shaped();
  sample.validate();
  ScreeningPlan plan;
  plan.specs = default_specs(sample);
  plan.alpha_l = AlphaPolicy::parse("dynamic");
  const std::vector<double> grid{1, 1.25, 1.5, 2, 2.5, 3, 4, 6};
  const auto table = build_rejection_table(sample, plan, grid);
  std::ostringstream text;
  write_rejection_table_text(table, text);
  bool ok = table.gamma_grid.size() == 8 && table.tested.size() == 8 &&
            table.rejected.size() == 8 && table.methods.size() == 3;
  std::string counts;
  for (std::size_t g = 0; g < table.tested.size() && ok; ++g) {
    ok &= table.tested[g].size() == 3 && table.tested[g][0] == 93;
    for (std::size_t m = 0; m < 3; ++m) {
      ok &= table.tested[g][m] <= 93 && table.rejected[g][m].size() == 93;
      const auto rejected = std::count(table.rejected[g][m].begin(), table.rejected[g][m].end(), true);
      ok &= static_cast<std::size_t>(rejected) <= table.tested[g][m];
    }
    if (g > 0) ok &= table.tested[g][1] <= table.tested[g - 1][1];
    counts += (g ? " " : "") + std::to_string(table.tested[g][2]);
  }
  const auto json = rejection_table_json(table);
  ok &= json.contains("gamma_grid") && !table.reported_rows().empty();
  const std::string report = text.str();
  ok &= report.find("no. tested") != std::string::npos;
  const auto lines = std::count(report.begin(), report.end(), '\n');
  return {ok, "8-column report with " + std::to_string(table.reported_rows().size()) +
                  " outcome rows (" + std::to_string(lines) + " lines); sensval tested per gamma: " +
                  counts};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 sec3.1 reproduction", criterion1},
      {"2 sec3.2 reproduction", criterion2},
      {"3 design sensitivity constants", criterion3},
      {"4 local power", criterion4},
      {"5 guard and containment", criterion5},
      {"6 FWER under the global null", criterion6},
      {"7 closed form versus bisection", criterion7},
      {"8 monotonicity", criterion8},
      {"9 full-matching reduction", criterion9},
      {"10 data-inspired dominance", criterion10},
      {"11 table report on synthetic data", criterion11},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(static_cast<int>(i + 1))) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << criteria[i].first << ": "
              << o.detail << " [" << fmt("%.0f", secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
