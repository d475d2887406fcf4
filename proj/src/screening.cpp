#include "splitscreen/screening.hpp"

#include "splitscreen/errors.hpp"
#include "splitscreen/normal.hpp"
#include "splitscreen/parallel.hpp"
#include "splitscreen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace splitscreen {

Method parse_method(const std::string& text) {
  if (text == "naive") return Method::naive;
  if (text == "sensval") return Method::sensval;
  if (text == "approx") return Method::approx;
  if (text == "sensval_full" || text == "sensval-full") return Method::sensval_full;
  throw ConfigError("unknown method '" + text + "' (naive, sensval, approx, sensval_full)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::naive: return "naive";
    case Method::sensval: return "sensval";
    case Method::approx: return "approx";
    case Method::sensval_full: return "sensval_full";
  }
  return "?";
}

AlphaPolicy AlphaPolicy::parse(const std::string& text) {
  AlphaPolicy p;
  if (text == "bonferroni") {
    p.kind = Kind::bonferroni;
  } else if (text == "dynamic") {
    p.kind = Kind::dynamic;
  } else if (text.rfind("fixed:", 0) == 0) {
    p.kind = Kind::fixed;
    std::stringstream ss(text.substr(6));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        p.fixed.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("cannot parse alpha level '" + item + "'");
      }
    }
    if (p.fixed.empty()) throw ConfigError("fixed alpha policy needs at least one level");
    for (double v : p.fixed)
      if (!(v > 0 && v < 1)) throw ConfigError("alpha levels must lie in (0, 1)");
  } else {
    throw ConfigError("unknown alpha policy '" + text + "' (bonferroni, dynamic, fixed:...)");
  }
  return p;
}

std::string AlphaPolicy::to_string() const {
  switch (kind) {
    case Kind::bonferroni: return "bonferroni";
    case Kind::dynamic: return "dynamic";
    case Kind::fixed: {
      std::ostringstream os;
      os << "fixed:";
      for (std::size_t i = 0; i < fixed.size(); ++i) os << (i ? "," : "") << fixed[i];
      return os.str();
    }
  }
  return "?";
}

const ScoreSpec& ScreeningPlan::spec(std::size_t outcome) const {
  if (specs.empty()) throw ConfigError("no score specification");
  return specs.size() == 1 ? specs.front() : specs.at(outcome);
}

void ScreeningPlan::validate() const {
  auto prob = [](double v, const char* name) {
    if (!(v > 0 && v < 1)) throw ConfigError(std::string(name) + " must lie in (0, 1)");
  };
  prob(alpha, "alpha");
  prob(alpha_plan, "alpha-plan");
  prob(alpha_coverage, "alpha-coverage");
  prob(r, "r");
  if (!(gamma_con >= 1.0)) throw ConfigError("gamma must be at least 1");
  if (needs_bootstrap(method) && B < 2) throw ConfigError("bootstrap needs at least two replicates");
  for (const auto& s : specs) s.validate();
  for (int d : directions)
    if (d != 1 && d != -1) throw ConfigError("directions must be +1 or -1");
}

bool needs_bootstrap(Method m) { return m != Method::naive; }

std::uint64_t outcome_boot_seed(std::uint64_t seed, std::size_t outcome) {
  return derive_seed(seed, {0xb0075742ULL, outcome});
}

PlanningSummary summarize_outcome(std::span<const double> y_plan, double planning_fraction,
                                  const ScoreSpec& spec, const ScreeningPlan& plan,
                                  bool bootstrap, std::uint64_t boot_seed, int direction) {
  PlanningSummary s;
  s.direction = direction;
  s.planning_fraction = planning_fraction;
  s.I_plan = y_plan.size();
  s.I_total = static_cast<double>(s.I_plan) / planning_fraction;
  const auto scored = score(y_plan, spec);
  s.T = scored.T;
  s.sigma_qI_sq = scored.sigma_qI_sq;
  s.scaled_variance = scored.scaled_variance();
  const auto k = solve_kappa(scored, plan.alpha_plan);
  s.kappa_plan = k.kappa;
  s.saturated = k.saturated;
  s.p_upper_con = worst_case_p(scored, plan.gamma_con).upper;
  if (bootstrap) {
    s.sigma_F_hat = bootstrap_sigma(y_plan, spec, plan.alpha_plan, plan.B, boot_seed).sigma_F_hat;
    s.has_sigma = true;
  }
  s.usable = true;
  if (s.saturated) s.note = "planning sensitivity value clamped at a boundary";
  return s;
}

namespace {

int full_direction(const MatchedSample& sample, std::size_t outcome,
                   std::span<const std::size_t> ids) {
  double total = 0;
  std::size_t count = 0;
  for (auto i : ids) {
    const auto& set = sample.sets[i];
    const std::size_t lone = set.lone_index();
    const double rl = set.units[lone].outcomes[outcome];
    if (std::isnan(rl)) continue;
    const double sign = set.lone_is_treated() ? 1.0 : -1.0;
    for (std::size_t k = 0; k < set.units.size(); ++k) {
      if (k == lone) continue;
      const double rk = set.units[k].outcomes[outcome];
      if (std::isnan(rk)) continue;
      total += sign * (rl - rk);
      ++count;
    }
  }
  if (count == 0) throw EmptyOutcomeError("no complete planning comparisons");
  return total < 0 ? -1 : 1;
}

PlanningSummary summarize_full(const MatchedSample& sample, std::size_t outcome,
                               const SplitHandle& split, const ScreeningPlan& plan,
                               double fraction) {
  PlanningSummary s;
  s.full_mode = true;
  s.planning_fraction = fraction;
  s.direction = plan.directions.empty() ? full_direction(sample, outcome, split.planning_ids)
                                        : plan.directions.at(outcome);
  const auto& spec = plan.spec(outcome);
  const auto scored = statistic_full(sample, outcome, spec, split.planning_ids, s.direction);
  s.I_plan = scored.I();
  s.I_total = static_cast<double>(s.I_plan) / fraction;
  s.T = scored.T_g;
  const auto sv = sensitivity_value_full(scored, plan.alpha_plan);
  s.kappa_plan = kappa_of_gamma(sv.gamma_star);
  s.saturated = sv.saturated;
  s.p_upper_con = worst_case_p_full(scored, plan.gamma_con);
  if (plan.method == Method::sensval_full) {
    auto est = full_planning_estimate(sample, outcome, spec, split.planning_ids, s.direction,
                                      plan.alpha_plan, plan.B, outcome_boot_seed(plan.seed, outcome),
                                      plan.full_scale, plan.full_bias);
    s.full_value = est.value;
    s.full_bias = est.bias;
    s.sigma_F_hat = est.sigma_F_hat;
    s.has_sigma = true;
  }
  s.usable = true;
  if (s.saturated) s.note = "planning sensitivity value clamped at the search bracket";
  return s;
}

}  // namespace

std::vector<PlanningSummary> summarize_planning(const MatchedSample& sample,
                                                const SplitHandle& split,
                                                const ScreeningPlan& plan) {
  plan.validate();
  const std::size_t L = sample.L();
  if (!plan.directions.empty() && plan.directions.size() != L)
    throw ConfigError("direction list length differs from the outcome count");
  const bool full = sample.mode() == SampleMode::full || plan.method == Method::sensval_full;
  if (full && (plan.method == Method::sensval || plan.method == Method::approx))
    throw ConfigError("full-matching data needs method naive or sensval_full");
  const double fraction = static_cast<double>(split.planning_ids.size()) /
                          static_cast<double>(split.planning_ids.size() + split.analysis_ids.size());
  std::vector<PlanningSummary> out(L);
  parallel_for(L, plan.threads, [&](std::size_t l) {
    try {
      if (full) {
        out[l] = summarize_full(sample, l, split, plan, fraction);
        return;
      }
      auto raw = differences(sample, l, 1, split.planning_ids);
      int dir = plan.directions.empty() ? direction_of(raw.y) : plan.directions[l];
      if (dir < 0)
        for (double& v : raw.y) v = -v;
      out[l] = summarize_outcome(raw.y, fraction, plan.spec(l), plan, needs_bootstrap(plan.method),
                                 outcome_boot_seed(plan.seed, l), dir);
    } catch (const EmptyOutcomeError& e) {
      out[l] = PlanningSummary{};
      out[l].note = e.what();
    }
  });
  return out;
}

Decision naive_decision(const PlanningSummary& s, const ScreeningPlan& plan) {
  if (!s.usable) return {};
  double p = s.p_upper_con;
  if (!s.full_mode) {
    const double k = plan.kappa_con();
    p = normal_sf((s.T - k) / std::sqrt(k * (1 - k) * s.scaled_variance));
  }
  return {p <= plan.alpha, plan.alpha - p};
}

Decision sensval_decision(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l) {
  if (!s.usable) return {};
  if (!s.has_sigma) return naive_decision(s, plan);
  const double r = s.planning_fraction;
  const double I = s.I_total;
  const double k = s.kappa_plan;
  const double lhs = k + std::sqrt(k * (1 - k)) * std::sqrt(s.sigma_qI_sq) / std::sqrt(I) *
                             (z_upper(plan.alpha_plan) / std::sqrt(r) -
                              z_upper(alpha_l) / std::sqrt(1 - r));
  const double rhs =
      plan.kappa_con() - s.sigma_F_hat * z_upper(plan.alpha_coverage) / std::sqrt(I * r * (1 - r));
  return {lhs > rhs, lhs - rhs};
}

double approx_center(double mu, double eta) {
  return mu - ((2 * mu - 1) * eta + std::sqrt(4 * eta * mu * (1 - mu) + eta * eta)) /
                  (2 * (1 + eta));
}

double approx_slope(double mu, double eta) {
  if (eta == 0) return 1.0;
  return (1 + eta * (2 * mu - 1) / std::sqrt(4 * eta * mu * (1 - mu) + eta * eta)) / (1 + eta);
}

Decision approx_decision(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l) {
  if (!s.usable) return {};
  if (!s.has_sigma) return naive_decision(s, plan);
  const double r = s.planning_fraction;
  const double I = s.I_total;
  const double k = s.kappa_plan;
  const double zp = z_upper(plan.alpha_plan), zl = z_upper(alpha_l);
  const double eta_plan = s.sigma_qI_sq * zp * zp / static_cast<double>(s.I_plan);
  const double eta_l = s.sigma_qI_sq * zl * zl / (I * (1 - r));
  const double mu = std::min(1.0, k + std::sqrt(eta_plan * k * (1 - k)));
  const double upper = approx_center(mu, eta_l) + z_upper(plan.alpha_coverage) * s.sigma_F_hat *
                                                      approx_slope(mu, eta_l) /
                                                      std::sqrt(I * r * (1 - r));
  return {plan.kappa_con() < upper, upper - plan.kappa_con()};
}

Decision full_decision(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l) {
  if (!s.usable) return {};
  if (!s.has_sigma) return naive_decision(s, plan);
  const double r = s.planning_fraction;
  const double I = s.I_total;
  const double threshold = plan.full_scale == FullScale::kappa ? plan.kappa_con() : plan.gamma_con;
  const double lhs = s.full_value + s.full_bias / std::sqrt(I) *
                                        (z_upper(plan.alpha_plan) / std::sqrt(r) -
                                         z_upper(alpha_l) / std::sqrt(1 - r));
  const double rhs =
      threshold - s.sigma_F_hat * z_upper(plan.alpha_coverage) / std::sqrt(I * r * (1 - r));
  return {lhs > rhs, lhs - rhs};
}

Decision decide(const PlanningSummary& s, const ScreeningPlan& plan, double alpha_l) {
  switch (plan.method) {
    case Method::naive: return naive_decision(s, plan);
    case Method::sensval: return sensval_decision(s, plan, alpha_l);
    case Method::approx: return approx_decision(s, plan, alpha_l);
    case Method::sensval_full: return full_decision(s, plan, alpha_l);
  }
  return {};
}

Selection select_with_levels(std::span<const PlanningSummary> summaries,
                             const ScreeningPlan& plan, std::span<const double> alpha_l) {
  if (alpha_l.size() != summaries.size()) throw ConfigError("one alpha level per outcome needed");
  Selection sel;
  sel.alpha_l.assign(alpha_l.begin(), alpha_l.end());
  sel.decisions.resize(summaries.size());
  for (std::size_t l = 0; l < summaries.size(); ++l) {
    sel.decisions[l] = decide(summaries[l], plan, alpha_l[l]);
    if (sel.decisions[l].selected) sel.selected.push_back(l);
  }
  return sel;
}

namespace {

std::vector<double> uniform_levels(std::size_t L, double alpha) {
  return std::vector<double>(L, L ? alpha / static_cast<double>(L) : alpha);
}

std::vector<double> fixed_levels(const ScreeningPlan& plan, std::size_t L) {
  const auto& f = plan.alpha_l.fixed;
  if (f.size() == 1) return std::vector<double>(L, f.front());
  if (f.size() != L)
    throw ConfigError("fixed alpha list has " + std::to_string(f.size()) + " levels for " +
                      std::to_string(L) + " outcomes");
  return f;
}

}  // namespace

Selection naive_select(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan) {
  ScreeningPlan p = plan;
  p.method = Method::naive;
  auto levels = uniform_levels(summaries.size(), plan.alpha);
  return select_with_levels(summaries, p, levels);
}

Selection sensval_select(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan) {
  ScreeningPlan p = plan;
  p.method = Method::sensval;
  return select_outcomes(summaries, p);
}

Selection approx_select(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan) {
  ScreeningPlan p = plan;
  p.method = Method::approx;
  return select_outcomes(summaries, p);
}

Selection dynamic_alpha(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan) {
  constexpr int kMaxRounds = 50;
  const std::size_t L = summaries.size();
  auto levels = uniform_levels(L, plan.alpha);
  std::vector<std::vector<std::size_t>> history;
  Selection sel;
  for (int round = 1; round <= kMaxRounds; ++round) {
    sel = select_with_levels(summaries, plan, levels);
    sel.iterations = round;
    if (sel.selected.empty()) return sel;
    if (!history.empty() && sel.selected == history.back()) return sel;
    if (std::find(history.begin(), history.end(), sel.selected) != history.end()) {
      sel.converged = false;
      sel.cycled = true;
      return sel;
    }
    history.push_back(sel.selected);
    levels = uniform_levels(L, 0.0);
    std::fill(levels.begin(), levels.end(),
              plan.alpha / static_cast<double>(sel.selected.size()));
  }
  sel.converged = false;
  return sel;
}

Selection select_outcomes(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan) {
  const std::size_t L = summaries.size();
  if (plan.method == Method::naive) {
    auto sel = naive_select(summaries, plan);
    if (plan.alpha_l.kind == AlphaPolicy::Kind::fixed) sel.alpha_l = fixed_levels(plan, L);
    return sel;
  }
  switch (plan.alpha_l.kind) {
    case AlphaPolicy::Kind::bonferroni: {
      auto levels = uniform_levels(L, plan.alpha);
      return select_with_levels(summaries, plan, levels);
    }
    case AlphaPolicy::Kind::fixed: {
      auto levels = fixed_levels(plan, L);
      return select_with_levels(summaries, plan, levels);
    }
    case AlphaPolicy::Kind::dynamic: return dynamic_alpha(summaries, plan);
  }
  return {};
}

GuardResult guard_hyperparameters(double alpha_plan, double alpha, double r, std::size_t L) {
  const double zp = z_upper(alpha_plan);
  const double zl = z_upper(alpha / static_cast<double>(L));
  GuardResult g;
  g.max_r = zp * zp / (zp * zp + zl * zl);
  g.max_L = alpha / normal_sf(std::sqrt((1 - r) / r) * zp);
  g.ok = zp > 0 && r <= g.max_r && static_cast<double>(L) <= g.max_L;
  return g;
}

double guard_max_r(double alpha_plan, std::span<const double> alpha_l) {
  const double zp = z_upper(alpha_plan);
  double best = 1.0;
  for (double a : alpha_l) {
    const double zl = z_upper(a);
    best = std::min(best, zp * zp / (zp * zp + zl * zl));
  }
  return best;
}

std::vector<double> analysis_levels(const Selection& sel, const ScreeningPlan& plan,
                                    std::size_t L) {
  std::vector<double> levels(L, 0.0);
  if (sel.selected.empty()) return levels;
  if (plan.alpha_l.kind == AlphaPolicy::Kind::fixed) {
    auto fixed = fixed_levels(plan, L);
    double total = 0;
    for (auto l : sel.selected) {
      levels[l] = fixed[l];
      total += fixed[l];
    }
    if (total > plan.alpha * (1 + 1e-12))
      throw ConfigError("selected outcomes spend alpha " + std::to_string(total) +
                        ", more than the budget " + std::to_string(plan.alpha));
    return levels;
  }
  const double each = plan.alpha / static_cast<double>(sel.selected.size());
  for (auto l : sel.selected) levels[l] = each;
  return levels;
}

SelectionReport analyze(const MatchedSample& sample, const SplitHandle& split,
                        const Selection& sel, std::span<const double> levels,
                        std::span<const PlanningSummary> summaries, const ScreeningPlan& plan) {
  const std::size_t L = sample.L();
  double spent = 0;
  for (auto l : sel.selected) spent += levels[l];
  if (spent > plan.alpha * (1 + 1e-12))
    throw ConfigError("selected outcomes spend more than alpha");

  SelectionReport rep;
  rep.method = plan.method;
  rep.gamma_con = plan.gamma_con;
  rep.alpha = plan.alpha;
  rep.selected = sel.selected;
  rep.iterations = sel.iterations;
  rep.converged = sel.converged;
  rep.I_planning = split.planning_ids.size();
  rep.I_analysis = split.analysis_ids.size();
  rep.outcomes.resize(L);
  const bool full = sample.mode() == SampleMode::full || plan.method == Method::sensval_full;
  for (std::size_t l = 0; l < L; ++l) {
    auto& a = rep.outcomes[l];
    const auto& s = summaries[l];
    a.name = sample.outcome_names[l];
    a.usable = s.usable;
    a.note = s.note;
    a.direction = s.direction;
    a.I_plan = s.I_plan;
    a.kappa_plan = s.kappa_plan;
    a.sigma_F_hat = s.sigma_F_hat;
    a.selection_margin = l < sel.decisions.size() ? sel.decisions[l].margin : 0.0;
    a.alpha_l = levels[l];
  }
  for (auto l : sel.selected) {
    auto& a = rep.outcomes[l];
    a.selected = true;
    try {
      if (full) {
        auto scored = statistic_full(sample, l, plan.spec(l), split.analysis_ids, a.direction);
        a.I_analysis = scored.I();
        a.analysis_p_upper = worst_case_p_full(scored, plan.gamma_con);
      } else {
        auto d = differences(sample, l, a.direction, split.analysis_ids);
        a.I_analysis = d.y.size();
        a.analysis_p_upper = worst_case_p(score(d, plan.spec(l)), plan.gamma_con).upper;
      }
    } catch (const EmptyOutcomeError& e) {
      a.note = e.what();
      a.analysis_p_upper = 1.0;
    }
    a.rejected = a.analysis_p_upper <= a.alpha_l;
    if (a.rejected) rep.rejected.push_back(l);
  }
  return rep;
}

SelectionReport screen(const MatchedSample& sample, const ScreeningPlan& plan) {
  const auto sp = split(sample, plan.r, plan.seed);
  const auto summaries = summarize_planning(sample, sp, plan);
  const auto sel = select_outcomes(summaries, plan);
  const auto levels = analysis_levels(sel, plan, sample.L());
  return analyze(sample, sp, sel, levels, summaries, plan);
}

std::vector<ScoreSpec> default_specs(const MatchedSample& sample) {
  std::vector<ScoreSpec> specs;
  for (auto k : sample.outcome_kinds)
    specs.push_back(k == OutcomeKind::binary ? ScoreSpec::mcnemar() : ScoreSpec::wilcoxon());
  return specs;
}

BonferroniResult bonferroni_full(const MatchedSample& sample, const ScreeningPlan& plan) {
  const std::size_t L = sample.L();
  BonferroniResult out;
  out.p_two_sided.assign(L, 1.0);
  out.tested = L;
  const bool full = sample.mode() == SampleMode::full;
  const auto ids = all_ids(sample);
  parallel_for(L, plan.threads, [&](std::size_t l) {
    try {
      if (full) {
        const double up =
            worst_case_p_full(statistic_full(sample, l, plan.spec(l), ids, 1), plan.gamma_con);
        const double down =
            worst_case_p_full(statistic_full(sample, l, plan.spec(l), ids, -1), plan.gamma_con);
        out.p_two_sided[l] = std::min(1.0, 2.0 * std::min(up, down));
      } else {
        out.p_two_sided[l] =
            two_sided_p(score(differences(sample, l, 1, ids), plan.spec(l)), plan.gamma_con);
      }
    } catch (const EmptyOutcomeError&) {
      out.p_two_sided[l] = 1.0;
    }
  });
  for (std::size_t l = 0; l < L; ++l)
    if (out.p_two_sided[l] <= plan.alpha / static_cast<double>(L)) out.rejected.push_back(l);
  return out;
}

double local_power(const LocalPowerInputs& in) {
  if (!(in.sigma_theta0 > 0)) throw ConfigError("sigma(theta0) must be positive");
  if (!(in.r > 0 && in.r < 1)) throw ConfigError("r must lie in (0, 1)");
  const double arg = -z_upper(in.alpha_coverage) / std::sqrt(1 - in.r) -
                     in.h * in.mu_prime_theta0 / in.sigma_theta0 +
                     z_upper(in.alpha_l) * std::sqrt(in.gamma_con) * in.sigma_q *
                         std::sqrt(in.r) /
                         ((1 + in.gamma_con) * in.sigma_theta0 * std::sqrt(1 - in.r));
  return normal_sf(arg);
}

WilcoxonNormalLaw wilcoxon_normal_law(double theta) {
  WilcoxonNormalLaw w;
  const double s2 = std::sqrt(2.0);
  w.mu = normal_cdf(s2 * theta);
  w.mu_prime = s2 * normal_pdf(s2 * theta);
  // Y1+Y2 and Y1+Y3 are N(2 theta, 2) with correlation 1/2.
  const double joint = bivariate_normal_upper(-s2 * theta, -s2 * theta, 0.5);
  w.sigma = 2.0 * std::sqrt(joint - w.mu * w.mu);
  return w;
}

std::vector<ScreeRow> scree(std::span<const PlanningSummary> summaries, const ScreeningPlan& plan,
                            std::span<const double> gamma_grid) {
  if (gamma_grid.empty()) throw ConfigError("scree grid is empty");
  std::vector<ScreeRow> rows;
  for (double g : gamma_grid) {
    ScreeningPlan p = plan;
    p.gamma_con = g;
    rows.push_back({g, select_outcomes(summaries, p).selected.size()});
  }
  return rows;
}

std::vector<ScreeRow> scree(const MatchedSample& sample, const ScreeningPlan& plan,
                            std::span<const double> gamma_grid) {
  if (gamma_grid.empty()) throw ConfigError("scree grid is empty");
  const auto sp = split(sample, plan.r, plan.seed);
  if (sample.mode() == SampleMode::pairs) {
    const auto summaries = summarize_planning(sample, sp, plan);
    return scree(summaries, plan, gamma_grid);
  }
  std::vector<ScreeRow> rows;
  for (double g : gamma_grid) {
    ScreeningPlan p = plan;
    p.gamma_con = g;
    const auto summaries = summarize_planning(sample, sp, p);
    rows.push_back({g, select_outcomes(summaries, p).selected.size()});
  }
  return rows;
}

}  // namespace splitscreen
