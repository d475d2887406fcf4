#include "splitscreen/fullmatch.hpp"

#include "splitscreen/errors.hpp"
#include "splitscreen/normal.hpp"
#include "splitscreen/rng.hpp"
#include "splitscreen/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splitscreen {

namespace {

struct PairRef {
  std::size_t set, j, k;
};

}  // namespace

FullMatchScored statistic_full(const MatchedSample& sample, std::size_t outcome,
                               const ScoreSpec& spec, std::span<const std::size_t> ids,
                               int direction) {
  if (outcome >= sample.L()) throw ConfigError("outcome index out of range");
  if (direction != 1 && direction != -1) throw ConfigError("direction must be +1 or -1");

  // Retained values per set; the lone unit goes first.
  std::vector<std::vector<double>> values;
  std::vector<bool> lone_treated;
  FullMatchScored out;
  for (auto i : ids) {
    const MatchedSet& s = sample.sets.at(i);
    const std::size_t lone = s.lone_index();
    const double lone_value = s.units[lone].outcomes[outcome];
    if (std::isnan(lone_value)) {
      ++out.dropped_sets;
      continue;
    }
    std::vector<double> v{direction * lone_value};
    for (std::size_t k = 0; k < s.units.size(); ++k) {
      if (k == lone) continue;
      double x = s.units[k].outcomes[outcome];
      if (std::isnan(x))
        ++out.dropped_units;
      else
        v.push_back(direction * x);
    }
    if (v.size() < 2) {
      ++out.dropped_sets;
      continue;
    }
    values.push_back(std::move(v));
    lone_treated.push_back(s.lone_is_treated() || s.units.size() == 2);
    out.set_ids.push_back(i);
  }
  if (values.empty())
    throw EmptyOutcomeError("outcome '" + sample.outcome_names[outcome] +
                            "' has no usable matched sets");

  std::vector<PairRef> refs;
  std::vector<double> absdiff;
  for (std::size_t s = 0; s < values.size(); ++s)
    for (std::size_t j = 0; j < values[s].size(); ++j)
      for (std::size_t k = j + 1; k < values[s].size(); ++k) {
        refs.push_back({s, j, k});
        absdiff.push_back(std::fabs(values[s][j] - values[s][k]));
      }
  const auto q = score_values(absdiff, spec);

  out.sets.resize(values.size());
  for (std::size_t s = 0; s < values.size(); ++s) {
    const std::size_t n = values[s].size();
    out.sets[s].contributions.assign(n, 0.0);
    out.sets[s].denominators.assign(n, 0.0);
    out.sets[s].lone = 0;
  }
  for (std::size_t p = 0; p < refs.size(); ++p) {
    const auto [s, j, k] = refs[p];
    FullMatchSet& set = out.sets[s];
    const double rj = values[s][j], rk = values[s][k];
    // Treated-minus-control difference when j (resp. k) is the lone unit.
    const double yj = lone_treated[s] ? rj - rk : rk - rj;
    const double yk = -yj;
    set.contributions[j] += (yj >= 0 ? 1.0 : 0.0) * q[p];
    set.contributions[k] += (yk >= 0 ? 1.0 : 0.0) * q[p];
    set.denominators[j] += q[p];
    set.denominators[k] += q[p];
    if (j == 0) {
      set.q.push_back(q[p]);
      set.sgn.push_back(yj >= 0 ? 1 : 0);
    }
  }
  for (const auto& set : out.sets) {
    out.numerator += set.contributions[set.lone];
    out.D += set.denominators[set.lone];
  }
  if (!(out.D > 0)) throw EmptyOutcomeError("every within-set difference is zero");
  out.T_g = out.numerator / out.D;
  return out;
}

SetBound set_bound(std::span<const double> c, double gamma) {
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  const std::size_t n = c.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
  std::vector<double> w(n);
  SetBound best;
  bool first = true;
  for (std::size_t k = 1; k < n; ++k) {
    std::fill(w.begin(), w.end(), 1.0);
    for (std::size_t t = 0; t < k; ++t) w[order[t]] = gamma;
    double total = 0, m1 = 0, m2 = 0;
    for (std::size_t j = 0; j < n; ++j) total += w[j];
    for (std::size_t j = 0; j < n; ++j) {
      const double p = w[j] / total;
      m1 += p * c[j];
      m2 += p * c[j] * c[j];
    }
    const double var = std::max(0.0, m2 - m1 * m1);
    bool better;
    if (first)
      better = true;
    else if (m1 != best.mean)
      better = gamma >= 1.0 ? m1 > best.mean : m1 < best.mean;
    else
      better = var > best.variance;
    if (better) best = {m1, var, k};
    first = false;
  }
  return best;
}

SeparableBounds separable_bounds(const FullMatchScored& scored, double gamma) {
  SeparableBounds b;
  for (const auto& set : scored.sets) {
    auto sb = set_bound(set.contributions, gamma);
    b.mean_total += sb.mean;
    b.variance_total += sb.variance;
  }
  b.a_gamma = b.mean_total / scored.D;
  b.b_gamma = std::sqrt(static_cast<double>(scored.I()) * b.variance_total) / scored.D;
  return b;
}

double worst_case_p_full(const FullMatchScored& scored, double gamma) {
  auto b = separable_bounds(scored, gamma);
  const double sd = std::sqrt(b.variance_total) / scored.D;
  if (sd == 0) return scored.T_g >= b.a_gamma ? (scored.T_g > b.a_gamma ? 0.0 : 0.5) : 1.0;
  return normal_sf((scored.T_g - b.a_gamma) / sd);
}

namespace {

// T_g - a_gamma - z * sd_gamma: decreasing in gamma through the root.
double boundary_gap(const FullMatchScored& scored, double gamma, double z) {
  auto b = separable_bounds(scored, gamma);
  return scored.T_g - b.a_gamma - z * std::sqrt(b.variance_total) / scored.D;
}

}  // namespace

FullSensitivity sensitivity_value_full(const FullMatchScored& scored, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  const double z = z_upper(alpha);
  double lo = std::log(kGammaMin), hi = std::log(kGammaMax);
  if (boundary_gap(scored, kGammaMin, z) <= 0) return {kGammaMin, true};
  if (boundary_gap(scored, kGammaMax, z) > 0) return {kGammaMax, true};
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (boundary_gap(scored, std::exp(mid), z) > 0)
      lo = mid;
    else
      hi = mid;
  }
  return {std::exp(0.5 * (lo + hi)), false};
}

namespace {

double scaled(double gamma, FullScale scale) {
  return scale == FullScale::kappa ? kappa_of_gamma(gamma) : gamma;
}

}  // namespace

FullPlanningEstimate full_planning_estimate(const MatchedSample& sample, std::size_t outcome,
                                            const ScoreSpec& spec,
                                            std::span<const std::size_t> planning_ids,
                                            int direction, double alpha_plan, std::size_t B,
                                            std::uint64_t seed, FullScale scale, FullBias bias) {
  if (B < 2) throw ConfigError("bootstrap needs at least two replicates");
  const auto scored = statistic_full(sample, outcome, spec, planning_ids, direction);
  const auto sv = sensitivity_value_full(scored, alpha_plan);
  FullPlanningEstimate est;
  est.value = scaled(sv.gamma_star, scale);
  est.saturated = sv.saturated;

  const auto& kept = scored.set_ids;
  const std::size_t n = kept.size();
  std::vector<std::size_t> draw(n);
  est.boots.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    Rng rng = make_rng(seed, {b});
    for (int attempt = 0;; ++attempt) {
      if (attempt == kBootstrapRetryCap)
        throw NumericalError("bootstrap resamples kept coming out all zero");
      for (std::size_t i = 0; i < n; ++i) draw[i] = kept[uniform_index(rng, n)];
      try {
        auto rescored = statistic_full(sample, outcome, spec, draw, direction);
        est.boots[b] = scaled(sensitivity_value_full(rescored, alpha_plan).gamma_star, scale);
        break;
      } catch (const EmptyOutcomeError&) {
      }
    }
  }
  double mean = 0;
  for (double v : est.boots) mean += v;
  mean /= static_cast<double>(B);
  double ss = 0;
  for (double v : est.boots) ss += (v - mean) * (v - mean);
  est.boot_mean = mean;
  est.sigma_F_hat = std::sqrt(static_cast<double>(n) * ss / static_cast<double>(B - 1));

  if (bias == FullBias::bootstrap) {
    est.bias = std::sqrt(static_cast<double>(n)) * (est.value - mean);
  } else {
    // Delta-method scale of the bound: b at Gamma*, divided by the slope of the
    // bound mean on the chosen scale.
    const double g = sv.gamma_star;
    const double b = separable_bounds(scored, g).b_gamma;
    const double h = 1e-5 * g;
    const double slope_a = (separable_bounds(scored, g + h).a_gamma -
                            separable_bounds(scored, g - h).a_gamma) /
                           (2 * h);
    const double slope_scale = scale == FullScale::kappa ? 1.0 / ((1 + g) * (1 + g)) : 1.0;
    est.bias = b * slope_scale / slope_a;
  }
  return est;
}

}  // namespace splitscreen
