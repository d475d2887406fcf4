#pragma once

#include "splitscreen/matched_data.hpp"
#include "splitscreen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace testgen {

using splitscreen::Rng;

// a fresh sampler per draw, so each stream depends only on its own Rng
inline double normal(Rng& rng) { return splitscreen::NormalSampler{}(rng); }

inline std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + splitscreen::uniform_index(rng, hi - lo + 1);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * splitscreen::uniform01(rng);
}

// Pair differences with optional exact zeros and ties (values rounded to a grid).
inline std::vector<double> differences(Rng& rng, std::size_t n, double shift, double sd,
                                       double zero_prob = 0.0, double grid = 0.0) {
  std::vector<double> y(n);
  for (auto& v : y) {
    v = shift + sd * normal(rng);
    if (grid > 0) v = std::round(v / grid) * grid;
    if (splitscreen::uniform01(rng) < zero_prob) v = 0.0;
  }
  if (std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; })) y[0] = 1.0;
  return y;
}

// A pairs-only sample with L outcomes, each shifted by shifts[l].
inline splitscreen::MatchedSample pair_sample(Rng& rng, std::size_t I,
                                              const std::vector<double>& shifts, double sd = 1.0) {
  std::vector<std::vector<double>> diffs(I, std::vector<double>(shifts.size()));
  for (auto& row : diffs)
    for (std::size_t l = 0; l < shifts.size(); ++l) row[l] = shifts[l] + sd * normal(rng);
  return splitscreen::pairs_from_differences(diffs);
}

// Full-matching sample: each set has one treated unit and 1..(max_n-1)
// controls, or one control and several treated units.
inline splitscreen::MatchedSample full_sample(Rng& rng, std::size_t I, std::size_t max_n,
                                              double shift, std::size_t L = 1) {
  splitscreen::MatchedSample s;
  for (std::size_t l = 0; l < L; ++l) {
    s.outcome_names.push_back("y" + std::to_string(l + 1));
    s.outcome_kinds.push_back(splitscreen::OutcomeKind::continuous);
  }
  for (std::size_t i = 0; i < I; ++i) {
    splitscreen::MatchedSet set;
    set.id = "s" + std::to_string(i);
    const std::size_t n = between(rng, 2, max_n);
    const bool lone_treated = n == 2 || splitscreen::uniform01(rng) < 0.6;
    const std::size_t lone = splitscreen::uniform_index(rng, n);
    for (std::size_t j = 0; j < n; ++j) {
      splitscreen::Unit u;
      const bool treated = lone_treated ? j == lone : j != lone;
      u.z = treated ? 1 : 0;
      for (std::size_t l = 0; l < L; ++l) u.outcomes.push_back(normal(rng) + (treated ? shift : 0));
      set.units.push_back(std::move(u));
    }
    s.sets.push_back(std::move(set));
  }
  return s;
}

// Quadratic-time average ranks of |y| over the nonzero entries.
inline std::vector<double> naive_abs_ranks(const std::vector<double>& y) {
  std::vector<double> r(y.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0) continue;
    double less = 0, equal = 0;
    for (double v : y) {
      if (v == 0) continue;
      if (std::abs(v) < std::abs(y[i])) ++less;
      if (std::abs(v) == std::abs(y[i])) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

inline double phi_upper(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace testgen
