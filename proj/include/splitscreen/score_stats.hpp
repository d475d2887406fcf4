#pragma once

#include "splitscreen/matched_data.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace splitscreen {

struct ScoreSpec {
  enum class Kind { sign, wilcoxon, psi, ustat, mcnemar };

  Kind kind = Kind::wilcoxon;
  int m = 2, m_lo = 2, m_hi = 2;       // ustat only
  std::vector<double> psi_u, psi_value;  // psi only: knots on [0,1], ascending

  static ScoreSpec sign() {
    ScoreSpec s;
    s.kind = Kind::sign;
    return s;
  }
  static ScoreSpec wilcoxon() {
    ScoreSpec s;
    s.kind = Kind::wilcoxon;
    return s;
  }
  static ScoreSpec mcnemar() {
    ScoreSpec s;
    s.kind = Kind::mcnemar;
    return s;
  }
  static ScoreSpec ustat(int m, int m_lo, int m_hi);
  static ScoreSpec psi(std::vector<double> u, std::vector<double> value);

  // "sign", "wilcoxon", "mcnemar", "ustat:m,mlo,mhi", "psi:@file.csv"
  static ScoreSpec parse(const std::string& text);
  std::string to_string() const;

  bool equal_scores() const { return kind == Kind::sign || kind == Kind::mcnemar; }
  void validate() const;
  double psi_at(double u) const;
};

struct Moments {
  double sigma_qI_sq = 1.0;
  double c_qI = 1.0;
};

struct ScoredSample {
  std::vector<int> sgn;
  std::vector<double> q;
  double T = 0.0;
  double sigma_qI_sq = 1.0;
  double c_qI = 1.0;
  std::size_t I = 0;  // entries with q > 0
  std::size_t n_positive = 0;
  double sum_q = 0.0;
  double sum_q2 = 0.0;

  // sum q^2 / (sum q)^2, equal to sigma_qI_sq / I
  double scaled_variance() const { return sum_q2 / (sum_q * sum_q); }
};

// Average ranks (1-based) of the given values; ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

// Score for a single rank out of I nonzero entries. Exact binomial form for
// m <= I < 10^4, large-I approximation otherwise.
double ustat_score(double rank, std::size_t I, int m, int m_lo, int m_hi);

ScoredSample score(std::span<const double> y, const ScoreSpec& spec);
inline ScoredSample score(const PairDifferences& d, const ScoreSpec& spec) {
  return score(d.y, spec);
}

// Scores q_i for the absolute values |y_i|, zero where y_i = 0.
std::vector<double> score_values(std::span<const double> y, const ScoreSpec& spec);

Moments moments(std::span<const double> q);

}  // namespace splitscreen
