#include "splitscreen/score_stats.hpp"

#include "splitscreen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace splitscreen {

ScoreSpec ScoreSpec::ustat(int m, int m_lo, int m_hi) {
  ScoreSpec s;
  s.kind = Kind::ustat;
  s.m = m;
  s.m_lo = m_lo;
  s.m_hi = m_hi;
  s.validate();
  return s;
}

ScoreSpec ScoreSpec::psi(std::vector<double> u, std::vector<double> value) {
  ScoreSpec s;
  s.kind = Kind::psi;
  s.psi_u = std::move(u);
  s.psi_value = std::move(value);
  s.validate();
  return s;
}

void ScoreSpec::validate() const {
  if (kind == Kind::ustat && !(1 <= m_lo && m_lo <= m_hi && m_hi <= m))
    throw ConfigError("ustat needs 1 <= mlo <= mhi <= m");
  if (kind == Kind::psi) {
    if (psi_u.empty() || psi_u.size() != psi_value.size())
      throw ConfigError("psi table needs matching, nonempty u and value columns");
    double total = 0;
    for (std::size_t k = 0; k < psi_u.size(); ++k) {
      if (!std::isfinite(psi_u[k]) || !std::isfinite(psi_value[k]))
        throw ConfigError("psi table values must be finite");
      if (psi_value[k] < 0) throw ConfigError("psi scores must be nonnegative");
      if (psi_u[k] < 0 || psi_u[k] > 1) throw ConfigError("psi knots must lie in [0, 1]");
      if (k > 0 && psi_u[k] <= psi_u[k - 1]) throw ConfigError("psi knots must be increasing");
      total += psi_value[k];
    }
    if (!(total > 0)) throw ConfigError("psi table sums to zero");
  }
}

double ScoreSpec::psi_at(double u) const {
  if (u <= psi_u.front()) return psi_value.front();
  if (u >= psi_u.back()) return psi_value.back();
  auto it = std::upper_bound(psi_u.begin(), psi_u.end(), u);
  std::size_t k = static_cast<std::size_t>(it - psi_u.begin());
  double w = (u - psi_u[k - 1]) / (psi_u[k] - psi_u[k - 1]);
  return psi_value[k - 1] + w * (psi_value[k] - psi_value[k - 1]);
}

namespace {

ScoreSpec read_psi_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open psi table " + path);
  std::vector<double> u, v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a >> b)) {
      if (u.empty()) continue;  // header
      throw ConfigError("psi table " + path + ": malformed line '" + line + "'");
    }
    u.push_back(a);
    v.push_back(b);
  }
  return ScoreSpec::psi(std::move(u), std::move(v));
}

}  // namespace

ScoreSpec ScoreSpec::parse(const std::string& text) {
  if (text == "sign") return sign();
  if (text == "wilcoxon") return wilcoxon();
  if (text == "mcnemar") return mcnemar();
  if (text.rfind("ustat:", 0) == 0) {
    std::string rest = text.substr(6);
    std::replace(rest.begin(), rest.end(), ',', ' ');
    std::istringstream ss(rest);
    int m, lo, hi;
    std::string extra;
    if (!(ss >> m >> lo >> hi) || (ss >> extra))
      throw ConfigError("ustat spec must be ustat:m,mlo,mhi");
    return ustat(m, lo, hi);
  }
  if (text.rfind("psi:@", 0) == 0) return read_psi_file(text.substr(5));
  throw ConfigError("unknown statistic '" + text + "'");
}

std::string ScoreSpec::to_string() const {
  switch (kind) {
    case Kind::sign: return "sign";
    case Kind::wilcoxon: return "wilcoxon";
    case Kind::mcnemar: return "mcnemar";
    case Kind::ustat:
      return "ustat:" + std::to_string(m) + "," + std::to_string(m_lo) + "," +
             std::to_string(m_hi);
    case Kind::psi: return "psi";
  }
  return "?";
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

double log_choose(double n, double k) {
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

}  // namespace

double ustat_score(double rank, std::size_t I, int m, int m_lo, int m_hi) {
  const double n = static_cast<double>(I);
  if (I >= static_cast<std::size_t>(m) && I < 10000) {
    const double log_total = log_choose(n, m);
    double q = 0;
    for (int k = m_lo; k <= m_hi; ++k) {
      if (rank - 1 < k - 1 || n - rank < m - k) continue;
      q += std::exp(log_choose(rank - 1, k - 1) + log_choose(n - rank, m - k) - log_total);
    }
    return q;
  }
  const double p = rank / n;
  double q = 0;
  for (int k = m_lo; k <= m_hi; ++k)
    q += k * std::exp(log_choose(m, k)) * std::pow(p, k - 1) * std::pow(1 - p, m - k);
  return q / n;
}

std::vector<double> score_values(std::span<const double> y, const ScoreSpec& spec) {
  const std::size_t n = y.size();
  std::vector<double> q(n, 0.0);
  std::vector<std::size_t> nz;
  std::vector<double> absval;
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] != 0.0) {
      nz.push_back(i);
      absval.push_back(std::fabs(y[i]));
    }

  switch (spec.kind) {
    case ScoreSpec::Kind::mcnemar:
      for (double v : y)
        if (v != 0.0 && std::fabs(v) != 1.0)
          throw SpecMismatchError("mcnemar needs binary outcomes (differences in {-1, 0, 1})");
      [[fallthrough]];
    case ScoreSpec::Kind::sign:
      for (auto i : nz) q[i] = 1.0;
      return q;
    case ScoreSpec::Kind::wilcoxon: {
      auto ranks = average_ranks(absval);
      for (std::size_t k = 0; k < nz.size(); ++k) q[nz[k]] = ranks[k];
      return q;
    }
    case ScoreSpec::Kind::ustat:
    case ScoreSpec::Kind::psi: {
      // Scores at integer ranks, averaged over each tie block.
      const std::size_t I = nz.size();
      std::vector<std::size_t> order(I);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return absval[a] < absval[b]; });
      auto at_rank = [&](std::size_t r) {
        if (spec.kind == ScoreSpec::Kind::psi)
          return spec.psi_at(static_cast<double>(r) / static_cast<double>(I + 1));
        return ustat_score(static_cast<double>(r), I, spec.m, spec.m_lo, spec.m_hi);
      };
      for (std::size_t i = 0; i < I;) {
        std::size_t j = i;
        while (j + 1 < I && absval[order[j + 1]] == absval[order[i]]) ++j;
        double total = 0;
        for (std::size_t r = i + 1; r <= j + 1; ++r) total += at_rank(r);
        double avg = total / static_cast<double>(j - i + 1);
        for (std::size_t k = i; k <= j; ++k) q[nz[order[k]]] = avg;
        i = j + 1;
      }
      return q;
    }
  }
  return q;
}

Moments moments(std::span<const double> q) {
  double s1 = 0, s2 = 0, s3 = 0;
  std::size_t I = 0;
  for (double v : q) {
    if (v <= 0) continue;
    ++I;
    s1 += v;
    s2 += v * v;
    s3 += v * v * v;
  }
  if (I == 0 || !(s1 > 0)) throw EmptyOutcomeError("all scores are zero");
  const double n = static_cast<double>(I);
  const double m1 = s1 / n;
  return Moments{(s2 / n) / (m1 * m1), (s3 / n) / (m1 * m1 * m1)};
}

ScoredSample score(std::span<const double> y, const ScoreSpec& spec) {
  if (y.empty()) throw EmptyOutcomeError("no differences to score");
  ScoredSample s;
  s.q = score_values(y, spec);
  s.sgn.resize(y.size());
  double num = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s.sgn[i] = y[i] >= 0 ? 1 : 0;
    const double qi = s.q[i];
    if (qi > 0) {
      ++s.I;
      s.sum_q += qi;
      s.sum_q2 += qi * qi;
      if (s.sgn[i]) {
        num += qi;
        ++s.n_positive;
      }
    }
  }
  if (s.I == 0) throw EmptyOutcomeError("every difference is zero");
  s.T = num / s.sum_q;
  auto mo = moments(s.q);
  s.sigma_qI_sq = mo.sigma_qI_sq;
  s.c_qI = mo.c_qI;
  return s;
}

}  // namespace splitscreen
