#include "splitscreen/simulation.hpp"

#include "splitscreen/errors.hpp"
#include "splitscreen/normal.hpp"
#include "splitscreen/parallel.hpp"
#include "splitscreen/report.hpp"
#include "splitscreen/sensitivity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace splitscreen {

namespace {

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": " + v);
  }
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x < 0 || x != std::floor(x)) throw ConfigError("bad count for " + key + ": " + v);
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

std::vector<std::string> default_names(std::size_t L) {
  std::vector<std::string> names(L);
  for (std::size_t l = 0; l < L; ++l) names[l] = "y" + std::to_string(l + 1);
  return names;
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int draw_group(const std::vector<double>& props, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0;
  for (std::size_t k = 0; k < props.size(); ++k) {
    acc += props[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(props.size()) - 1;
}

struct Generated {
  MatchedSample sample;
  std::vector<int> group;
};

// Treated and control units paired at random; outcomes drawn per pair so the
// sub-population group is known before effects are added.
Generated generate_pairs(const SimConfig& c, std::uint64_t rep_seed) {
  Rng rng(derive_seed(rep_seed, {0xa551}));
  NormalSampler normal;
  std::vector<int> z(c.N, 0);
  if (c.treated_count == TreatedCount::complete) {
    const auto nt = static_cast<std::size_t>(std::llround(c.treat_prob * static_cast<double>(c.N)));
    std::vector<std::size_t> idx(c.N);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx, rng);
    for (std::size_t i = 0; i < nt && i < c.N; ++i) z[idx[i]] = 1;
  } else {
    for (auto& zi : z) zi = uniform01(rng) < c.treat_prob ? 1 : 0;
  }
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < c.N; ++i) (z[i] ? treated : control).push_back(i);
  shuffle(treated, rng);
  shuffle(control, rng);
  const std::size_t I = std::min(treated.size(), control.size());
  if (I == 0) throw MatchingError("randomized assignment produced no treated-control pairs");

  Generated g;
  auto& s = g.sample;
  s.outcome_names = default_names(c.L);
  s.outcome_kinds.assign(c.L, OutcomeKind::continuous);
  s.sets.resize(I);
  g.group.assign(I, 0);
  const bool subpops = !c.subpop_props.empty();
  Rng out_rng(derive_seed(rep_seed, {0x0c07}));
  for (std::size_t i = 0; i < I; ++i) {
    if (subpops) g.group[i] = draw_group(c.subpop_props, out_rng);
    auto& set = s.sets[i];
    set.id = std::to_string(i);
    set.units.resize(2);
    set.units[0].z = 1;
    set.units[1].z = 0;
    set.units[0].outcomes.resize(c.L);
    set.units[1].outcomes.resize(c.L);
    for (std::size_t l = 0; l < c.L; ++l) {
      double effect = c.effect(l);
      if (subpops) effect = c.subpop_tau[l][static_cast<std::size_t>(g.group[i])];
      set.units[0].outcomes[l] = draw_noise(c.noise, c.noise_scale, out_rng, normal) + effect;
      set.units[1].outcomes[l] = draw_noise(c.noise, c.noise_scale, out_rng, normal);
    }
  }
  return g;
}

// Beta(10, 10) as the 10th order statistic of 19 uniforms.
double draw_beta_10_10(Rng& rng) {
  std::vector<double> u(19);
  for (auto& x : u) x = uniform01(rng);
  std::nth_element(u.begin(), u.begin() + 9, u.end());
  return u[9];
}

MatchedSample pair_subjects_randomly(const Subjects& s, std::uint64_t rep_seed) {
  Rng rng(derive_seed(rep_seed, {0x9a12}));
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < s.N; ++i) (s.Z[i] ? treated : control).push_back(i);
  shuffle(treated, rng);
  shuffle(control, rng);
  const std::size_t I = std::min(treated.size(), control.size());
  if (I == 0) throw MatchingError("no treated-control pairs");
  MatchedSample m;
  m.outcome_names = default_names(s.L);
  m.outcome_kinds.assign(s.L, OutcomeKind::continuous);
  for (std::size_t i = 0; i < I; ++i) {
    MatchedSet set;
    set.id = std::to_string(i);
    for (auto idx : {treated[i], control[i]}) {
      Unit u;
      u.z = s.Z[idx];
      u.outcomes.assign(s.outcomes.begin() + static_cast<long>(idx * s.L),
                        s.outcomes.begin() + static_cast<long>((idx + 1) * s.L));
      set.units.push_back(std::move(u));
    }
    m.sets.push_back(std::move(set));
  }
  return m;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace

double SimConfig::effect(std::size_t outcome) const {
  if (!outcome_tau.empty()) return outcome < outcome_tau.size() ? outcome_tau[outcome] : 0.0;
  return std::find(signals.begin(), signals.end(), outcome) != signals.end() ? tau : 0.0;
}

std::vector<std::size_t> SimConfig::signal_outcomes() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < L; ++l) {
    bool signal = effect(l) != 0.0;
    if (!subpop_props.empty())
      for (double t : subpop_tau[l]) signal = signal || t != 0.0;
    if (signal) out.push_back(l);
  }
  return out;
}

void SimConfig::validate() const {
  if (N < 4) throw ConfigError("N must be at least 4");
  if (L == 0) throw ConfigError("L must be positive");
  for (auto s : signals)
    if (s >= L) throw ConfigError("signal index beyond L");
  if (!outcome_tau.empty() && outcome_tau.size() != L)
    throw ConfigError("outcome_tau must have L entries");
  if (!(treat_prob > 0 && treat_prob < 1)) throw ConfigError("treat_prob must lie in (0, 1)");
  if (!(fixed_proportion > 0 && fixed_proportion < 1))
    throw ConfigError("fixed proportion must lie in (0, 1)");
  if (!(gamma_data >= 1)) throw ConfigError("gamma_data must be at least 1");
  if (!(caliper > 0)) throw ConfigError("caliper must be positive");
  if (!(noise_scale > 0)) throw ConfigError("noise scale must be positive");
  if (!(r > 0 && r < 1)) throw ConfigError("r must lie in (0, 1)");
  if (!(gamma_con >= 1)) throw ConfigError("gamma_con must be at least 1");
  for (double a : {alpha, alpha_plan, alpha_coverage})
    if (!(a > 0 && a < 1)) throw ConfigError("levels must lie in (0, 1)");
  if (assignment == Assignment::confounded && d == 0) throw ConfigError("d must be positive");
  if (!subpop_props.empty()) {
    double sum = 0;
    for (double p : subpop_props) {
      if (!(p >= 0)) throw ConfigError("sub-population proportions must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1) > 1e-9) throw ConfigError("sub-population proportions must sum to 1");
    if (subpop_tau.size() != L) throw ConfigError("subpop_tau must have L rows");
    for (const auto& row : subpop_tau)
      if (row.size() != subpop_props.size())
        throw ConfigError("subpop_tau rows must have one entry per sub-population");
  }
  if (methods.empty()) throw ConfigError("no methods requested");
  for (const auto& m : methods) {
    const auto base = m.substr(0, m.find(':'));
    if (base != "bonferroni" && base != "naive" && base != "sensval" && base != "approx" &&
        base != "oracle")
      throw ConfigError("unknown simulation method: " + m);
    if (m.find(':') != std::string::npos) AlphaPolicy::parse(m.substr(m.find(':') + 1));
  }
  if (reps == 0) throw ConfigError("reps must be positive");
  if (B < 2) throw ConfigError("B must be at least 2");
  spec.validate();
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["N"] = N;
  j["L"] = L;
  j["signals"] = signals;
  j["tau"] = tau;
  if (!outcome_tau.empty()) j["outcome_tau"] = outcome_tau;
  j["d"] = d;
  j["assignment"] = assignment == Assignment::randomized ? "randomized" : "confounded";
  j["treat_prob"] = treat_prob;
  j["treated_count"] = treated_count == TreatedCount::complete ? "complete" : "bernoulli";
  j["gamma_data"] = gamma_data;
  j["gamma_data_tracks_con"] = gamma_data_tracks_con;
  j["beta_proportion"] = beta_proportion;
  j["fixed_proportion"] = fixed_proportion;
  j["matching"] = matching == Matching::paired_directly ? "paired" : "propensity";
  j["caliper"] = caliper;
  j["noise"] = noise == NoiseLaw::normal ? "normal" : noise == NoiseLaw::logistic ? "logistic" : "t4";
  j["noise_scale"] = noise_scale;
  if (!subpop_props.empty()) {
    j["subpop_props"] = subpop_props;
    j["subpop_tau"] = subpop_tau;
  }
  j["r"] = r;
  j["methods"] = methods;
  j["gamma_con"] = gamma_con;
  j["alpha"] = alpha;
  j["alpha_plan"] = alpha_plan;
  j["alpha_coverage"] = alpha_coverage;
  j["alpha_l"] = alpha_l.to_string();
  j["B"] = B;
  j["stat"] = spec.to_string();
  j["direction"] = direction == DirectionPolicy::planning ? "planning" : "known_positive";
  j["bonferroni"] = bonferroni_two_sided ? "two_sided" : "one_sided";
  j["reps"] = reps;
  j["seed"] = seed;
  j["threads"] = threads;
  return j;
}

void SimConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
  // fixed_proportion switches the Beta draw off, so an explicit choice goes last
  std::vector<std::pair<std::string, nlohmann::json>> items;
  for (auto it = j.begin(); it != j.end(); ++it) items.emplace_back(it.key(), it.value());
  std::stable_partition(items.begin(), items.end(),
                        [](const auto& kv) { return kv.first != "beta_proportion"; });
  for (const auto& [key, v] : items) {
    if (key == "subpop_tau") {
      subpop_tau = v.get<std::vector<std::vector<double>>>();
      continue;
    }
    if (key == "subpop_props") {
      subpop_props = v.get<std::vector<double>>();
      continue;
    }
    if (key == "outcome_tau") {
      outcome_tau = v.get<std::vector<double>>();
      continue;
    }
    if (key == "signals" && v.is_array()) {
      signals = v.get<std::vector<std::size_t>>();
      continue;
    }
    if (key == "methods" && v.is_array()) {
      methods = v.get<std::vector<std::string>>();
      continue;
    }
    if (v.is_string())
      set(key, v.get<std::string>());
    else if (v.is_boolean())
      set(key, v.get<bool>() ? "true" : "false");
    else if (v.is_number_integer())
      set(key, std::to_string(v.get<long long>()));
    else if (v.is_number_unsigned())
      set(key, std::to_string(v.get<unsigned long long>()));
    else if (v.is_number())
      set(key, format_double(v.get<double>()));
    else
      throw ConfigError("unsupported value for " + key);
  }
}

void SimConfig::set(const std::string& key, const std::string& v) {
  if (key == "name") name = v;
  else if (key == "N") N = to_count(key, v);
  else if (key == "L") {
    L = to_count(key, v);
    signals.erase(std::remove_if(signals.begin(), signals.end(), [&](auto s) { return s >= L; }),
                  signals.end());
  } else if (key == "signals") {
    // a count of leading outcomes, or an explicit ';'-separated index list
    if (v.find(';') != std::string::npos) {
      signals.clear();
      for (const auto& s : split_list(v, ';')) signals.push_back(to_count(key, s));
    } else {
      signals.resize(to_count(key, v));
      std::iota(signals.begin(), signals.end(), std::size_t{0});
    }
  } else if (key == "nonnull") {
    const double p = to_double(key, v);
    if (!(p >= 0 && p <= 1)) throw ConfigError("nonnull proportion must lie in [0, 1]");
    signals.resize(static_cast<std::size_t>(std::floor(p * static_cast<double>(L) + 1e-9)));
    std::iota(signals.begin(), signals.end(), std::size_t{0});
  } else if (key == "tau") tau = to_double(key, v);
  else if (key == "d") d = to_count(key, v);
  else if (key == "assignment") {
    if (v == "randomized") assignment = Assignment::randomized;
    else if (v == "confounded") assignment = Assignment::confounded;
    else throw ConfigError("assignment must be randomized or confounded");
  } else if (key == "treat_prob") treat_prob = to_double(key, v);
  else if (key == "treated_count") {
    if (v == "complete") treated_count = TreatedCount::complete;
    else if (v == "bernoulli") treated_count = TreatedCount::bernoulli;
    else throw ConfigError("treated_count must be complete or bernoulli");
  } else if (key == "gamma_data") gamma_data = to_double(key, v);
  else if (key == "gamma_data_tracks_con") gamma_data_tracks_con = to_bool(key, v);
  else if (key == "beta_proportion") beta_proportion = to_bool(key, v);
  else if (key == "fixed_proportion" || key == "proportion") {
    fixed_proportion = to_double(key, v);
    beta_proportion = false;
  } else if (key == "matching") {
    if (v == "paired") matching = Matching::paired_directly;
    else if (v == "propensity") matching = Matching::propensity_caliper;
    else throw ConfigError("matching must be paired or propensity");
  } else if (key == "caliper") caliper = to_double(key, v);
  else if (key == "noise") {
    if (v == "normal") noise = NoiseLaw::normal;
    else if (v == "logistic") noise = NoiseLaw::logistic;
    else if (v == "t4") noise = NoiseLaw::t4;
    else throw ConfigError("noise must be normal, logistic or t4");
  } else if (key == "noise_scale") noise_scale = to_double(key, v);
  else if (key == "r") r = to_double(key, v);
  else if (key == "methods") methods = split_list(v, ';');
  else if (key == "gamma" || key == "gamma_con") gamma_con = to_double(key, v);
  else if (key == "alpha") alpha = to_double(key, v);
  else if (key == "alpha_plan") alpha_plan = to_double(key, v);
  else if (key == "alpha_coverage") alpha_coverage = to_double(key, v);
  else if (key == "alpha_l") alpha_l = AlphaPolicy::parse(v);
  else if (key == "B") B = to_count(key, v);
  else if (key == "stat") spec = ScoreSpec::parse(v);
  else if (key == "direction") {
    if (v == "planning") direction = DirectionPolicy::planning;
    else if (v == "known_positive") direction = DirectionPolicy::known_positive;
    else throw ConfigError("direction must be planning or known_positive");
  } else if (key == "bonferroni") {
    if (v == "two_sided") bonferroni_two_sided = true;
    else if (v == "one_sided") bonferroni_two_sided = false;
    else throw ConfigError("bonferroni must be two_sided or one_sided");
  } else if (key == "reps") reps = to_count(key, v);
  else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(v));
  else if (key == "threads") threads = static_cast<unsigned>(to_count(key, v));
  else throw ConfigError("unknown simulation key: " + key);
}

double draw_noise(NoiseLaw law, double scale, Rng& rng, NormalSampler& normal) {
  switch (law) {
    case NoiseLaw::normal:
      return scale * normal(rng);
    case NoiseLaw::logistic: {
      double u;
      do u = uniform01(rng);
      while (u == 0.0);
      return scale * std::log(u / (1 - u));
    }
    case NoiseLaw::t4: {
      const double z = normal(rng);
      double u1, u2;
      do u1 = uniform01(rng);
      while (u1 == 0.0);
      do u2 = uniform01(rng);
      while (u2 == 0.0);
      const double chi4 = -2.0 * std::log(u1 * u2);
      return scale * z / std::sqrt(chi4 / 4.0);
    }
  }
  return 0.0;
}

MatchedSample gen_randomized(const SimConfig& config, std::uint64_t rep_seed) {
  return generate_pairs(config, rep_seed).sample;
}

double calibrate_alpha0(double target, const std::vector<double>& score,
                        const std::vector<double>& u, double gamma_data) {
  if (!(target > 0 && target < 1)) throw ConfigError("target treated share must lie in (0, 1)");
  if (score.empty() || score.size() != u.size())
    throw ConfigError("calibration needs one score and one u per subject");
  const double lg = std::log(gamma_data);
  auto gap = [&](double a0) {
    double s = 0;
    for (std::size_t i = 0; i < score.size(); ++i) s += expit(a0 + score[i] - lg * (u[i] > 0));
    return s / static_cast<double>(score.size()) - target;
  };
  double lo = -10, hi = 10;
  for (int i = 0; i < 30 && gap(lo) > 0; ++i) lo *= 2;
  for (int i = 0; i < 30 && gap(hi) < 0; ++i) hi *= 2;
  if (gap(lo) > 0 || gap(hi) < 0) throw NumericalError("could not bracket the intercept");
  for (int step = 0; step < 100; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double g = gap(mid);
    if (std::abs(g) < 1e-4) return mid;
    (g < 0 ? lo : hi) = mid;
  }
  throw NumericalError("intercept calibration did not reach the target share in 100 steps");
}

Subjects gen_confounded(const SimConfig& c, std::uint64_t rep_seed) {
  Rng rng(derive_seed(rep_seed, {0xc0f0}));
  NormalSampler normal;
  Subjects s;
  s.N = c.N;
  s.d = c.d;
  s.L = c.L;
  s.X.resize(c.N * c.d);
  for (auto& x : s.X) x = uniform01(rng);
  s.U.resize(c.N);
  for (std::size_t i = 0; i < c.N; ++i)
    s.U[i] = (1 + 0.5 * std::sin(3 * s.X[i * c.d])) * normal(rng);
  std::vector<double> mu(c.d);
  for (auto& m : mu) m = normal(rng);
  std::vector<double> beta(c.L * c.d);
  for (auto& b : beta) b = 1 + normal(rng);
  s.target_proportion = c.beta_proportion ? draw_beta_10_10(rng) : c.fixed_proportion;

  std::vector<double> lin(c.N, 0.0);
  for (std::size_t i = 0; i < c.N; ++i)
    for (std::size_t k = 0; k < c.d; ++k) lin[i] += s.X[i * c.d + k] * mu[k];
  const double gd = c.gamma_data_tracks_con ? c.gamma_con : c.gamma_data;
  s.alpha0 = calibrate_alpha0(s.target_proportion, lin, s.U, gd);
  s.Z.resize(c.N);
  for (std::size_t i = 0; i < c.N; ++i)
    s.Z[i] = uniform01(rng) < expit(s.alpha0 + lin[i] - std::log(gd) * (s.U[i] > 0)) ? 1 : 0;

  s.outcomes.resize(c.N * c.L);
  for (std::size_t i = 0; i < c.N; ++i)
    for (std::size_t l = 0; l < c.L; ++l) {
      double base = 0;
      for (std::size_t k = 0; k < c.d; ++k) base += beta[l * c.d + k] * s.X[i * c.d + k];
      const double eps = 0.5 * normal(rng);
      const double effect = c.effect(l);
      // signal outcomes are free of the unmeasured confounder
      const double control = effect != 0.0 ? base + eps : base + s.U[i] + eps;
      s.outcomes[i * c.L + l] = s.Z[i] ? control + effect : control;
    }
  return s;
}

LogisticFit fit_logistic(const std::vector<double>& X, std::size_t N, std::size_t d,
                         const std::vector<int>& Z) {
  Eigen::MatrixXd A(N, d + 1);
  Eigen::VectorXd y(N);
  for (std::size_t i = 0; i < N; ++i) {
    A(i, 0) = 1.0;
    for (std::size_t k = 0; k < d; ++k) A(i, k + 1) = X[i * d + k];
    y(i) = Z[i];
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d + 1);
  LogisticFit fit;
  for (int it = 1; it <= 50; ++it) {
    fit.iterations = it;
    Eigen::VectorXd eta = A * b;
    Eigen::VectorXd p = eta.unaryExpr([](double e) { return expit(e); });
    Eigen::VectorXd w = p.array() * (1 - p.array());
    w = w.cwiseMax(1e-10);
    Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
    Eigen::VectorXd step = H.ldlt().solve(A.transpose() * (y - p));
    if (!step.allFinite()) break;
    b += step;
    if (step.cwiseAbs().maxCoeff() < 1e-8) {
      fit.converged = true;
      break;
    }
  }
  fit.coef.assign(b.data(), b.data() + b.size());
  return fit;
}

MatchedSample propensity_match(const Subjects& s, double caliper_sd_mult,
                               std::vector<std::string> names) {
  const auto fit = fit_logistic(s.X, s.N, s.d, s.Z);
  std::vector<double> logit(s.N, fit.coef[0]);
  for (std::size_t i = 0; i < s.N; ++i)
    for (std::size_t k = 0; k < s.d; ++k) logit[i] += fit.coef[k + 1] * s.X[i * s.d + k];
  const double m = mean_of(logit);
  double ss = 0;
  for (double x : logit) ss += (x - m) * (x - m);
  const double sd = s.N > 1 ? std::sqrt(ss / static_cast<double>(s.N - 1)) : 0.0;
  const double caliper = caliper_sd_mult * sd;

  std::vector<std::size_t> treated;
  std::multimap<double, std::size_t> controls;
  for (std::size_t i = 0; i < s.N; ++i) {
    if (s.Z[i])
      treated.push_back(i);
    else
      controls.emplace(logit[i], i);
  }
  std::stable_sort(treated.begin(), treated.end(),
                   [&](std::size_t a, std::size_t b) { return logit[a] > logit[b]; });

  if (names.empty()) names = default_names(s.L);
  MatchedSample out;
  out.outcome_names = std::move(names);
  out.outcome_kinds.assign(s.L, OutcomeKind::continuous);
  auto unit = [&](std::size_t idx) {
    Unit u;
    u.z = s.Z[idx];
    u.outcomes.assign(s.outcomes.begin() + static_cast<long>(idx * s.L),
                      s.outcomes.begin() + static_cast<long>((idx + 1) * s.L));
    return u;
  };
  for (auto t : treated) {
    if (controls.empty()) break;
    auto hi = controls.lower_bound(logit[t]);
    auto best = controls.end();
    if (hi != controls.end()) best = hi;
    if (hi != controls.begin()) {
      auto lo = std::prev(hi);
      if (best == controls.end() || logit[t] - lo->first <= best->first - logit[t]) best = lo;
    }
    if (std::abs(best->first - logit[t]) > caliper) continue;
    MatchedSet set;
    set.id = std::to_string(out.sets.size());
    set.units.push_back(unit(t));
    set.units.push_back(unit(best->second));
    out.sets.push_back(std::move(set));
    controls.erase(best);
  }
  if (out.sets.empty()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "no pairs within the caliper (%.4g x SD of the logit = %.4g)",
                  caliper_sd_mult, caliper);
    throw MatchingError(buf);
  }
  return out;
}

MatchedSample expand_subpopulations(const MatchedSample& sample, const std::vector<int>& group,
                                    std::size_t K) {
  if (group.size() != sample.I()) throw ConfigError("one group label per set is required");
  MatchedSample out;
  const std::size_t L = sample.L();
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < K; ++k) {
      out.outcome_names.push_back(sample.outcome_names[l] + "_g" + std::to_string(k + 1));
      out.outcome_kinds.push_back(sample.outcome_kinds[l]);
    }
  out.sets = sample.sets;
  for (std::size_t i = 0; i < out.sets.size(); ++i) {
    const auto g = static_cast<std::size_t>(group[i]);
    if (g >= K) throw ConfigError("group label beyond K");
    for (std::size_t u = 0; u < out.sets[i].units.size(); ++u) {
      const auto& src = sample.sets[i].units[u].outcomes;
      std::vector<double> v(L * K, kMissing);
      for (std::size_t l = 0; l < L; ++l) v[l * K + g] = src[l];
      out.sets[i].units[u].outcomes = std::move(v);
    }
  }
  return out;
}

ReplicateResult run_replicate(const SimConfig& c, std::size_t rep) {
  ReplicateResult res;
  const std::size_t M = c.methods.size();
  res.tpr.assign(M, 0.0);
  res.false_rejection.assign(M, 0);
  res.selected.assign(M, 0);
  res.iterations.assign(M, 0);
  res.outcome_rejected.assign(M, std::vector<bool>(c.L, false));
  const std::uint64_t rep_seed = derive_seed(c.seed, {0x4e9, rep});
  try {
    MatchedSample sample;
    std::vector<int> group;
    if (c.assignment == Assignment::randomized) {
      auto g = generate_pairs(c, rep_seed);
      sample = std::move(g.sample);
      group = std::move(g.group);
    } else {
      const auto subjects = gen_confounded(c, rep_seed);
      sample = c.matching == Matching::propensity_caliper
                   ? propensity_match(subjects, c.caliper)
                   : pair_subjects_randomly(subjects, rep_seed);
    }
    const MatchedSample original = sample;
    const bool subpops = !c.subpop_props.empty();
    const std::size_t K = subpops ? c.subpop_props.size() : 1;
    if (subpops) sample = expand_subpopulations(original, group, K);
    const std::size_t H = sample.L();
    // hypothesis h belongs to outcome h / K
    std::vector<bool> nonnull(H, false);
    for (std::size_t h = 0; h < H; ++h)
      nonnull[h] = subpops ? c.subpop_tau[h / K][h % K] != 0.0 : c.effect(h) != 0.0;
    const auto signal = c.signal_outcomes();

    ScreeningPlan plan;
    plan.gamma_con = c.gamma_con;
    plan.alpha = c.alpha;
    plan.alpha_plan = c.alpha_plan;
    plan.alpha_coverage = c.alpha_coverage;
    plan.alpha_l = c.alpha_l;
    plan.r = c.r;
    plan.B = c.B;
    plan.specs = {c.spec};
    plan.seed = derive_seed(rep_seed, {0x91a});
    plan.threads = 1;
    if (c.direction == DirectionPolicy::known_positive) plan.directions.assign(H, 1);
    bool need_sigma = false;
    for (const auto& m : c.methods)
      need_sigma = need_sigma || m.rfind("sensval", 0) == 0 || m.rfind("approx", 0) == 0;
    plan.method = need_sigma ? Method::sensval : Method::naive;

    const auto sp = split(sample, c.r, derive_seed(rep_seed, {0x5b1}));
    std::vector<PlanningSummary> summaries;
    bool have_summaries = false;

    for (std::size_t m = 0; m < M; ++m) {
      const auto& name = c.methods[m];
      const auto colon = name.find(':');
      const auto base = name.substr(0, colon);
      std::vector<bool> hyp_rej(H, false);
      std::size_t tested = 0;
      int iterations = 1;
      if (base == "bonferroni") {
        ScreeningPlan pb = plan;
        if (c.bonferroni_two_sided) {
          auto b = bonferroni_full(sample, pb);
          for (auto h : b.rejected) hyp_rej[h] = true;
        } else {
          const auto ids = all_ids(sample);
          for (std::size_t h = 0; h < H; ++h) {
            try {
              const double p =
                  worst_case_p(score(differences(sample, h, 1, ids), c.spec), c.gamma_con).upper;
              hyp_rej[h] = p <= c.alpha / static_cast<double>(H);
            } catch (const EmptyOutcomeError&) {
            }
          }
        }
        tested = H;
      } else {
        if (!have_summaries) {
          summaries = summarize_planning(sample, sp, plan);
          have_summaries = true;
        }
        if (base == "oracle") {
          std::vector<std::size_t> truth;
          for (std::size_t h = 0; h < H; ++h)
            if (nonnull[h]) truth.push_back(h);
          tested = truth.size();
          for (auto h : truth) {
            try {
              const int dir = summaries[h].usable ? summaries[h].direction : 1;
              const double p = worst_case_p(
                  score(differences(sample, h, dir, sp.analysis_ids), c.spec), c.gamma_con).upper;
              hyp_rej[h] = p <= c.alpha / static_cast<double>(truth.size());
            } catch (const EmptyOutcomeError&) {
            }
          }
        } else {
          ScreeningPlan pm = plan;
          pm.method = parse_method(base);
          if (colon != std::string::npos) pm.alpha_l = AlphaPolicy::parse(name.substr(colon + 1));
          const auto sel = select_outcomes(summaries, pm);
          const auto levels = analysis_levels(sel, pm, H);
          const auto rep_out = analyze(sample, sp, sel, levels, summaries, pm);
          for (auto h : rep_out.rejected) hyp_rej[h] = true;
          tested = sel.selected.size();
          iterations = sel.iterations;
        }
      }
      for (std::size_t h = 0; h < H; ++h) {
        if (!hyp_rej[h]) continue;
        res.outcome_rejected[m][subpops ? h / K : h] = true;
        if (!nonnull[h]) res.false_rejection[m] = 1;
      }
      std::size_t hits = 0;
      for (auto l : signal) hits += res.outcome_rejected[m][l];
      res.tpr[m] = signal.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(signal.size());
      res.selected[m] = tested;
      res.iterations[m] = iterations;
    }
  } catch (const Error& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

const MethodEstimate& PowerEstimate::at(const std::string& method) const {
  for (const auto& m : methods)
    if (m.method == method) return m;
  throw ConfigError("method not in estimate: " + method);
}

PowerEstimate run_experiment(const SimConfig& config) {
  config.validate();
  std::vector<ReplicateResult> results(config.reps);
  parallel_for(config.reps, config.threads,
               [&](std::size_t rep) { results[rep] = run_replicate(config, rep); });

  PowerEstimate est;
  est.config_name = config.name;
  est.reps_requested = config.reps;
  const std::size_t M = config.methods.size();
  std::vector<std::vector<double>> tpr(M), fr(M), sel(M);
  std::vector<std::vector<double>> outcome_hits(M, std::vector<double>(config.L, 0.0));
  for (const auto& r : results) {
    if (!r.ok) {
      ++est.reps_excluded;
      if (est.errors.size() < 20) est.errors.push_back(r.error);
      continue;
    }
    ++est.reps_used;
    for (std::size_t m = 0; m < M; ++m) {
      tpr[m].push_back(r.tpr[m]);
      fr[m].push_back(r.false_rejection[m]);
      sel[m].push_back(static_cast<double>(r.selected[m]));
      for (std::size_t l = 0; l < config.L; ++l) outcome_hits[m][l] += r.outcome_rejected[m][l];
    }
  }
  if (est.reps_used == 0)
    throw NumericalError("every replicate failed: " +
                         (est.errors.empty() ? std::string() : est.errors.front()));
  est.se_degenerate = est.reps_used == 1;
  for (std::size_t m = 0; m < M; ++m) {
    MethodEstimate me;
    me.method = config.methods[m];
    me.reps = est.reps_used;
    me.tpr = mean_of(tpr[m]);
    me.tpr_se = se_of(tpr[m]);
    me.fwer = mean_of(fr[m]);
    me.fwer_se = se_of(fr[m]);
    me.mean_selected = mean_of(sel[m]);
    me.outcome_rejection_rate.resize(config.L);
    for (std::size_t l = 0; l < config.L; ++l)
      me.outcome_rejection_rate[l] = outcome_hits[m][l] / static_cast<double>(est.reps_used);
    est.methods.push_back(std::move(me));
  }
  return est;
}

std::vector<SweepPoint> run_sweep(const SimConfig& config, const std::string& sweep) {
  const auto eq = sweep.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("sweep must look like key=v1,v2");
  const auto key = sweep.substr(0, eq);
  const auto values = split_list(sweep.substr(eq + 1), ',');
  if (values.empty()) throw ConfigError("sweep has no values");
  std::vector<SweepPoint> out;
  for (const auto& v : values) {
    SimConfig c = config;
    c.set(key, v);
    out.push_back({key, v, run_experiment(c)});
  }
  return out;
}

void write_power_csv_header(std::ostream& out) {
  out << "config,key,value,method,tpr,tpr_se,fwer,fwer_se,mean_tested,reps_used,reps_excluded\n";
}

void write_power_csv(const PowerEstimate& est, std::ostream& out, const std::string& key,
                     const std::string& value) {
  for (const auto& m : est.methods)
    out << est.config_name << ',' << key << ',' << value << ',' << m.method << ','
        << format_double(m.tpr) << ',' << format_double(m.tpr_se) << ',' << format_double(m.fwer)
        << ',' << format_double(m.fwer_se) << ',' << format_double(m.mean_selected) << ','
        << est.reps_used << ',' << est.reps_excluded << '\n';
}

}  // namespace splitscreen
