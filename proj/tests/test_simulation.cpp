#include "support.hpp"

#include "splitscreen/errors.hpp"
#include "splitscreen/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace splitscreen;

namespace {

double expit(double x) { return 1 / (1 + std::exp(-x)); }

SimConfig small_config() {
  auto c = preset("sec3.2");
  c.reps = 12;
  c.B = 40;
  c.threads = 1;
  return c;
}

Subjects toy_subjects(Rng& rng, std::size_t N, std::size_t d) {
  Subjects s;
  s.N = N;
  s.d = d;
  s.L = 1;
  s.X.resize(N * d);
  for (auto& x : s.X) x = uniform01(rng);
  s.Z.resize(N);
  s.outcomes.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    double lin = -0.5;
    for (std::size_t k = 0; k < d; ++k) lin += (k + 1) * 0.5 * s.X[i * d + k];
    s.Z[i] = uniform01(rng) < expit(lin - 0.5) ? 1 : 0;
    s.outcomes[i] = testgen::normal(rng);
  }
  return s;
}

}  // namespace

TEST_CASE("every preset is valid") {
  for (const auto& name : preset_names()) {
    INFO(name);
    auto c = preset(name);
    CHECK_NOTHROW(c.validate());
    CHECK(c.name == name);
  }
  CHECK_THROWS_AS(preset("sec9"), ConfigError);
}

TEST_CASE("named presets carry their sizes") {
  auto a = preset("sec3.1");
  CHECK(a.N == 1000);
  CHECK(a.L == 500);
  CHECK(a.signal_outcomes().size() == 5);
  CHECK(a.gamma_con == 3.5);
  auto b = preset("sec3.2");
  CHECK(b.N == 200);
  CHECK(b.L == 20);
  CHECK(b.tau == 0.75);
  CHECK(b.gamma_con == 1.5);
  CHECK(b.B == 250);
  CHECK(preset("data-inspired").L == 93);
  CHECK(preset("large-sample-uc").gamma_data_tracks_con);
}

TEST_CASE("key=value settings and json round trip") {
  SimConfig c;
  c.set("N", "300");
  c.set("signals", "2");
  c.set("tau", "0.4");
  c.set("methods", "naive;sensval:dynamic");
  c.set("noise", "t4");
  CHECK(c.N == 300);
  CHECK(c.signals == std::vector<std::size_t>{0, 1});
  CHECK(c.effect(1) == 0.4);
  CHECK(c.effect(2) == 0.0);
  CHECK(c.noise == NoiseLaw::t4);
  CHECK_NOTHROW(c.validate());
  SimConfig d;
  d.apply_json(c.to_json());
  CHECK(d.to_json() == c.to_json());
  CHECK_THROWS_AS(c.set("colour", "red"), ConfigError);
  CHECK_THROWS_AS(c.set("N", "ten"), ConfigError);
  CHECK_THROWS_AS(c.set("noise", "cauchy"), ConfigError);
  c.set("methods", "holm");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(d.apply_json(nlohmann::json::parse(R"({"colour": 1})")), ConfigError);
}

TEST_CASE("nonnull proportion marks leading outcomes") {
  SimConfig c;
  c.L = 40;
  c.set("nonnull", "0.1");
  CHECK(c.signal_outcomes() == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("noise laws have the right spread") {
  Rng rng(61);
  NormalSampler normal;
  const int n = 200000;
  const std::pair<NoiseLaw, double> laws[] = {
      {NoiseLaw::normal, 1.0}, {NoiseLaw::logistic, M_PI * M_PI / 3}, {NoiseLaw::t4, 2.0}};
  for (auto [law, variance] : laws) {
    double m = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = draw_noise(law, 1.0, rng, normal);
      m += x;
      m2 += x * x;
    }
    m /= n;
    CHECK(std::abs(m) < 0.02);
    CHECK(m2 / n == doctest::Approx(variance).epsilon(0.05));
  }
}

TEST_CASE("randomized pairs carry the effect") {
  auto c = small_config();
  c.N = 4000;
  c.L = 3;
  c.signals = {1};
  c.tau = 0.8;
  c.treated_count = TreatedCount::complete;
  auto s = gen_randomized(c, 5);
  CHECK(s.I() == 2000);
  CHECK(s.mode() == SampleMode::pairs);
  for (std::size_t l = 0; l < 3; ++l) {
    auto y = differences(s, l).y;
    double m = 0;
    for (double v : y) m += v;
    m /= y.size();
    // pair differences have variance 2
    CHECK(std::abs(m - c.effect(l)) < 4 * std::sqrt(2.0 / y.size()));
  }
  auto again = gen_randomized(c, 5);
  CHECK(differences(again, 0).y == differences(s, 0).y);
}

TEST_CASE("intercept calibration hits the target share") {
  std::vector<double> zeros(100, 0.0), u(100, 1.0);
  CHECK(std::abs(calibrate_alpha0(0.5, zeros, u, 1.0)) < 1e-3);
  Rng rng(62);
  std::vector<double> score(500), uu(500);
  for (auto& v : score) v = 2 * testgen::normal(rng);
  for (auto& v : uu) v = testgen::normal(rng);
  double prev = -1e9;
  for (double target : {0.1, 0.3, 0.5, 0.71, 0.9}) {
    const double a0 = calibrate_alpha0(target, score, uu, 2.5);
    double mean = 0;
    for (std::size_t i = 0; i < 500; ++i) mean += expit(a0 + score[i] - std::log(2.5) * (uu[i] > 0));
    CHECK(mean / 500 == doctest::Approx(target).epsilon(1e-3));
    CHECK(a0 > prev);
    prev = a0;
  }
  CHECK_THROWS_AS(calibrate_alpha0(1.0, score, uu, 1.0), ConfigError);
}

TEST_CASE("logistic fit solves the score equations") {
  Rng rng(63);
  auto s = toy_subjects(rng, 3000, 3);
  auto fit = fit_logistic(s.X, s.N, s.d, s.Z);
  CHECK(fit.converged);
  std::vector<double> grad(4, 0.0);
  for (std::size_t i = 0; i < s.N; ++i) {
    double eta = fit.coef[0];
    for (std::size_t k = 0; k < 3; ++k) eta += fit.coef[k + 1] * s.X[i * 3 + k];
    const double resid = s.Z[i] - expit(eta);
    grad[0] += resid;
    for (std::size_t k = 0; k < 3; ++k) grad[k + 1] += resid * s.X[i * 3 + k];
  }
  for (double g : grad) CHECK(std::abs(g) < 1e-6);
}

TEST_CASE("propensity matching respects the caliper") {
  Rng rng(64);
  auto s = toy_subjects(rng, 1500, 2);
  auto fit = fit_logistic(s.X, s.N, s.d, s.Z);
  std::map<double, std::size_t> by_outcome;
  for (std::size_t i = 0; i < s.N; ++i) by_outcome[s.outcomes[i]] = i;
  std::vector<double> logit(s.N);
  double mean = 0;
  for (std::size_t i = 0; i < s.N; ++i) {
    logit[i] = fit.coef[0] + fit.coef[1] * s.X[i * 2] + fit.coef[2] * s.X[i * 2 + 1];
    mean += logit[i] / s.N;
  }
  double ss = 0;
  for (double v : logit) ss += (v - mean) * (v - mean);
  const double caliper = 0.2 * std::sqrt(ss / (s.N - 1));

  auto m = propensity_match(s, 0.2);
  CHECK_NOTHROW(m.validate());
  CHECK(m.mode() == SampleMode::pairs);
  std::set<std::size_t> used;
  for (const auto& set : m.sets) {
    const auto a = by_outcome.at(set.units[0].outcomes[0]);
    const auto b = by_outcome.at(set.units[1].outcomes[0]);
    CHECK(s.Z[a] + s.Z[b] == 1);
    CHECK(std::abs(logit[a] - logit[b]) <= caliper * (1 + 1e-9));
    CHECK(used.insert(a).second);
    CHECK(used.insert(b).second);
  }
  std::size_t treated = 0, controls = 0;
  for (int z : s.Z) (z ? treated : controls)++;
  CHECK(m.I() <= std::min(treated, controls));
  CHECK(m.I() > 0);
}

TEST_CASE("matching fails without controls") {
  Rng rng(65);
  auto s = toy_subjects(rng, 200, 2);
  std::fill(s.Z.begin(), s.Z.end(), 1);
  CHECK_THROWS_AS(propensity_match(s, 0.2), MatchingError);
}

TEST_CASE("confounded generator is reproducible") {
  auto c = preset("data-inspired");
  c.N = 400;
  c.L = 10;
  auto a = gen_confounded(c, 3), b = gen_confounded(c, 3);
  CHECK(a.Z == b.Z);
  CHECK(a.outcomes == b.outcomes);
  CHECK(a.target_proportion == 0.71);
  double share = 0;
  for (int z : a.Z) share += z;
  CHECK(share / 400 == doctest::Approx(0.71).epsilon(0.15));
}

TEST_CASE("sub-population expansion masks other groups") {
  Rng rng(66);
  auto s = testgen::pair_sample(rng, 6, {0.5, 0.1});
  std::vector<int> group{0, 1, 2, 0, 1, 2};
  auto e = expand_subpopulations(s, group, 3);
  CHECK(e.L() == 6);
  CHECK(e.outcome_names[4] == "y2_g2");
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t k = 0; k < 3; ++k) {
        const double v = e.sets[i].units[0].outcomes[l * 3 + k];
        if (static_cast<int>(k) == group[i])
          CHECK(v == s.sets[i].units[0].outcomes[l]);
        else
          CHECK(std::isnan(v));
      }
  CHECK_THROWS_AS(expand_subpopulations(s, {0, 1}, 3), ConfigError);
}

TEST_CASE("experiments are identical across thread counts") {
  auto c = small_config();
  auto a = run_experiment(c);
  c.threads = 4;
  auto b = run_experiment(c);
  REQUIRE(a.methods.size() == b.methods.size());
  for (std::size_t m = 0; m < a.methods.size(); ++m) {
    CHECK(a.methods[m].tpr == b.methods[m].tpr);
    CHECK(a.methods[m].fwer == b.methods[m].fwer);
    CHECK(a.methods[m].mean_selected == b.methods[m].mean_selected);
  }
  c.seed = 2;
  auto d = run_experiment(c);
  bool differs = false;
  for (std::size_t m = 0; m < a.methods.size(); ++m) differs |= a.methods[m].tpr != d.methods[m].tpr;
  CHECK(differs);
}

TEST_CASE("replicate results are bounded") {
  auto c = small_config();
  for (std::size_t rep = 0; rep < 5; ++rep) {
    auto r = run_replicate(c, rep);
    REQUIRE(r.ok);
    for (std::size_t m = 0; m < c.methods.size(); ++m) {
      CHECK(r.tpr[m] >= 0);
      CHECK(r.tpr[m] <= 1);
      CHECK(r.selected[m] <= c.L);
    }
  }
}

TEST_CASE("one replicate flags degenerate standard errors") {
  auto c = small_config();
  c.reps = 1;
  auto e = run_experiment(c);
  CHECK(e.se_degenerate);
  CHECK(e.reps_used == 1);
  for (const auto& m : e.methods) CHECK(m.tpr_se == 0.0);
}

TEST_CASE("no effects means no true positives") {
  auto c = small_config();
  c.signals.clear();
  c.reps = 20;
  auto e = run_experiment(c);
  for (const auto& m : e.methods) CHECK(m.tpr == 0.0);
  CHECK_THROWS_AS(e.at("holm"), ConfigError);
}

TEST_CASE("sweeps expand one key") {
  auto c = small_config();
  c.reps = 3;
  auto pts = run_sweep(c, "tau=0.5,1");
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].key == "tau");
  CHECK(pts[1].value == "1");
  CHECK_THROWS_AS(run_sweep(c, "tau"), ConfigError);
  std::ostringstream os;
  write_power_csv_header(os);
  write_power_csv(pts[0].estimate, os, "tau", "0.5");
  std::string header;
  std::istringstream in(os.str());
  std::getline(in, header);
  CHECK(header == "config,key,value,method,tpr,tpr_se,fwer,fwer_se,mean_tested,reps_used,reps_excluded");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == static_cast<int>(c.methods.size()));
}
