#include "splitscreen/errors.hpp"
#include "splitscreen/simulation.hpp"

namespace splitscreen {

namespace {

SimConfig randomized(std::string name, std::size_t N, std::size_t L, std::size_t signals,
                     double tau, double gamma_con) {
  SimConfig c;
  c.name = std::move(name);
  c.N = N;
  c.L = L;
  c.signals.resize(signals);
  for (std::size_t l = 0; l < signals; ++l) c.signals[l] = l;
  c.tau = tau;
  c.gamma_con = gamma_con;
  c.alpha_l = AlphaPolicy::parse("bonferroni");
  return c;
}

SimConfig confounded(std::string name, std::size_t N, std::size_t d, std::size_t L, bool uc) {
  SimConfig c;
  c.name = std::move(name);
  c.N = N;
  c.d = d;
  c.L = L;
  c.signals = {0, 1, 2, 3, 4};
  c.tau = 2.5;
  c.assignment = Assignment::confounded;
  c.matching = Matching::propensity_caliper;
  c.gamma_data_tracks_con = uc;
  c.gamma_con = 2.5;
  c.direction = DirectionPolicy::known_positive;
  c.alpha_l = AlphaPolicy::parse("bonferroni");
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"sec3.1",        "sec3.2",         "large-sample", "large-sample-uc",
          "data-inspired", "data-inspired-uc", "sparse",     "nhyp",
          "subpop",        "ustat",          "global-null"};
}

SimConfig preset(const std::string& name) {
  if (name == "sec3.1") {
    auto c = randomized(name, 1000, 500, 5, 1.0, 3.5);
    c.methods = {"bonferroni", "naive"};
    return c;
  }
  if (name == "sec3.2") return randomized(name, 200, 20, 5, 0.75, 1.5);
  if (name == "large-sample") return confounded(name, 5000, 20, 250, false);
  if (name == "large-sample-uc") return confounded(name, 5000, 20, 250, true);
  if (name == "data-inspired" || name == "data-inspired-uc") {
    auto c = confounded(name, 757, 33, 93, name == "data-inspired-uc");
    c.beta_proportion = false;
    c.fixed_proportion = 0.71;
    return c;
  }
  if (name == "sparse") {
    auto c = randomized(name, 1500, 250, 12, 1.0, 3.5);
    c.methods = {"bonferroni", "naive", "sensval"};
    return c;
  }
  if (name == "nhyp") {
    auto c = randomized(name, 1000, 100, 5, 1.0, 3.5);
    c.methods = {"bonferroni", "naive"};
    return c;
  }
  if (name == "subpop") {
    auto c = randomized(name, 2000, 10, 0, 0.0, 2.0);
    c.subpop_props = {0.10, 0.15, 0.20, 0.20, 0.35};
    c.subpop_tau.assign(10, std::vector<double>(5, 0.0));
    const double big = 2.0 / 3.0, small = 1.0 / 3.0;
    c.subpop_tau[0] = {big, big, big, big, big};
    c.subpop_tau[1] = {big, big, big, 0.0, 0.0};
    c.subpop_tau[2] = {big, big, small, small, 0.0};
    return c;
  }
  if (name == "ustat") {
    auto c = randomized(name, 200, 20, 4, 0.75, 1.5);
    c.methods = {"sensval"};
    c.reps = 100;
    return c;
  }
  if (name == "global-null") {
    auto c = randomized(name, 200, 20, 0, 0.0, 1.0);
    c.methods = {"bonferroni", "naive", "sensval"};
    c.reps = 2000;
    return c;
  }
  throw ConfigError("unknown preset: " + name);
}

}  // namespace splitscreen
