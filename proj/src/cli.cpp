#include "splitscreen/cli.hpp"

#include "splitscreen/errors.hpp"
#include "splitscreen/fullmatch.hpp"
#include "splitscreen/matched_data.hpp"
#include "splitscreen/report.hpp"
#include "splitscreen/screening.hpp"
#include "splitscreen/sensitivity.hpp"
#include "splitscreen/simulation.hpp"

#include <CLI11.hpp>
#include <boost/uuid/detail/sha1.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace splitscreen {

namespace fs = std::filesystem;
using nlohmann::json;

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  boost::uuids::detail::sha1 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) h.process_bytes(buf, static_cast<std::size_t>(in.gcount()));
  }
  boost::uuids::detail::sha1::digest_type d;
  h.get_digest(d);
  char hex[41];
  for (int i = 0; i < 5; ++i) std::snprintf(hex + 8 * i, 9, "%08x", d[i]);
  return hex;
}

namespace {

struct Flags {
  std::string data, schema, out;
  double gamma = 1.0;
  std::string gamma_grid;
  double alpha = 0.05;
  double alpha_plan = 0.05;
  double alpha_coverage = 0.05;
  std::string alpha_l = "dynamic";
  double r = 0.2;
  std::string method;
  std::string stat;
  std::size_t B = kDefaultBootstrap;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string direction;  // empty: estimate on the planning sample; "positive"
  std::string full_scale = "gamma";
  std::string full_bias = "bootstrap";
  // simulate
  std::string preset, config;
  std::size_t reps = 0;
  std::string sweep;
  std::vector<std::string> sets;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad gamma grid entry: " + item);
    }
  }
  if (out.empty()) throw ConfigError("gamma grid is empty");
  return out;
}

const std::vector<double> kDefaultGrid{1, 1.25, 1.5, 2, 2.5, 3, 4, 6};

MatchedSample load(const Flags& f) {
  CsvSchema schema;
  if (!f.schema.empty()) schema = CsvSchema::from_json_file(f.schema);
  auto sample = ingest_csv(f.data, schema);
  sample.validate();
  return sample;
}

ScreeningPlan make_plan(const Flags& f, const MatchedSample& sample) {
  ScreeningPlan p;
  p.gamma_con = f.gamma;
  p.alpha = f.alpha;
  p.alpha_plan = f.alpha_plan;
  p.alpha_coverage = f.alpha_coverage;
  p.alpha_l = AlphaPolicy::parse(f.alpha_l);
  p.r = f.r;
  p.B = f.B;
  p.seed = f.seed;
  p.threads = f.threads;
  if (!f.method.empty())
    p.method = parse_method(f.method);
  else
    p.method = sample.mode() == SampleMode::full ? Method::sensval_full : Method::sensval;
  p.specs = f.stat.empty() ? default_specs(sample) : std::vector<ScoreSpec>{ScoreSpec::parse(f.stat)};
  if (f.direction == "positive")
    p.directions.assign(sample.L(), 1);
  else if (!f.direction.empty() && f.direction != "estimate")
    throw ConfigError("direction must be estimate or positive");
  if (f.full_scale == "gamma") p.full_scale = FullScale::gamma;
  else if (f.full_scale == "kappa") p.full_scale = FullScale::kappa;
  else throw ConfigError("full scale must be gamma or kappa");
  if (f.full_bias == "bootstrap") p.full_bias = FullBias::bootstrap;
  else if (f.full_bias == "analytic") p.full_bias = FullBias::analytic;
  else throw ConfigError("full bias must be bootstrap or analytic");
  p.validate();
  return p;
}

json plan_json(const ScreeningPlan& p) {
  json specs = json::array();
  for (const auto& s : p.specs) specs.push_back(s.to_string());
  return {{"gamma_con", p.gamma_con},
          {"alpha", p.alpha},
          {"alpha_plan", p.alpha_plan},
          {"alpha_coverage", p.alpha_coverage},
          {"alpha_l", p.alpha_l.to_string()},
          {"r", p.r},
          {"method", to_string(p.method)},
          {"bootstrap", p.B},
          {"stat", specs},
          {"direction", p.directions.empty() ? "estimate" : "positive"},
          {"seed", p.seed}};
}

class Outputs {
public:
  Outputs(const Flags& f, std::string command, std::ostream& out)
      : dir_(f.out), out_(out) {
    manifest_["command"] = std::move(command);
    manifest_["tool_version"] = kVersion;
    manifest_["seed"] = f.seed;
    manifest_["started"] = timestamp();
    manifest_["inputs"] = json::array();
    manifest_["outputs"] = json::array();
    if (!dir_.empty()) fs::create_directories(dir_);
  }

  void input(const std::string& path) {
    if (!path.empty()) manifest_["inputs"].push_back({{"path", path}, {"sha1", file_digest(path)}});
  }
  void config(json j) { manifest_["config"] = std::move(j); }

  // Writes text to <dir>/<name> when an output directory was given; echoes it
  // to stdout when echo is set.
  void emit(const std::string& name, const std::string& text, bool echo) {
    if (!dir_.empty()) {
      std::ofstream f(fs::path(dir_) / name, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + (fs::path(dir_) / name).string());
      f << text;
      manifest_["outputs"].push_back(name);
    }
    if (echo) out_ << text;
  }

  void finish() {
    if (dir_.empty()) return;
    manifest_["finished"] = timestamp();
    std::ofstream f(fs::path(dir_) / "manifest.json");
    f << manifest_.dump(2) << '\n';
  }

private:
  std::string dir_;
  std::ostream& out_;
  json manifest_;
};

void add_plan_flags(CLI::App* c, Flags& f) {
  c->add_option("--data", f.data, "matched-sample CSV")->required()->check(CLI::ExistingFile);
  c->add_option("--schema", f.schema, "JSON column mapping")->check(CLI::ExistingFile);
  c->add_option("--alpha", f.alpha, "family-wise level");
  c->add_option("--alpha-plan", f.alpha_plan, "planning level");
  c->add_option("--alpha-coverage", f.alpha_coverage, "bootstrap coverage level");
  c->add_option("--alpha-l", f.alpha_l, "bonferroni | dynamic | fixed:a1,a2,...");
  c->add_option("--r", f.r, "planning fraction");
  c->add_option("--method", f.method, "naive | sensval | approx | sensval_full");
  c->add_option("--stat", f.stat, "sign | wilcoxon | mcnemar | ustat:m,lo,hi | psi:@file");
  c->add_option("--bootstrap", f.B, "bootstrap replicates");
  c->add_option("--seed", f.seed, "random seed");
  c->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  c->add_option("--direction", f.direction, "estimate | positive");
  c->add_option("--full-scale", f.full_scale, "gamma | kappa");
  c->add_option("--full-bias", f.full_bias, "bootstrap | analytic");
  c->add_option("--out", f.out, "output directory");
}

int cmd_screen(const Flags& f, std::ostream& out) {
  const auto sample = load(f);
  const auto plan = make_plan(f, sample);
  Outputs o(f, "screen", out);
  o.input(f.data);
  o.input(f.schema);
  auto cfg = plan_json(plan);
  if (!f.gamma_grid.empty()) {
    const auto grid = parse_grid(f.gamma_grid);
    cfg["gamma_grid"] = grid;
    o.config(cfg);
    const auto table = build_rejection_table(sample, plan, grid);
    std::ostringstream text;
    write_rejection_table_text(table, text);
    o.emit("rejection_table.txt", text.str(), true);
    o.emit("rejection_table.json", rejection_table_json(table).dump(2) + "\n", false);
    o.finish();
    return 0;
  }
  o.config(cfg);
  const auto rep = screen(sample, plan);
  std::ostringstream csv;
  write_selection_csv(rep, csv);
  o.emit("selection.csv", csv.str(), true);
  o.emit("selection.json", selection_json(rep).dump(2) + "\n", false);
  o.finish();
  return 0;
}

int cmd_sensitivity(const Flags& f, bool normal_only, std::ostream& out) {
  const auto sample = load(f);
  Outputs o(f, "sensitivity", out);
  o.input(f.data);
  o.input(f.schema);
  const auto specs =
      f.stat.empty() ? default_specs(sample) : std::vector<ScoreSpec>{ScoreSpec::parse(f.stat)};
  json cfg{{"gamma", f.gamma}, {"alpha", f.alpha}, {"normal_only", normal_only}};
  cfg["stat"] = json::array();
  for (const auto& s : specs) cfg["stat"].push_back(s.to_string());
  o.config(cfg);
  const bool full = sample.mode() == SampleMode::full;
  std::ostringstream csv;
  csv << "outcome,I,T,gamma,p_upper,p_lower,exact,kappa_star,gamma_star,saturated,note\n";
  const auto ids = all_ids(sample);
  for (std::size_t l = 0; l < sample.L(); ++l) {
    const auto& spec = specs.size() == 1 ? specs[0] : specs[l];
    std::string name = sample.outcome_names[l];
    if (name.find_first_of(",\"") != std::string::npos) name = "\"" + name + "\"";
    try {
      if (full) {
        const auto scored = statistic_full(sample, l, spec, ids, 1);
        const auto sv = sensitivity_value_full(scored, f.alpha);
        csv << name << ',' << scored.I() << ',' << format_double(scored.T_g) << ','
            << format_double(f.gamma) << ',' << format_double(worst_case_p_full(scored, f.gamma))
            << ',' << format_double(worst_case_p_full(scored, 1.0 / f.gamma)) << ",0,,"
            << format_double(sv.gamma_star) << ',' << (sv.saturated ? 1 : 0) << ",\n";
      } else {
        const auto s = score(differences(sample, l, 1, ids), spec);
        const bool exact = spec.equal_scores() && !normal_only;
        const auto sv = sensitivity_value(s, f.alpha, f.gamma, exact);
        csv << name << ',' << s.I << ',' << format_double(s.T) << ',' << format_double(f.gamma)
            << ',' << format_double(sv.p_upper) << ',' << format_double(sv.p_lower) << ','
            << (sv.used_exact_tail ? 1 : 0) << ',' << format_double(sv.kappa_star) << ','
            << format_double(sv.gamma_star) << ',' << (sv.saturated ? 1 : 0) << ",\n";
      }
    } catch (const EmptyOutcomeError& e) {
      csv << name << ",0,,,,,,,,,\"" << e.what() << "\"\n";
    }
  }
  o.emit("sensitivity.csv", csv.str(), true);
  o.finish();
  return 0;
}

int cmd_scree(const Flags& f, std::ostream& out) {
  const auto sample = load(f);
  const auto plan = make_plan(f, sample);
  const auto grid = f.gamma_grid.empty() ? kDefaultGrid : parse_grid(f.gamma_grid);
  Outputs o(f, "scree", out);
  o.input(f.data);
  o.input(f.schema);
  auto cfg = plan_json(plan);
  cfg["gamma_grid"] = grid;
  o.config(cfg);
  std::ostringstream csv;
  csv << "gamma_con,selected\n";
  for (const auto& row : scree(sample, plan, grid))
    csv << format_double(row.gamma_con) << ',' << row.selected << '\n';
  o.emit("scree.csv", csv.str(), true);
  o.finish();
  return 0;
}

int cmd_simulate(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  SimConfig c;
  if (!f.preset.empty()) c = preset(f.preset);
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ParseError("simulation config " + f.config + ": " + e.what());
    }
    c.apply_json(j);
  }
  if (sub.count("--gamma")) c.gamma_con = f.gamma;
  if (sub.count("--alpha")) c.alpha = f.alpha;
  if (sub.count("--alpha-plan")) c.alpha_plan = f.alpha_plan;
  if (sub.count("--alpha-coverage")) c.alpha_coverage = f.alpha_coverage;
  if (sub.count("--alpha-l")) c.alpha_l = AlphaPolicy::parse(f.alpha_l);
  if (sub.count("--r")) c.r = f.r;
  if (sub.count("--stat")) c.spec = ScoreSpec::parse(f.stat);
  if (sub.count("--bootstrap")) c.B = f.B;
  if (sub.count("--seed")) c.seed = f.seed;
  if (sub.count("--threads")) c.threads = f.threads;
  if (f.reps) c.reps = f.reps;
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + kv);
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();

  Flags mf = f;
  mf.seed = c.seed;
  Outputs o(mf, "simulate", out);
  o.input(f.config);
  auto cfg = c.to_json();
  if (!f.sweep.empty()) cfg["sweep"] = f.sweep;
  o.config(cfg);

  std::ostringstream csv;
  write_power_csv_header(csv);
  json results = json::array();
  auto record = [&](const PowerEstimate& est, const std::string& key, const std::string& value) {
    write_power_csv(est, csv, key, value);
    json r{{"key", key},
           {"value", value},
           {"reps_used", est.reps_used},
           {"reps_excluded", est.reps_excluded},
           {"se_degenerate", est.se_degenerate},
           {"errors", est.errors}};
    r["methods"] = json::array();
    for (const auto& m : est.methods)
      r["methods"].push_back({{"method", m.method},
                              {"tpr", m.tpr},
                              {"tpr_se", m.tpr_se},
                              {"fwer", m.fwer},
                              {"fwer_se", m.fwer_se},
                              {"mean_tested", m.mean_selected}});
    results.push_back(std::move(r));
    if (est.se_degenerate) err << "note: one replicate, standard errors are zero\n";
    if (est.reps_excluded)
      err << "note: " << est.reps_excluded << " replicate(s) excluded: " << est.errors.front()
          << '\n';
  };
  if (f.sweep.empty()) {
    record(run_experiment(c), "", "");
  } else {
    for (const auto& pt : run_sweep(c, f.sweep)) record(pt.estimate, pt.key, pt.value);
  }
  o.emit("power.csv", csv.str(), true);
  o.emit("power.json", results.dump(2) + "\n", false);
  o.finish();
  return 0;
}

int exit_code(Error::Category c) {
  switch (c) {
    case Error::Category::usage:
      return 2;
    case Error::Category::data:
      return 3;
    case Error::Category::numerical:
      return 4;
  }
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Split-sample screening of outcomes with sensitivity analysis", "splitscreen"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;
  bool normal_only = false;

  auto* sc = app.add_subcommand("screen", "split, select outcomes, test them at gamma_con");
  add_plan_flags(sc, f);
  sc->add_option("--gamma", f.gamma, "sensitivity parameter gamma_con");
  sc->add_option("--gamma-grid", f.gamma_grid, "comma list; writes a rejection table");

  auto* sv = app.add_subcommand("sensitivity", "worst-case p-values and sensitivity values");
  sv->add_option("--data", f.data, "matched-sample CSV")->required()->check(CLI::ExistingFile);
  sv->add_option("--schema", f.schema, "JSON column mapping")->check(CLI::ExistingFile);
  sv->add_option("--gamma", f.gamma, "sensitivity parameter");
  sv->add_option("--alpha", f.alpha, "level for the sensitivity value");
  sv->add_option("--stat", f.stat, "score statistic");
  sv->add_flag("--normal", normal_only, "normal tail even for equal scores");
  sv->add_option("--out", f.out, "output directory");

  auto* sr = app.add_subcommand("scree", "number of selected outcomes across gamma_con");
  add_plan_flags(sr, f);
  sr->add_option("--gamma-grid", f.gamma_grid, "comma list of gamma_con values");

  auto* sm = app.add_subcommand("simulate", "power and FWER by simulation");
  sm->add_option("--preset", f.preset, "named configuration")
      ->check(CLI::IsMember(preset_names()));
  sm->add_option("--config", f.config, "JSON configuration")->check(CLI::ExistingFile);
  sm->add_option("--reps", f.reps, "replicates");
  sm->add_option("--sweep", f.sweep, "key=v1,v2,...");
  sm->add_option("--set", f.sets, "key=value override (repeatable)");
  sm->add_option("--gamma", f.gamma, "gamma_con");
  sm->add_option("--alpha", f.alpha, "family-wise level");
  sm->add_option("--alpha-plan", f.alpha_plan, "planning level");
  sm->add_option("--alpha-coverage", f.alpha_coverage, "bootstrap coverage level");
  sm->add_option("--alpha-l", f.alpha_l, "bonferroni | dynamic | fixed:...");
  sm->add_option("--r", f.r, "planning fraction");
  sm->add_option("--stat", f.stat, "score statistic");
  sm->add_option("--bootstrap", f.B, "bootstrap replicates");
  sm->add_option("--seed", f.seed, "random seed");
  sm->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  sm->add_option("--out", f.out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sc->parsed()) return cmd_screen(f, out);
    if (sv->parsed()) return cmd_sensitivity(f, normal_only, out);
    if (sr->parsed()) return cmd_scree(f, out);
    if (sm->parsed()) return cmd_simulate(f, *sm, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace splitscreen
