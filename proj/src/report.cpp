#include "splitscreen/report.hpp"

#include "splitscreen/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>

namespace splitscreen {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_selection_csv(const SelectionReport& rep, std::ostream& out) {
  out << "outcome,kappa_plan,sigma_F_hat,selected,alpha_l,analysis_p_upper,rejected,direction,"
         "I_plan,I_analysis,selection_margin,note\n";
  for (const auto& a : rep.outcomes) {
    out << csv_field(a.name) << ',' << format_double(a.kappa_plan) << ','
        << format_double(a.sigma_F_hat) << ',' << (a.selected ? 1 : 0) << ','
        << format_double(a.alpha_l) << ','
        << (a.selected ? format_double(a.analysis_p_upper) : std::string()) << ','
        << (a.rejected ? 1 : 0) << ',' << a.direction << ',' << a.I_plan << ','
        << a.I_analysis << ',' << format_double(a.selection_margin) << ',' << csv_field(a.note)
        << '\n';
  }
}

nlohmann::json selection_json(const SelectionReport& rep) {
  nlohmann::json j;
  j["method"] = to_string(rep.method);
  j["gamma_con"] = rep.gamma_con;
  j["alpha"] = rep.alpha;
  j["planning_sets"] = rep.I_planning;
  j["analysis_sets"] = rep.I_analysis;
  j["alpha_iterations"] = rep.iterations;
  j["alpha_converged"] = rep.converged;
  auto names = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> out;
    for (auto l : ids) out.push_back(rep.outcomes[l].name);
    return out;
  };
  j["selected"] = names(rep.selected);
  j["rejected"] = names(rep.rejected);
  j["outcomes"] = nlohmann::json::array();
  for (const auto& a : rep.outcomes) {
    nlohmann::json o{{"name", a.name},
                     {"usable", a.usable},
                     {"direction", a.direction},
                     {"I_plan", a.I_plan},
                     {"kappa_plan", a.kappa_plan},
                     {"sigma_F_hat", a.sigma_F_hat},
                     {"selection_margin", a.selection_margin},
                     {"selected", a.selected},
                     {"alpha_l", a.alpha_l},
                     {"rejected", a.rejected}};
    if (a.selected) {
      o["I_analysis"] = a.I_analysis;
      o["analysis_p_upper"] = a.analysis_p_upper;
    }
    if (!a.note.empty()) o["note"] = a.note;
    j["outcomes"].push_back(std::move(o));
  }
  return j;
}

std::vector<std::size_t> RejectionTable::reported_rows() const {
  const std::size_t L = outcome_names.size();
  std::vector<std::size_t> rows;
  std::vector<std::size_t> last(L, 0), hits(L, 0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t g = 0; g < gamma_grid.size(); ++g)
      for (std::size_t m = 0; m < methods.size(); ++m)
        if (rejected[g][m][l]) {
          last[l] = g + 1;
          ++hits[l];
        }
  for (std::size_t l = 0; l < L; ++l)
    if (hits[l]) rows.push_back(l);
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    if (last[a] != last[b]) return last[a] > last[b];
    return hits[a] > hits[b];
  });
  return rows;
}

RejectionTable build_rejection_table(const MatchedSample& sample, const ScreeningPlan& plan,
                                     std::span<const double> gamma_grid) {
  if (gamma_grid.empty()) throw ConfigError("gamma grid is empty");
  RejectionTable t;
  t.alpha = plan.alpha;
  t.gamma_grid.assign(gamma_grid.begin(), gamma_grid.end());
  t.outcome_names = sample.outcome_names;
  const std::size_t L = sample.L();
  const auto sp = split(sample, plan.r, plan.seed);
  const bool pairs = sample.mode() == SampleMode::pairs;

  ScreeningPlan sv_plan = plan;
  sv_plan.method = pairs ? Method::sensval : Method::sensval_full;
  std::vector<PlanningSummary> shared;
  if (pairs) shared = summarize_planning(sample, sp, sv_plan);

  for (double g : gamma_grid) {
    ScreeningPlan pg = sv_plan;
    pg.gamma_con = g;
    std::vector<std::size_t> tested;
    std::vector<std::vector<bool>> rej;

    auto bonf = bonferroni_full(sample, pg);
    tested.push_back(bonf.tested);
    std::vector<bool> bonf_rej(L, false);
    for (auto l : bonf.rejected) bonf_rej[l] = true;
    rej.push_back(std::move(bonf_rej));

    const auto summaries = pairs ? shared : summarize_planning(sample, sp, pg);
    for (Method m : {Method::naive, pg.method}) {
      ScreeningPlan pm = pg;
      pm.method = m;
      auto sel = select_outcomes(summaries, pm);
      auto levels = analysis_levels(sel, pm, L);
      auto rep = analyze(sample, sp, sel, levels, summaries, pm);
      tested.push_back(rep.selected.size());
      std::vector<bool> r(L, false);
      for (auto l : rep.rejected) r[l] = true;
      rej.push_back(std::move(r));
    }
    t.tested.push_back(std::move(tested));
    t.rejected.push_back(std::move(rej));
  }
  return t;
}

nlohmann::json rejection_table_json(const RejectionTable& t) {
  nlohmann::json j;
  j["alpha"] = t.alpha;
  j["gamma_grid"] = t.gamma_grid;
  j["methods"] = t.methods;
  j["columns"] = nlohmann::json::array();
  for (std::size_t g = 0; g < t.gamma_grid.size(); ++g)
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
      std::vector<std::string> names;
      for (std::size_t l = 0; l < t.outcome_names.size(); ++l)
        if (t.rejected[g][m][l]) names.push_back(t.outcome_names[l]);
      j["columns"].push_back({{"gamma_con", t.gamma_grid[g]},
                              {"method", t.methods[m]},
                              {"tested", t.tested[g][m]},
                              {"rejected", names}});
    }
  j["rows"] = nlohmann::json::array();
  for (auto l : t.reported_rows()) {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t g = 0; g < t.gamma_grid.size(); ++g) {
      nlohmann::json per;
      for (std::size_t m = 0; m < t.methods.size(); ++m)
        per[t.methods[m]] = static_cast<bool>(t.rejected[g][m][l]);
      cells.push_back(per);
    }
    j["rows"].push_back({{"outcome", t.outcome_names[l]}, {"rejected", cells}});
  }
  return j;
}

void write_rejection_table_text(const RejectionTable& t, std::ostream& out) {
  const auto rows = t.reported_rows();
  std::size_t width = 12;
  for (auto l : rows) width = std::max(width, t.outcome_names[l].size() + 2);
  const std::size_t cell = 7;
  auto pad = [&](const std::string& s, std::size_t w) {
    out << s;
    for (std::size_t i = s.size(); i < w; ++i) out << ' ';
  };
  pad("gamma_con", width);
  for (double g : t.gamma_grid)
    for (std::size_t m = 0; m < t.methods.size(); ++m) pad(m == 0 ? format_double(g) : "", cell);
  out << '\n';
  pad("method", width);
  for (std::size_t g = 0; g < t.gamma_grid.size(); ++g)
    for (const auto& m : t.methods) pad(m.substr(0, 5), cell);
  out << '\n';
  pad("no. tested", width);
  for (std::size_t g = 0; g < t.gamma_grid.size(); ++g)
    for (std::size_t m = 0; m < t.methods.size(); ++m) pad(std::to_string(t.tested[g][m]), cell);
  out << '\n';
  for (auto l : rows) {
    pad(t.outcome_names[l], width);
    for (std::size_t g = 0; g < t.gamma_grid.size(); ++g)
      for (std::size_t m = 0; m < t.methods.size(); ++m) {
        out << (t.rejected[g][m][l] ? "✓" : ".");
        for (std::size_t i = 1; i < cell; ++i) out << ' ';
      }
    out << '\n';
  }
}

}  // namespace splitscreen
