#pragma once

#include "splitscreen/matched_data.hpp"
#include "splitscreen/screening.hpp"

#include <json.hpp>

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace splitscreen {

// One row per outcome: name, kappa_plan, sigma_F_hat, selected, alpha_l,
// analysis p at gamma_con, rejected.
void write_selection_csv(const SelectionReport& rep, std::ostream& out);
nlohmann::json selection_json(const SelectionReport& rep);

// Rejections of the full-sample Bonferroni baseline, Naive and Sens-Val across
// a grid of gamma_con values, all sharing one planning/analysis split.
struct RejectionTable {
  double alpha = 0.05;
  std::vector<double> gamma_grid;
  std::vector<std::string> methods{"bonferroni", "naive", "sensval"};
  std::vector<std::string> outcome_names;
  // tested[g][m], rejected[g][m][l]
  std::vector<std::vector<std::size_t>> tested;
  std::vector<std::vector<std::vector<bool>>> rejected;

  // Outcomes rejected by at least one method at some grid point, ordered by
  // how long they survive as gamma_con grows.
  std::vector<std::size_t> reported_rows() const;
};

RejectionTable build_rejection_table(const MatchedSample& sample, const ScreeningPlan& plan,
                                     std::span<const double> gamma_grid);
nlohmann::json rejection_table_json(const RejectionTable& table);
void write_rejection_table_text(const RejectionTable& table, std::ostream& out);

std::string format_double(double v);

}  // namespace splitscreen
