#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace splitscreen {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline constexpr std::size_t kMaxSetSize = 50;

enum class OutcomeKind { continuous, binary };
enum class SampleMode { pairs, full };

struct Unit {
  int z = 0;
  std::vector<double> outcomes;  // NaN marks a missing value
};

struct MatchedSet {
  std::string id;
  std::vector<Unit> units;

  std::size_t treated_count() const;
  // Index of the lone treated unit (or lone control when treated are the majority).
  std::size_t lone_index() const;
  bool lone_is_treated() const;
};

struct MatchedSample {
  std::vector<MatchedSet> sets;
  std::vector<std::string> outcome_names;
  std::vector<OutcomeKind> outcome_kinds;

  std::size_t I() const { return sets.size(); }
  std::size_t L() const { return outcome_names.size(); }
  SampleMode mode() const;
  // Throws StructureError on the first set that breaks the pair / full-match rules.
  void validate() const;
  std::size_t outcome_index(const std::string& name) const;
};

// Column mapping for unit-level CSV files. An empty outcome list means every
// column other than the set id and treatment columns. Binary outcomes are
// detected automatically (all observed values in {0,1}) unless listed.
struct CsvSchema {
  std::string set_column = "set_id";
  std::string treatment_column = "z";
  std::vector<std::string> outcomes;
  std::vector<std::string> binary;
  bool differenced = false;  // rows are pairs: set_id,<y_outcome...>

  static CsvSchema from_json_file(const std::string& path);
};

MatchedSample ingest_csv(const std::string& path, const CsvSchema& schema = {});
MatchedSample parse_csv(const std::string& text, const CsvSchema& schema = {});

struct SplitHandle {
  std::vector<std::size_t> planning_ids;
  std::vector<std::size_t> analysis_ids;
  double r = 0.2;
  std::uint64_t seed = 0;
};

SplitHandle split(std::size_t I, double r, std::uint64_t seed);
inline SplitHandle split(const MatchedSample& sample, double r, std::uint64_t seed) {
  return split(sample.I(), r, seed);
}

struct PairDifferences {
  std::size_t outcome_index = 0;
  std::vector<double> y;
  int direction = 1;
  std::size_t dropped_sets = 0;
  std::vector<std::size_t> set_ids;  // retained set indices, aligned with y
};

std::vector<std::size_t> all_ids(const MatchedSample& sample);

PairDifferences differences(const MatchedSample& sample, std::size_t outcome, int direction,
                            std::span<const std::size_t> ids);
inline PairDifferences differences(const MatchedSample& sample, std::size_t outcome,
                                   int direction = 1) {
  auto ids = all_ids(sample);
  return differences(sample, outcome, direction, ids);
}

int estimate_direction(const MatchedSample& sample, std::size_t outcome,
                       std::span<const std::size_t> ids);
inline int estimate_direction(const MatchedSample& sample, std::size_t outcome) {
  auto ids = all_ids(sample);
  return estimate_direction(sample, outcome, ids);
}
// Sign of the mean with ties broken to +1; throws EmptyOutcomeError when empty.
int direction_of(std::span<const double> y);

MatchedSample subset(const MatchedSample& sample, std::span<const std::size_t> ids);

// Builds a pair-mode sample from a matrix of treated-minus-control
// differences, diffs[i][l]; the control unit carries zeros.
MatchedSample pairs_from_differences(const std::vector<std::vector<double>>& diffs,
                                     std::vector<std::string> names = {});

}  // namespace splitscreen
