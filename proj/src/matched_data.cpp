#include "splitscreen/matched_data.hpp"

#include "splitscreen/errors.hpp"
#include "splitscreen/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace splitscreen {

std::size_t MatchedSet::treated_count() const {
  std::size_t n = 0;
  for (const auto& u : units) n += (u.z == 1);
  return n;
}

bool MatchedSet::lone_is_treated() const { return treated_count() == 1; }

std::size_t MatchedSet::lone_index() const {
  const int want = lone_is_treated() ? 1 : 0;
  for (std::size_t k = 0; k < units.size(); ++k)
    if (units[k].z == want) return k;
  return 0;
}

SampleMode MatchedSample::mode() const {
  for (const auto& s : sets)
    if (s.units.size() != 2) return SampleMode::full;
  return SampleMode::pairs;
}

void MatchedSample::validate() const {
  if (outcome_kinds.size() != outcome_names.size())
    throw StructureError("", "outcome kinds and names disagree in length");
  for (const auto& s : sets) {
    const std::size_t n = s.units.size();
    if (n < 2) throw StructureError(s.id, "fewer than two units");
    if (n > kMaxSetSize)
      throw StructureError(s.id, "set has " + std::to_string(n) + " units; the limit is " +
                                     std::to_string(kMaxSetSize));
    const std::size_t t = s.treated_count();
    if (n == 2 && t != 1) throw StructureError(s.id, "a pair needs exactly one treated unit");
    if (t != 1 && t != n - 1)
      throw StructureError(s.id, "set needs exactly one treated unit or exactly one control");
    for (const auto& u : s.units) {
      if (u.z != 0 && u.z != 1) throw StructureError(s.id, "treatment must be 0 or 1");
      if (u.outcomes.size() != L()) throw StructureError(s.id, "unit has wrong outcome count");
    }
  }
}

std::size_t MatchedSample::outcome_index(const std::string& name) const {
  auto it = std::find(outcome_names.begin(), outcome_names.end(), name);
  if (it == outcome_names.end()) throw ConfigError("unknown outcome '" + name + "'");
  return static_cast<std::size_t>(it - outcome_names.begin());
}

CsvSchema CsvSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("schema " + path + ": " + e.what());
  }
  CsvSchema s;
  s.set_column = j.value("set_id", s.set_column);
  s.treatment_column = j.value("treatment", s.treatment_column);
  s.outcomes = j.value("outcomes", std::vector<std::string>{});
  s.binary = j.value("binary", std::vector<std::string>{});
  s.differenced = j.value("format", std::string("units")) == "differences";
  return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  if (quoted) throw ParseError("unterminated quote", row);
  out.push_back(std::move(cell));
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_value(const std::string& raw, std::size_t row, const std::string& column) {
  std::string s = trim(raw);
  if (s.empty() || s == "NA") return kMissing;
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ParseError("column '" + column + "': cannot parse '" + s + "' as a number", row);
  return v;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("missing column '" + name + "'", 1);
  return static_cast<std::size_t>(it - header.begin());
}

bool looks_binary(const MatchedSample& s, std::size_t l) {
  bool any = false;
  for (const auto& set : s.sets)
    for (const auto& u : set.units) {
      double v = u.outcomes[l];
      if (std::isnan(v)) continue;
      if (v != 0.0 && v != 1.0) return false;
      any = true;
    }
  return any;
}

}  // namespace

MatchedSample parse_csv(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++row;
    if (!trim(line).empty()) header = split_csv_line(line, row);
  }
  if (header.empty()) throw ParseError("empty file");
  for (auto& h : header) h = trim(h);

  const std::size_t set_col = column_of(header, schema.set_column);
  std::size_t z_col = header.size();
  if (!schema.differenced) z_col = column_of(header, schema.treatment_column);

  std::vector<std::size_t> out_cols;
  MatchedSample sample;
  if (schema.outcomes.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != set_col && c != z_col) out_cols.push_back(c);
  } else {
    for (const auto& name : schema.outcomes) out_cols.push_back(column_of(header, name));
  }
  if (out_cols.empty()) throw ParseError("no outcome columns", 1);
  for (auto c : out_cols) sample.outcome_names.push_back(header[c]);

  std::unordered_map<std::string, std::size_t> set_pos;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line, row);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       row);
    std::string id = trim(cells[set_col]);
    if (id.empty()) throw ParseError("empty set id", row);
    auto [it, fresh] = set_pos.try_emplace(id, sample.sets.size());
    if (fresh) sample.sets.push_back(MatchedSet{id, {}});
    MatchedSet& set = sample.sets[it->second];

    std::vector<double> values;
    values.reserve(out_cols.size());
    for (auto c : out_cols) values.push_back(parse_value(cells[c], row, header[c]));

    if (schema.differenced) {
      if (!fresh) throw StructureError(id, "differenced format allows one row per pair");
      std::vector<double> zeros(values.size(), 0.0);
      for (std::size_t l = 0; l < values.size(); ++l)
        if (std::isnan(values[l])) zeros[l] = kMissing;
      set.units.push_back(Unit{1, std::move(values)});
      set.units.push_back(Unit{0, std::move(zeros)});
    } else {
      std::string zs = trim(cells[z_col]);
      int z;
      if (zs == "1")
        z = 1;
      else if (zs == "0")
        z = 0;
      else
        throw ParseError("treatment must be 0 or 1, found '" + zs + "'", row);
      set.units.push_back(Unit{z, std::move(values)});
    }
  }
  if (sample.sets.empty()) throw ParseError("no data rows");

  sample.outcome_kinds.assign(sample.L(), OutcomeKind::continuous);
  for (std::size_t l = 0; l < sample.L(); ++l) {
    bool declared = std::find(schema.binary.begin(), schema.binary.end(),
                              sample.outcome_names[l]) != schema.binary.end();
    if (declared || (!schema.differenced && looks_binary(sample, l)))
      sample.outcome_kinds[l] = OutcomeKind::binary;
  }
  sample.validate();
  return sample;
}

MatchedSample ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str(), schema);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

SplitHandle split(std::size_t I, double r, std::uint64_t seed) {
  if (!(r > 0.0 && r < 1.0)) throw DegenerateSplitError("split fraction must lie in (0, 1)");
  const auto n_plan = static_cast<std::size_t>(std::llround(r * static_cast<double>(I)));
  if (n_plan == 0 || n_plan >= I)
    throw DegenerateSplitError("round(r * I) = " + std::to_string(n_plan) + " with I = " +
                               std::to_string(I) + " leaves one side empty");
  std::vector<std::size_t> ids(I);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = make_rng(seed, {0x5eed5717ULL});
  shuffle(ids, rng);
  SplitHandle h;
  h.r = r;
  h.seed = seed;
  h.planning_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_plan));
  h.analysis_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_plan), ids.end());
  std::sort(h.planning_ids.begin(), h.planning_ids.end());
  std::sort(h.analysis_ids.begin(), h.analysis_ids.end());
  return h;
}

std::vector<std::size_t> all_ids(const MatchedSample& sample) {
  std::vector<std::size_t> ids(sample.I());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

PairDifferences differences(const MatchedSample& sample, std::size_t outcome, int direction,
                            std::span<const std::size_t> ids) {
  if (outcome >= sample.L()) throw ConfigError("outcome index out of range");
  if (direction != 1 && direction != -1) throw ConfigError("direction must be +1 or -1");
  PairDifferences d;
  d.outcome_index = outcome;
  d.direction = direction;
  d.y.reserve(ids.size());
  for (auto i : ids) {
    const MatchedSet& s = sample.sets.at(i);
    if (s.units.size() != 2) throw StructureError(s.id, "pair differences need pair mode");
    const Unit& a = s.units[0];
    const Unit& b = s.units[1];
    const Unit& t = a.z == 1 ? a : b;
    const Unit& c = a.z == 1 ? b : a;
    double rt = t.outcomes[outcome], rc = c.outcomes[outcome];
    if (std::isnan(rt) || std::isnan(rc)) {
      ++d.dropped_sets;
      continue;
    }
    d.y.push_back(direction * (rt - rc));
    d.set_ids.push_back(i);
  }
  if (d.y.empty())
    throw EmptyOutcomeError("outcome '" + sample.outcome_names[outcome] +
                            "' has no complete pairs");
  return d;
}

int direction_of(std::span<const double> y) {
  if (y.empty()) throw EmptyOutcomeError("no differences to estimate a direction from");
  double sum = 0;
  for (double v : y) sum += v;
  return sum < 0 ? -1 : 1;
}

int estimate_direction(const MatchedSample& sample, std::size_t outcome,
                       std::span<const std::size_t> ids) {
  return direction_of(differences(sample, outcome, 1, ids).y);
}

MatchedSample subset(const MatchedSample& sample, std::span<const std::size_t> ids) {
  MatchedSample out;
  out.outcome_names = sample.outcome_names;
  out.outcome_kinds = sample.outcome_kinds;
  out.sets.reserve(ids.size());
  for (auto i : ids) out.sets.push_back(sample.sets.at(i));
  return out;
}

MatchedSample pairs_from_differences(const std::vector<std::vector<double>>& diffs,
                                     std::vector<std::string> names) {
  MatchedSample s;
  const std::size_t L = diffs.empty() ? names.size() : diffs.front().size();
  if (names.empty())
    for (std::size_t l = 0; l < L; ++l) names.push_back("y" + std::to_string(l + 1));
  s.outcome_names = std::move(names);
  s.outcome_kinds.assign(L, OutcomeKind::continuous);
  s.sets.reserve(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    std::vector<double> zeros(L, 0.0);
    for (std::size_t l = 0; l < L; ++l)
      if (std::isnan(diffs[i][l])) zeros[l] = kMissing;
    s.sets.push_back(MatchedSet{std::to_string(i + 1), {Unit{1, diffs[i]}, Unit{0, zeros}}});
  }
  return s;
}

}  // namespace splitscreen
