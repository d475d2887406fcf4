#include "support.hpp"

#include "splitscreen/cli.hpp"
#include "splitscreen/report.hpp"
#include "splitscreen/screening.hpp"
#include "splitscreen/simulation.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace splitscreen;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "splitscreen_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Unit-level pairs with two continuous outcomes and one binary outcome.
std::string write_pairs(const fs::path& dir, std::size_t I, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream csv;
  csv << "set_id,z,gain,null,event\n";
  for (std::size_t i = 0; i < I; ++i) {
    const double g = testgen::normal(rng), n = testgen::normal(rng);
    const int e1 = uniform01(rng) < 0.6, e0 = uniform01(rng) < 0.3;
    csv << i << ",1," << 0.8 + g << ',' << n << ',' << e1 << '\n';
    csv << i << ",0," << testgen::normal(rng) << ',' << testgen::normal(rng) << ',' << e0 << '\n';
  }
  const auto path = (dir / "pairs.csv").string();
  std::ofstream(path) << csv.str();
  return path;
}

std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

int system_exit(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"screen", "--data", "/no/such/file.csv"}).code == 2);
  CHECK(cli({"simulate", "--preset", "nope"}).code == 2);
  auto dir = scratch("usage");
  auto data = write_pairs(dir, 50, 1);
  CHECK(cli({"screen", "--data", data, "--r", "1.5"}).code == 2);
  CHECK(cli({"screen", "--data", data, "--alpha-l", "holm"}).code == 2);
  CHECK(cli({"screen", "--data", data, "--stat", "mcnemar"}).code == 2);
}

TEST_CASE("data errors exit with 3") {
  auto dir = scratch("data");
  const auto bad = (dir / "bad.csv").string();
  std::ofstream(bad) << "set_id,z,y\na,1,1\na,1,2\n";
  auto r = cli({"sensitivity", "--data", bad});
  CHECK(r.code == 3);
  CHECK(r.err.find("'a'") != std::string::npos);
  const auto garbled = (dir / "garbled.csv").string();
  std::ofstream(garbled) << "set_id,z,y\na,1,x\na,0,2\n";
  CHECK(cli({"sensitivity", "--data", garbled}).code == 3);
}

TEST_CASE("installed binary reports the same exit codes") {
  const std::string exe = SPLITSCREEN_CLI_PATH;
  CHECK(system_exit(exe + " --version > /dev/null") == 0);
  CHECK(system_exit(exe + " screen > /dev/null 2>&1") == 2);
  auto dir = scratch("binary");
  const auto bad = (dir / "bad.csv").string();
  std::ofstream(bad) << "set_id,z,y\na,1,1\n";
  CHECK(system_exit(exe + " sensitivity --data " + bad + " > /dev/null 2>&1") == 3);
}

TEST_CASE("sensitivity at gamma one has equal p-value columns") {
  auto dir = scratch("sens");
  auto data = write_pairs(dir, 80, 2);
  auto r = cli({"sensitivity", "--data", data, "--gamma", "1"});
  REQUIRE(r.code == 0);
  auto rows = rows_of(r.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0][0] == "outcome");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][4] == rows[i][5]);
  // the binary outcome gets McNemar with an exact tail
  CHECK(rows[3][0] == "event");
  CHECK(rows[3][6] == "1");
  CHECK(rows[1][6] == "0");
  auto normal = rows_of(cli({"sensitivity", "--data", data, "--normal"}).out);
  CHECK(normal[3][6] == "0");
}

TEST_CASE("sensitivity values match the library") {
  auto dir = scratch("sens_lib");
  auto data = write_pairs(dir, 120, 3);
  auto rows = rows_of(cli({"sensitivity", "--data", data, "--gamma", "1.7", "--alpha", "0.1"}).out);
  auto sample = ingest_csv(data);
  for (std::size_t l = 0; l < 2; ++l) {
    auto s = score(differences(sample, l), ScoreSpec::wilcoxon());
    auto sv = sensitivity_value(s, 0.1, 1.7);
    CHECK(rows[l + 1][4] == format_double(sv.p_upper));
    CHECK(rows[l + 1][8] == format_double(sv.gamma_star));
  }
}

TEST_CASE("screen output matches the library") {
  auto dir = scratch("screen");
  auto data = write_pairs(dir, 300, 4);
  auto r = cli({"screen", "--data", data, "--gamma", "1.3", "--seed", "7", "--bootstrap", "80"});
  REQUIRE(r.code == 0);
  auto sample = ingest_csv(data);
  ScreeningPlan plan;
  plan.gamma_con = 1.3;
  plan.seed = 7;
  plan.B = 80;
  plan.alpha_l = AlphaPolicy::parse("dynamic");
  plan.specs = default_specs(sample);
  std::ostringstream expect;
  write_selection_csv(screen(sample, plan), expect);
  CHECK(r.out == expect.str());
}

TEST_CASE("screen writes files and a manifest") {
  auto dir = scratch("manifest");
  auto data = write_pairs(dir, 200, 5);
  const auto out = (dir / "out").string();
  auto r = cli({"screen", "--data", data, "--out", out, "--bootstrap", "40"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(fs::path(out) / "selection.csv"));
  CHECK(fs::exists(fs::path(out) / "selection.json"));
  std::ifstream in(fs::path(out) / "manifest.json");
  auto m = nlohmann::json::parse(in);
  CHECK(m["command"] == "screen");
  CHECK(m["tool_version"] == kVersion);
  CHECK(m["inputs"][0]["sha1"] == file_digest(data));
  CHECK(m["inputs"][0]["sha1"].get<std::string>().size() == 40);
  CHECK(m["config"]["alpha_l"] == "dynamic");
  CHECK(m["outputs"].size() == 2);
}

TEST_CASE("sha1 digest of a known string") {
  auto dir = scratch("sha");
  const auto path = (dir / "abc.txt").string();
  std::ofstream(path, std::ios::binary) << "abc";
  CHECK(file_digest(path) == "a9993e364706816aba3e25717850c26c9cd0d89d");
}

TEST_CASE("rejection table over a gamma grid") {
  auto dir = scratch("table");
  auto data = write_pairs(dir, 250, 6);
  auto r = cli({"screen", "--data", data, "--gamma-grid", "1,1.5,2", "--bootstrap", "40"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("no. tested") != std::string::npos);
  CHECK(r.out.find("\ngain ") != std::string::npos);
}

TEST_CASE("scree has one row per grid point") {
  auto dir = scratch("scree");
  auto data = write_pairs(dir, 200, 7);
  auto rows = rows_of(cli({"scree", "--data", data, "--gamma-grid", "1,2,3", "--method", "naive"}).out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"gamma_con", "selected"});
  CHECK(rows[1][0] == "1");
  CHECK(std::stoi(rows[3][1]) <= std::stoi(rows[1][1]));
  auto def = rows_of(cli({"scree", "--data", data, "--method", "naive"}).out);
  CHECK(def.size() == 9);
}

TEST_CASE("simulate matches the library and honours overrides") {
  auto r = cli({"simulate", "--preset", "sec3.2", "--reps", "6", "--bootstrap", "30", "--threads", "2"});
  REQUIRE(r.code == 0);
  auto c = preset("sec3.2");
  c.reps = 6;
  c.B = 30;
  std::ostringstream expect;
  write_power_csv_header(expect);
  write_power_csv(run_experiment(c), expect);
  CHECK(r.out == expect.str());

  auto s = cli({"simulate", "--preset", "sec3.2", "--reps", "3", "--bootstrap", "20", "--sweep",
                "tau=0.25,0.5"});
  REQUIRE(s.code == 0);
  CHECK(rows_of(s.out).size() == 1 + 2 * c.methods.size());

  auto one = cli({"simulate", "--preset", "sec3.2", "--reps", "1", "--set", "B=20"});
  CHECK(one.code == 0);
  CHECK(!one.err.empty());
  CHECK(cli({"simulate", "--preset", "sec3.2", "--set", "colour=red"}).code == 2);
}

TEST_CASE("simulate reads a json configuration") {
  auto dir = scratch("simjson");
  auto c = preset("sec3.2");
  c.reps = 2;
  c.B = 20;
  c.methods = {"naive"};
  const auto path = (dir / "config.json").string();
  std::ofstream(path) << c.to_json().dump();
  auto r = cli({"simulate", "--config", path});
  REQUIRE(r.code == 0);
  CHECK(rows_of(r.out).size() == 2);
}
