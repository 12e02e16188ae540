#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbness/config_io.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = LBNESS_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      kCli + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.stdout_text = slurp(out);
  r.stderr_text = slurp(err);
  return r;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "lbness_cli_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const lbness::SystemSpec& spec, const fs::path& dir,
                      const std::string& name) {
  const fs::path p = dir / name;
  std::ofstream out(p);
  out << lbness::system_to_json(spec).dump(2) << "\n";
  return p;
}

std::string slurp_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parse a header-less CSV into column -> values.
std::map<std::string, std::vector<std::string>> parse_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> cols;
  std::map<std::string, std::vector<std::string>> table;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      cols = cells;
      first = false;
      continue;
    }
    for (size_t i = 0; i < cells.size() && i < cols.size(); ++i)
      table[cols[i]].push_back(cells[i]);
  }
  return table;
}

}  // namespace

TEST_CASE("conventions page prints and exits cleanly") {
  const fs::path dir = temp_dir();
  const RunResult r = run_cli("--conventions", dir);
  CHECK(r.exit_code == 0);
  CHECK(r.stdout_text.find("hbar = 1") != std::string::npos);
  CHECK(r.stdout_text.find("-2 e pi") != std::string::npos);
}

TEST_CASE("equilibrium current run: exit 0 and zero currents") {
  const fs::path dir = temp_dir();
  const lbness::SystemSpec spec =
      testutil::resonant_level_spec(0.2, 0.4, 0.4, 50.0, 0.1, 50.0, 0.1);
  const fs::path cfg = write_config(spec, dir, "equilibrium.json");
  const fs::path out = dir / "current.csv";
  const RunResult r =
      run_cli("current --config " + cfg.string() + " --out " + out.string(), dir);
  CHECK(r.exit_code == 0);
  const auto table = parse_csv(out);
  REQUIRE(table.count("charge_current[e*E/hbar]") == 1);
  const auto& col = table.at("charge_current[e*E/hbar]");
  REQUIRE(col.size() == 3);  // two leads + sum row
  for (const std::string& cell : col) CHECK(std::abs(std::stod(cell)) < 1e-9);
}

TEST_CASE("malformed config: exit 3 naming the missing field") {
  const fs::path dir = temp_dir();
  const fs::path cfg = dir / "broken.json";
  std::ofstream(cfg) << R"({"charge":1.0,"leads":[],"dot":{"dim":0,"matrix":[]},"couplings":[]})";
  const fs::path out = dir / "x.csv";
  const RunResult r =
      run_cli("current --config " + cfg.string() + " --out " + out.string(), dir);
  CHECK(r.exit_code == 3);
  CHECK(r.stderr_text.find("schema") != std::string::npos);
}

TEST_CASE("invalid physics: exit 1 with the validation message") {
  const fs::path dir = temp_dir();
  lbness::SystemSpec spec = testutil::resonant_level_spec();
  spec.leads[0].hopping = -1.0;
  const fs::path cfg = write_config(spec, dir, "invalid.json");
  const RunResult r = run_cli(
      "current --config " + cfg.string() + " --out " + (dir / "y.csv").string(), dir);
  CHECK(r.exit_code == 1);
  CHECK(r.stderr_text.find("hopping must be positive") != std::string::npos);
}

TEST_CASE("spectrum lists bands and intersections") {
  const fs::path dir = temp_dir();
  lbness::SystemSpec spec = testutil::bond_junction_spec(1.0);
  spec.leads[1].onsite = 3.0;
  const fs::path cfg = write_config(spec, dir, "shifted.json");
  const fs::path out = dir / "spectrum.csv";
  const RunResult r = run_cli(
      "spectrum --config " + cfg.string() + " --out " + out.string() + " --no-header", dir);
  CHECK(r.exit_code == 0);
  const auto table = parse_csv(out);
  REQUIRE(table.count("kind") == 1);
  REQUIRE(table.at("kind").size() == 3);  // two bands + one intersection
  CHECK(table.at("kind").back() == "intersection");
  CHECK(std::stod(table.at("lo[E]").back()) == doctest::Approx(1.0));
  CHECK(std::stod(table.at("hi[E]").back()) == doctest::Approx(2.0));
}

TEST_CASE("transmission scan emits unit transmission for the perfect chain") {
  const fs::path dir = temp_dir();
  const lbness::SystemSpec spec = testutil::bond_junction_spec(1.0);
  const fs::path cfg = write_config(spec, dir, "chain.json");
  const fs::path out = dir / "trans.csv";
  const RunResult r = run_cli("transmission --config " + cfg.string() + " --out " +
                                  out.string() + " --emin -1.9 --emax 1.9 --n 41",
                              dir);
  CHECK(r.exit_code == 0);
  const auto table = parse_csv(out);
  REQUIRE(table.count("T_1_2[1]") == 1);
  REQUIRE(table.at("T_1_2[1]").size() == 41);
  for (const std::string& cell : table.at("T_1_2[1]"))
    CHECK(std::stod(cell) == doctest::Approx(1.0).epsilon(1e-8));
  for (const std::string& cell : table.at("unitarity_residual[1]"))
    CHECK(std::stod(cell) < 1e-8);
}

TEST_CASE("smatrix-check reports worst-case residuals") {
  const fs::path dir = temp_dir();
  const lbness::SystemSpec spec = testutil::three_terminal_flux_spec();
  const fs::path cfg = write_config(spec, dir, "ring.json");
  const fs::path out = dir / "check.json";
  const RunResult r = run_cli("smatrix-check --config " + cfg.string() + " --out " +
                                  out.string() + " --format json --n 101",
                              dir);
  CHECK(r.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(slurp_file(out));
  REQUIRE(doc.contains("rows"));
  REQUIRE(doc["rows"].size() == 1);
  CHECK(doc["rows"][0]["worst_unitarity_residual[1]"].get<double>() < 1e-8);
  CHECK(doc["rows"][0]["worst_optical_residual[1]"].get<double>() < 1e-8);
  CHECK(doc["rows"][0]["points_evaluated[1]"].get<int>() > 50);
}

TEST_CASE("identical invocations produce byte-identical artifacts") {
  const fs::path dir = temp_dir();
  const lbness::SystemSpec spec = testutil::three_terminal_flux_spec();
  const fs::path cfg = write_config(spec, dir, "det.json");
  const fs::path out1 = dir / "det1.csv";
  const fs::path out2 = dir / "det2.csv";
  const std::string args = "transmission --config " + cfg.string() + " --n 101 --no-header";
  CHECK(run_cli(args + " --out " + out1.string(), dir).exit_code == 0);
  CHECK(run_cli(args + " --out " + out2.string(), dir).exit_code == 0);
  const std::string a = slurp_file(out1);
  CHECK(!a.empty());
  CHECK(a == slurp_file(out2));

  // json format too
  const fs::path j1 = dir / "det1.json";
  const fs::path j2 = dir / "det2.json";
  CHECK(run_cli(args + " --format json --out " + j1.string(), dir).exit_code == 0);
  CHECK(run_cli(args + " --format json --out " + j2.string(), dir).exit_code == 0);
  CHECK(slurp_file(j1) == slurp_file(j2));
}

TEST_CASE("energy-current subcommand emits the energy report") {
  const fs::path dir = temp_dir();
  const lbness::SystemSpec spec =
      testutil::resonant_level_spec(0.2, 0.4, 0.4, 50.0, 0.5, 50.0, 0.1);
  const fs::path cfg = write_config(spec, dir, "biased.json");
  const fs::path out = dir / "energy.csv";
  const RunResult r =
      run_cli("energy-current --config " + cfg.string() + " --out " + out.string(), dir);
  CHECK(r.exit_code == 0);
  const auto table = parse_csv(out);
  REQUIRE(table.count("energy_current[E^2/hbar]") == 1);
  CHECK(std::abs(std::stod(table.at("energy_current[E^2/hbar]")[0])) > 1e-4);
}

TEST_CASE("ness-verify agrees with the quadrature within one percent") {
  const fs::path dir = temp_dir();
  const lbness::SystemSpec spec = testutil::resonant_level_spec();
  const fs::path cfg = write_config(spec, dir, "benchmark.json");
  const fs::path out = dir / "verify.csv";
  const RunResult r = run_cli(
      "ness-verify --config " + cfg.string() + " --out " + out.string(), dir);
  CHECK(r.exit_code == 0);
  const auto table = parse_csv(out);
  REQUIRE(table.count("charge_rel_deviation[1]") == 1);
  for (const std::string& cell : table.at("charge_rel_deviation[1]"))
    CHECK(std::stod(cell) < 0.01);
  for (const std::string& cell : table.at("charge_plateau_ok"))
    CHECK(cell == "1");
  // the energy side of the same run must agree too
  for (const std::string& cell : table.at("energy_rel_deviation[1]"))
    CHECK(std::stod(cell) < 0.02);
  for (const std::string& cell : table.at("energy_quadrature[E^2/hbar]"))
    CHECK(std::abs(std::stod(cell)) > 1e-3);
}
