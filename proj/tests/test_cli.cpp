#include "qdisp/cli.hpp"
#include "qdisp/fisher_bounds.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace qdisp;
using doctest::Approx;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

json cli_json(std::vector<std::string> args) {
  const auto r = cli(std::move(args));
  REQUIRE(r.code == 0);
  return json::parse(r.out);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qdisp-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Data rows of a CSV with '#' metadata, split into cells.
struct Csv {
  std::vector<std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    FAIL("missing column " << name);
    return -1;
  }
  double at(std::size_t row, const std::string& name) const { return std::stod(rows[row][col(name)]); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string c;
  while (std::getline(ss, c, ',')) cells.push_back(c);
  return cells;
}

Csv parse_csv(std::istream& is) {
  Csv csv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      csv.meta.push_back(line);
    } else if (csv.header.empty()) {
      csv.header = split(line);
    } else {
      csv.rows.push_back(split(line));
    }
  }
  return csv;
}

Csv read_csv(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is.good());
  return parse_csv(is);
}

Csv csv_text(const std::string& s) {
  std::istringstream is(s);
  return parse_csv(is);
}

}  // namespace

TEST_CASE("bounds: coherent probe gives the SQL") {
  const auto j = cli_json({"bounds", "--probe", "coherent"});
  CHECK(j["outputs"]["B_MI"].get<double>() == 2.0);
  CHECK(j["command"] == "bounds");
  CHECK(j["config"]["M"] == 1);
  CHECK(j["argv"].size() == 3);
  CHECK(j.contains("version"));
  CHECK(j.contains("wall_time_s"));
}

TEST_CASE("bounds: TMST below the switch uses the RLD branch") {
  const auto j = cli_json({"bounds", "--probe", "tmst", "--r", "0.3", "--N", "1"});
  CHECK(j["outputs"]["B_MI"].get<double>() == Approx(3.1294).epsilon(1e-4));
  CHECK(j["outputs"]["branch"] == "R");
  CHECK(j["outputs"]["r_ths"].get<double>() == Approx(0.8814).epsilon(1e-4));
  CHECK(j["outputs"]["r_sql"].get<double>() == Approx(0.5493).epsilon(1e-4));
}

TEST_CASE("bounds: prior-weighted pair") {
  const auto j = cli_json({"bounds", "--probe", "tmst", "--r", "1", "--N", "0.5", "--delta", "2"});
  CHECK(j["outputs"]["B_S"].get<double>() == Approx(closed_form::tmst_sld_prior(1, 0.5, 2)).epsilon(1e-14));
  CHECK(j["outputs"]["B_R"].get<double>() == Approx(closed_form::tmst_rld_prior(1, 0.5, 2)).epsilon(1e-14));
  CHECK(j["config"]["delta"].get<double>() == 2.0);
}

TEST_CASE("bounds: CSV, weights, shots and asymmetric probes") {
  const auto r = cli({"bounds", "--probe", "single", "--r", "0.2", "--N", "0.4", "--M", "4", "--G", "2,0,1", "--format",
                      "csv"});
  REQUIRE(r.code == 0);
  const auto csv = csv_text(r.out);
  CHECK(csv.meta.size() >= 3);
  REQUIRE(csv.rows.size() == 1);
  // G = diag(2, 1): tr[G cov] + singular values of G Im(J^{-1}), over M = 4
  const double expected = (1.8 * std::exp(0.4) + 0.9 * std::exp(-0.4) + 1.5) / 4;
  CHECK(csv.at(0, "B_MI") == Approx(expected).epsilon(1e-12));

  const auto a = cli_json({"bounds", "--probe", "tmst-asym", "--r", "0.5", "--N1", "0", "--N2", "1"});
  CHECK(a["config"]["probe"]["N2"].get<double>() == 1.0);
  CHECK(a["outputs"]["B_MI"].get<double>() > 0.0);
}

TEST_CASE("bounds: usage errors exit with code 2 and one line") {
  const std::vector<std::vector<std::string>> bad = {
      {"bounds", "--probe", "coherent", "--r", "1"},
      {"bounds", "--probe", "tmst-asym", "--r", "1", "--N1", "0"},
      {"bounds", "--probe", "tmst-asym", "--N", "1", "--N1", "0", "--N2", "1"},
      {"bounds", "--probe", "tmst", "--N1", "1"},
      {"bounds", "--probe", "squeezed"},
      {"bounds", "--probe", "tmst", "--G", "1,2"},
      {"bounds", "--probe", "tmst", "--G", "1,2,1"},
      {"bounds", "--probe", "tmst", "--G", "1,x,1"},
      {"bounds", "--delta", "-1"},
      {"bounds", "--M", "0"},
      {"bounds", "--format", "xml"},
      {"bounds", "--unknown"},
      {"bounds", "--probe", "tmst", "--N", "-1"},
      {},
      {"frobnicate"},
  };
  for (const auto& args : bad) {
    const auto r = cli(args);
    CHECK(r.code == kExitUsage);
    CHECK(r.out.empty());
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
}

TEST_CASE("help and version") {
  const auto h = cli({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("simulate") != std::string::npos);
  const auto v = cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("qdisp") != std::string::npos);
}

TEST_CASE("simulate examples") {
  const auto s = cli_json({"simulate", "--r", "1", "--N", "0.5", "--shots", "100000", "--seed", "7"});
  const auto& o = s["outputs"];
  CHECK(std::abs(o["mse_sum"].get<double>() - 4 * std::exp(-2.0)) < 4 * o["mse_sum_se"].get<double>());
  CHECK(o["analytic_target"].get<double>() == Approx(0.5413).epsilon(1e-4));
  CHECK(o["within_4se"] == true);
  CHECK(o["bound_B_MI"].get<double>() == Approx(closed_form::tmst_mi(1, 0.5)));
  CHECK(s["config"]["seed"] == 7);
  CHECK(s["config"]["workers"] == 1);

  const auto b = cli_json({"simulate", "--baseline", "--shots", "100000", "--seed", "7"});
  CHECK(std::abs(b["outputs"]["mse_sum"].get<double>() - 2.0) < 4 * b["outputs"]["mse_sum_se"].get<double>());
  CHECK(b["config"]["scheme"] == "heterodyne");

  const auto p = cli_json({"simulate", "--r", "1", "--N", "0", "--prior-delta", "2", "--scaling", "optimal", "--shots",
                           "100000"});
  CHECK(p["outputs"]["analytic_target"].get<double>() == Approx(0.2618).epsilon(1e-3));
  CHECK(p["outputs"]["within_4se"] == true);
  CHECK(p["outputs"]["uncertainty_product_below_one"] == true);
}

TEST_CASE("simulate: jitter, workers and per-shot output") {
  const auto dir = scratch("shots");
  const auto shots = (dir / "shots.csv").string();
  const auto j = cli_json({"simulate", "--r", "0.5", "--N", "0.1", "--shots", "500", "--seed", "3", "--jitter",
                           "0.1,0.2", "--workers", "2", "--per-shot", shots});
  CHECK(j["config"]["jitter"][1].get<double>() == 0.2);
  CHECK(j["config"]["workers"] == 2);
  const auto csv = read_csv(shots);
  CHECK(csv.rows.size() == 500);
  CHECK(csv.header.front() == "shot");
  double se = 0;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    se += std::pow(csv.at(i, "est_q") - csv.at(i, "q_true"), 2) + std::pow(csv.at(i, "est_p") - csv.at(i, "p_true"), 2);
  }
  CHECK(se / 500 == Approx(j["outputs"]["mse_sum"].get<double>()).epsilon(1e-12));
}

TEST_CASE("simulate: usage errors") {
  const std::vector<std::vector<std::string>> bad = {
      {"simulate", "--q0", "1", "--prior-delta", "2"},
      {"simulate", "--scaling", "optimal"},
      {"simulate", "--scaling", "fancy"},
      {"simulate", "--shots", "10"},
      {"simulate", "--jitter", "0.1"},
      {"simulate", "--baseline", "--N2", "1"},
      {"simulate", "--workers", "0"},
  };
  for (const auto& args : bad) {
    const auto r = cli(args);
    CHECK(r.code == kExitUsage);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
}

TEST_CASE("figure fig2") {
  const auto dir = scratch("fig2");
  REQUIRE(cli({"figure", "fig2", "--out", dir.string()}).code == 0);
  const auto csv = read_csv(dir / "fig2.csv");
  CHECK(csv.header == std::vector<std::string>{"r", "D_N0", "D_N0.5", "D_N2"});
  REQUIRE(csv.rows.size() == 200);
  CHECK(csv.at(0, "r") == 0.0);
  CHECK(csv.at(199, "r") == 3.0);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    CHECK(std::abs(csv.at(i, "D_N0") - std::exp(-4 * csv.at(i, "r"))) < 1e-9);
  }
  // N = 2 dips, rises up to the switch at r_ths(2) and falls afterwards
  std::size_t dip = 0;
  while (dip + 1 < csv.rows.size() && csv.at(dip + 1, "D_N2") < csv.at(dip, "D_N2")) ++dip;
  std::size_t peak = dip;
  for (std::size_t i = dip; i < csv.rows.size(); ++i) {
    if (csv.at(i, "D_N2") > csv.at(peak, "D_N2")) peak = i;
  }
  CHECK(std::abs(csv.at(peak, "r") - thresholds(2).r_ths) < 3.0 / 199);

  const auto small = scratch("fig2b");
  REQUIRE(cli({"figure", "fig2", "--out", small.string(), "--r-max", "2", "--steps", "3"}).code == 0);
  const auto row = read_csv(small / "fig2.csv");
  CHECK(row.at(1, "r") == 1.0);
  CHECK(row.at(1, "D_N0") == Approx(0.018316).epsilon(1e-5));
}

TEST_CASE("figure fig3") {
  const auto dir = scratch("fig3");
  const auto j = cli_json({"figure", "fig3", "--out", dir.string()});
  CHECK(j["outputs"]["files"].size() == 4);
  for (const char* d : {"1", "2", "3", "5"}) {
    const auto csv = read_csv(dir / (std::string("fig3_") + d + ".csv"));
    CHECK(csv.header == std::vector<std::string>{"r", "mse_Kmin", "mse_Kc", "B_MI_tmst", "B_SQL"});
    const double delta = std::stod(d);
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      CHECK(csv.at(i, "mse_Kmin") <= csv.at(i, "mse_Kc") * (1 + 1e-15));
      CHECK(csv.at(i, "mse_Kmin") >= csv.at(i, "B_MI_tmst") * (1 - 1e-12));
      CHECK(csv.at(i, "B_SQL") == Approx(2 * delta * delta / (1 + delta * delta)));
    }
  }
}

TEST_CASE("figure: default directory and errors") {
  const char* env = std::getenv("QDISP_OUT_DIR");
  if (env) {
    fs::remove_all(env);
    REQUIRE(cli({"figure", "fig2", "--steps", "5"}).code == 0);
    CHECK(fs::exists(fs::path(env) / "fig2.csv"));
  }
  CHECK(cli({"figure", "fig4"}).code == kExitUsage);
  CHECK(cli({"figure", "fig2", "--out", "/proc/qdisp-no-such-dir"}).code == kExitUsage);
  CHECK(cli({"figure", "fig2", "--steps", "0"}).code == kExitUsage);
}

TEST_CASE("sweep") {
  const auto r = cli({"sweep", "B_S,E,E_minus_B_MI,duan_lhs", "--N", "1", "--steps", "40"});
  REQUIRE(r.code == 0);
  const auto csv = csv_text(r.out);
  CHECK(csv.header == std::vector<std::string>{"quantity", "r", "N", "delta", "value"});
  CHECK(csv.meta.size() == 4);
  std::map<std::string, std::vector<double>> col;
  for (const auto& row : csv.rows) col[row[0]].push_back(std::stod(row[4]));
  REQUIRE(col["B_S"].size() == 40);
  for (std::size_t i = 1; i < 40; ++i) CHECK(col["B_S"][i] < col["B_S"][i - 1]);
  for (double v : col["E_minus_B_MI"]) CHECK(v >= 0.0);
  for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs(col["duan_lhs"][i] - col["E"][i]) < 1e-12);

  const auto d = cli({"sweep", "mse_Kmin", "--over", "delta", "--from", "0.5", "--to", "5", "--steps", "4", "--r", "1"});
  REQUIRE(d.code == 0);
  CHECK(csv_text(d.out).rows.size() == 4);

  CHECK(cli({"sweep", "nonsense"}).code == kExitUsage);
  CHECK(cli({"sweep", "E", "--over", "x"}).code == kExitUsage);
}

TEST_CASE("replay reproduces recorded outputs") {
  const auto dir = scratch("replay");
  const auto rec = (dir / "run.json").string();
  REQUIRE(cli({"simulate", "--r", "0.7", "--N", "0.2", "--prior-delta", "1.5", "--scaling", "coherent", "--shots",
               "5000", "--seed", "99", "--workers", "3", "--record", rec})
              .code == 0);
  const auto again = cli({"replay", rec});
  CHECK(again.code == 0);
  CHECK(json::parse(again.out)["match"] == true);

  const auto sweep_file = (dir / "sweep.csv").string();
  REQUIRE(cli({"sweep", "B_MI,D", "--N", "0.5", "--steps", "7", "--out", sweep_file}).code == 0);
  CHECK(cli({"replay", sweep_file}).code == 0);

  REQUIRE(cli({"figure", "fig3", "--out", dir.string(), "--steps", "11"}).code == 0);
  CHECK(cli({"replay", (dir / "fig3_3.csv").string()}).code == 0);

  // tampered record
  auto j = json::parse(std::ifstream(rec));
  j["outputs"]["mse_sum"] = j["outputs"]["mse_sum"].get<double>() * (1 + 1e-15) + 1e-12;
  std::ofstream(rec) << j.dump();
  const auto bad = cli({"replay", rec});
  CHECK(bad.code == kExitNumerical);

  CHECK(cli({"replay", (dir / "missing.json").string()}).code == kExitUsage);
}
