#include "qdisp/cli.hpp"

#include "qdisp/entanglement.hpp"
#include "qdisp/errors.hpp"
#include "qdisp/fisher_bounds.hpp"
#include "qdisp/mc_sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#ifndef QDISP_VERSION
#define QDISP_VERSION "unknown"
#endif

namespace qdisp {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  const std::vector<std::string>& args;
  std::ostream& out;
  std::ostream& err;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// Full precision, so that CSV values round-trip.
std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Short form for column and file names.
std::string label(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

json jnum(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::vector<double> parse_list(const std::string& text, std::size_t expected, const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw UsageError(flag + ": '" + item + "' is not a number");
    values.push_back(v);
  }
  if (expected != 0 && values.size() != expected) {
    throw UsageError(flag + " expects " + std::to_string(expected) + " comma-separated values");
  }
  if (values.empty()) throw UsageError(flag + " expects at least one value");
  return values;
}

json record(const Context& ctx, const std::string& command, json config, json outputs) {
  json rec;
  rec["command"] = command;
  rec["version"] = QDISP_VERSION;
  rec["argv"] = ctx.args;
  rec["config"] = std::move(config);
  rec["outputs"] = std::move(outputs);
  rec["wall_time_s"] = ctx.elapsed();
  return rec;
}

void csv_header(std::ostream& os, const Context& ctx, const std::string& command, const json& config) {
  os << "# qdisp " << QDISP_VERSION << "\n";
  os << "# command: " << command << "\n";
  os << "# argv: " << json(ctx.args).dump() << "\n";
  os << "# config: " << config.dump() << "\n";
}

fs::path default_out_dir() {
  if (const char* env = std::getenv("QDISP_OUT_DIR"); env && *env) return env;
  return ".";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write '" + path.string() + "'");
  os.precision(17);
  return os;
}

std::vector<double> grid(double lo, double hi, int steps) {
  if (steps < 1) throw UsageError("--steps must be >= 1");
  if (!(hi >= lo)) throw UsageError("grid upper end is below the lower end");
  std::vector<double> g(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    g[static_cast<std::size_t>(i)] = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
  }
  return g;
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string probe = "coherent";
  double r = 0.0, N = 0.0, N1 = 0.0, N2 = 0.0;
  double delta = kInf;
  int M = 1;
  std::string G;
  std::string format = "json";
  CLI::Option *o_r, *o_N, *o_N1, *o_N2;
};

json probe_json(const ProbeSpec& p) {
  json j;
  j["kind"] = std::string(to_string(p.kind));
  j["r"] = p.r;
  if (p.kind == ProbeKind::tmst_asym) {
    j["N1"] = p.N1;
    j["N2"] = p.N2;
  } else {
    j["N"] = p.N;
  }
  return j;
}

BoundQuery bounds_query(const BoundsArgs& a) {
  const auto kind = parse_probe_kind(a.probe);
  if (!kind) throw UsageError("unknown probe '" + a.probe + "' (coherent, single, tmst, tmst-asym)");
  BoundQuery q;
  q.probe.kind = *kind;
  switch (*kind) {
    case ProbeKind::coherent:
      if (a.o_r->count() || a.o_N->count() || a.o_N1->count() || a.o_N2->count()) {
        throw UsageError("--probe coherent takes no --r/--N/--N1/--N2");
      }
      break;
    case ProbeKind::single:
    case ProbeKind::tmst:
      if (a.o_N1->count() || a.o_N2->count()) throw UsageError("--N1/--N2 are only valid with --probe tmst-asym");
      q.probe.r = a.r;
      q.probe.N = a.N;
      break;
    case ProbeKind::tmst_asym:
      if (a.o_N->count()) throw UsageError("--probe tmst-asym takes --N1 and --N2, not --N");
      if (!a.o_N1->count() || !a.o_N2->count()) throw UsageError("--probe tmst-asym needs --N1 and --N2");
      q.probe.r = a.r;
      q.probe.N1 = a.N1;
      q.probe.N2 = a.N2;
      break;
  }
  if (!a.G.empty()) {
    const auto g = parse_list(a.G, 3, "--G");
    q.G << g[0], g[1], g[1], g[2];
  }
  q.delta = a.delta;
  q.shots = a.M;
  return q;
}

json bounds_config(const BoundQuery& q) {
  json c;
  c["probe"] = probe_json(q.probe);
  c["delta"] = jnum(q.delta);
  c["M"] = q.shots;
  c["G"] = {q.G(0, 0), q.G(0, 1), q.G(1, 1)};
  return c;
}

int cmd_bounds(const Context& ctx, const BoundsArgs& a) {
  const BoundQuery q = bounds_query(a);
  const BoundReport rep = bound_most_informative(q);
  if (a.format == "csv") {
    csv_header(ctx.out, ctx, "bounds", bounds_config(q));
    ctx.out << "B_S,B_R,B_MI,branch,r_ths,r_sql\n";
    ctx.out << num(rep.B_S) << ',' << num(rep.B_R) << ',' << num(rep.B_MI) << ',' << to_string(rep.branch)
            << ',' << num(rep.r_ths) << ',' << num(rep.r_sql) << "\n";
    return kExitOk;
  }
  json o;
  o["B_S"] = jnum(rep.B_S);
  o["B_R"] = jnum(rep.B_R);
  o["B_MI"] = jnum(rep.B_MI);
  o["branch"] = std::string(to_string(rep.branch));
  o["r_ths"] = rep.r_ths;
  o["r_sql"] = rep.r_sql;
  o["pure"] = rep.pure;
  ctx.out << record(ctx, "bounds", bounds_config(q), o).dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  double r = 0.0, N = 0.0, N2 = 0.0;
  double q0 = 0.0, p0 = 0.0;
  double prior_delta = 0.0;
  std::uint64_t shots = 100000;
  std::uint64_t seed = 0;
  std::string scaling = "none";
  std::string jitter;
  unsigned workers = 1;
  bool baseline = false;
  std::string per_shot;
  std::string record_path;
  CLI::Option *o_N2, *o_q0, *o_p0, *o_prior;
};

RunConfig simulate_config(const SimulateArgs& a) {
  if ((a.o_q0->count() || a.o_p0->count()) && a.o_prior->count()) {
    throw UsageError("--q0/--p0 and --prior-delta are mutually exclusive");
  }
  if (a.baseline && a.o_N2->count()) throw UsageError("--N2 is not valid with --baseline");
  RunConfig c;
  c.scheme = a.baseline ? Scheme::heterodyne : Scheme::double_homodyne;
  c.r = a.r;
  c.N = a.N;
  if (a.o_N2->count()) c.N2 = a.N2;
  c.q0 = a.q0;
  c.p0 = a.p0;
  if (a.o_prior->count()) c.prior_delta = a.prior_delta;
  c.shots = a.shots;
  c.seed = a.seed;
  c.scaling = Scaling::parse(a.scaling);
  if (!a.jitter.empty()) {
    const auto j = parse_list(a.jitter, 2, "--jitter");
    c.jitter_q = j[0];
    c.jitter_p = j[1];
  }
  c.workers = a.workers;
  return c;
}

json run_config_json(const RunConfig& c) {
  json j;
  j["scheme"] = c.scheme == Scheme::heterodyne ? "heterodyne" : "double_homodyne";
  j["r"] = c.r;
  j["N"] = c.N;
  j["N2"] = c.N2 ? json(*c.N2) : json(nullptr);
  if (c.prior_delta) {
    j["prior_delta"] = *c.prior_delta;
  } else {
    j["q0"] = c.q0;
    j["p0"] = c.p0;
  }
  j["shots"] = c.shots;
  j["seed"] = c.seed;
  j["scaling"] = c.scaling.to_string();
  j["jitter"] = {c.jitter_q, c.jitter_p};
  j["workers"] = c.workers;
  return j;
}

// Most-informative bound of the probe actually used, with the run's prior.
BoundReport simulate_bound(const RunConfig& c) {
  BoundQuery q;
  if (c.scheme == Scheme::heterodyne) {
    q.probe.kind = (c.r == 0.0 && c.N == 0.0) ? ProbeKind::coherent : ProbeKind::single;
    q.probe.r = c.r;
    q.probe.N = c.N;
  } else if (c.N2) {
    q.probe.kind = ProbeKind::tmst_asym;
    q.probe.r = c.r;
    q.probe.N1 = c.N;
    q.probe.N2 = *c.N2;
  } else {
    q.probe.kind = ProbeKind::tmst;
    q.probe.r = c.r;
    q.probe.N = c.N;
  }
  if (c.prior_delta) q.delta = *c.prior_delta;
  return bound_most_informative(q);
}

int cmd_simulate(const Context& ctx, const SimulateArgs& a) {
  const RunConfig cfg = simulate_config(a);
  const EstimationRun run = qdisp::run(cfg);
  const RunStats& s = *run.results;

  if (!a.per_shot.empty()) {
    auto os = open_out(a.per_shot);
    csv_header(os, ctx, "simulate", run_config_json(cfg));
    os << "shot,q_true,p_true,outcome_q,outcome_p,est_q,est_p\n";
    simulate_shots(cfg, 0, cfg.shots, [&](const Shot& sh) {
      os << sh.index << ',' << num(sh.q_true) << ',' << num(sh.p_true) << ',' << num(sh.outcome_q) << ','
         << num(sh.outcome_p) << ',' << num(sh.est_q) << ',' << num(sh.est_p) << "\n";
    });
  }

  json o;
  o["mean_estimate"] = {s.mean_est_q, s.mean_est_p};
  o["bias"] = {s.bias_q, s.bias_p};
  o["bias_se"] = {s.se_bias_q, s.se_bias_p};
  o["mse_q"] = s.mse_q;
  o["mse_p"] = s.mse_p;
  o["mse_q_se"] = s.se_mse_q;
  o["mse_p_se"] = s.se_mse_p;
  o["mse_sum"] = s.mse_sum;
  o["mse_sum_se"] = s.se_mse_sum;
  o["K"] = {s.K_q, s.K_p};
  o["var0"] = {s.var0_q, s.var0_p};
  o["analytic_target"] = s.analytic_mse_sum;
  const double z = (s.mse_sum - s.analytic_mse_sum) / s.se_mse_sum;
  o["z_score"] = jnum(z);
  o["within_4se"] = std::abs(z) <= 4.0;
  const BoundReport b = simulate_bound(cfg);
  o["bound_B_MI"] = jnum(b.B_MI);
  o["bound_branch"] = std::string(to_string(b.branch));
  o["sql"] = cfg.prior_delta ? closed_form::sql_prior(*cfg.prior_delta) : kSql;
  const auto up = uncertainty_product(s);
  o["uncertainty_product"] = up.product;
  o["uncertainty_product_below_one"] = up.below_one;

  const json rec = record(ctx, "simulate", run_config_json(cfg), o);
  if (!a.record_path.empty()) open_out(a.record_path) << rec.dump(2) << "\n";
  ctx.out << rec.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- figure

struct FigureArgs {
  std::string name;
  std::string out;
  double r_min = 0.0, r_max = 3.0;
  int steps = 200;
  std::string Ns = "0,0.5,2";       // fig2
  std::string deltas = "1,2,3,5";   // fig3
  double N = 1.0;                   // fig3
};

int cmd_figure(const Context& ctx, const FigureArgs& a) {
  const fs::path dir = a.out.empty() ? default_out_dir() : fs::path(a.out);
  const auto rs = grid(a.r_min, a.r_max, a.steps);
  json cfg;
  cfg["figure"] = a.name;
  cfg["r_min"] = a.r_min;
  cfg["r_max"] = a.r_max;
  cfg["steps"] = a.steps;
  std::vector<std::string> files;

  if (a.name == "fig2") {
    const auto Ns = parse_list(a.Ns, 0, "--Ns");
    for (double n : Ns) {
      if (!(n >= 0.0)) throw UsageError("--Ns entries must be >= 0");
    }
    cfg["N"] = Ns;
    ensure_dir(dir);
    const fs::path path = dir / "fig2.csv";
    auto os = open_out(path);
    csv_header(os, ctx, "figure fig2", cfg);
    os << "r";
    for (double n : Ns) os << ",D_N" << label(n);
    os << "\n";
    for (double r : rs) {
      os << num(r);
      for (double n : Ns) os << ',' << num(gap_D(r, n));
      os << "\n";
    }
    files.push_back(path.string());
  } else {
    const auto deltas = parse_list(a.deltas, 0, "--deltas");
    for (double d : deltas) {
      if (!(d > 0.0) || !std::isfinite(d)) throw UsageError("--deltas entries must be positive and finite");
    }
    if (!(a.N >= 0.0)) throw UsageError("--N must be >= 0");
    cfg["N"] = a.N;
    cfg["delta"] = deltas;
    ensure_dir(dir);
    for (double d : deltas) {
      const fs::path path = dir / ("fig3_" + label(d) + ".csv");
      auto os = open_out(path);
      json c = cfg;
      c["delta"] = d;
      csv_header(os, ctx, "figure fig3", c);
      os << "r,mse_Kmin,mse_Kc,B_MI_tmst,B_SQL\n";
      for (double r : rs) {
        const double var0 = (2.0 * a.N + 1.0) * std::exp(-2.0 * r);
        const auto sf = scaling_factors(var0, d);
        os << num(r) << ',' << num(sf.mse_min) << ',' << num(sf.mse_Kc) << ','
           << num(closed_form::tmst_mi_prior(r, a.N, d)) << ',' << num(closed_form::sql_prior(d)) << "\n";
      }
      files.push_back(path.string());
    }
  }
  json o;
  o["files"] = files;
  ctx.out << record(ctx, "figure", cfg, o).dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct Point {
  double r, N, delta, a;
  int M;
};

using Quantity = std::function<double(const Point&)>;

BoundReport tmst_bounds(const Point& p) {
  BoundQuery q;
  q.probe.kind = ProbeKind::tmst;
  q.probe.r = p.r;
  q.probe.N = p.N;
  q.delta = p.delta;
  q.shots = p.M;
  return bound_most_informative(q);
}

double per_mode_var0(const Point& p) { return (2.0 * p.N + 1.0) * std::exp(-2.0 * p.r); }

const std::map<std::string, Quantity>& quantities() {
  static const std::map<std::string, Quantity> table = {
      {"B_S", [](const Point& p) { return tmst_bounds(p).B_S; }},
      {"B_R", [](const Point& p) { return tmst_bounds(p).B_R; }},
      {"B_MI", [](const Point& p) { return tmst_bounds(p).B_MI; }},
      {"E", [](const Point& p) { return scheme_variance_sum(p.r, p.N); }},
      // flat prior, single shot
      {"E_minus_B_MI",
       [](const Point& p) { return scheme_variance_sum(p.r, p.N) - tmst_bounds({p.r, p.N, kInf, 1.0, 1}).B_MI; }},
      {"D", [](const Point& p) { return gap_D(p.r, p.N); }},
      {"duan_lhs", [](const Point& p) { return duan_check(two_mode_squeezed_thermal(p.r, p.N), p.a).lhs; }},
      {"mse_Kmin", [](const Point& p) { return scaling_factors(per_mode_var0(p), p.delta).mse_min; }},
      {"mse_Kc", [](const Point& p) { return scaling_factors(per_mode_var0(p), p.delta).mse_Kc; }},
      {"B_SQL", [](const Point& p) { return std::isfinite(p.delta) ? closed_form::sql_prior(p.delta) : kSql; }},
      {"r_ths", [](const Point& p) { return thresholds(p.N).r_ths; }},
      {"r_sql", [](const Point& p) { return thresholds(p.N).r_sql; }},
  };
  return table;
}

struct SweepArgs {
  std::string names;
  std::string over = "r";
  double from = 0.0, to = 3.0;
  int steps = 50;
  double r = 0.0, N = 0.0, delta = kInf, a = 1.0;
  int M = 1;
  std::string out;
};

int cmd_sweep(const Context& ctx, const SweepArgs& s) {
  std::vector<std::pair<std::string, Quantity>> selected;
  std::stringstream ss(s.names);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto it = quantities().find(name);
    if (it == quantities().end()) {
      std::string known;
      for (const auto& [k, v] : quantities()) known += (known.empty() ? "" : ", ") + k;
      throw UsageError("unknown quantity '" + name + "' (known: " + known + ")");
    }
    selected.emplace_back(*it);
  }
  if (selected.empty()) throw UsageError("no quantity given");
  if (s.over != "r" && s.over != "N" && s.over != "delta") throw UsageError("--over must be r, N or delta");

  json cfg;
  cfg["quantities"] = s.names;
  cfg["over"] = s.over;
  cfg["from"] = s.from;
  cfg["to"] = s.to;
  cfg["steps"] = s.steps;
  cfg["r"] = s.r;
  cfg["N"] = s.N;
  cfg["delta"] = jnum(s.delta);
  cfg["a"] = s.a;
  cfg["M"] = s.M;

  const auto g = grid(s.from, s.to, s.steps);
  std::ostringstream body;
  csv_header(body, ctx, "sweep", cfg);
  body << "quantity,r,N,delta,value\n";
  for (const auto& [qname, f] : selected) {
    for (double x : g) {
      Point p{s.r, s.N, s.delta, s.a, s.M};
      (s.over == "r" ? p.r : s.over == "N" ? p.N : p.delta) = x;
      body << qname << ',' << num(p.r) << ',' << num(p.N) << ',' << num(p.delta) << ',' << num(f(p)) << "\n";
    }
  }
  if (s.out.empty()) {
    ctx.out << body.str();
  } else {
    open_out(s.out) << body.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------- replay

std::vector<std::string> data_lines(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  }
  return lines;
}

int cmd_replay(const Context& ctx, const std::string& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read '" + file + "'");
  std::stringstream content;
  content << in.rdbuf();
  const std::string text = content.str();

  std::vector<std::string> argv;
  const bool is_json = text.find_first_not_of(" \t\r\n") != std::string::npos &&
                       text[text.find_first_not_of(" \t\r\n")] == '{';
  json original;
  if (is_json) {
    try {
      original = json::parse(text);
      argv = original.at("argv").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw UsageError("'" + file + "' is not a run record: " + e.what());
    }
  } else {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (line.rfind("# argv: ", 0) == 0) {
        argv = json::parse(line.substr(8)).get<std::vector<std::string>>();
        break;
      }
    }
    if (argv.empty()) throw UsageError("'" + file + "' carries no '# argv:' line");
  }
  if (!argv.empty() && argv[0] == "replay") throw UsageError("refusing to replay a replay");

  // Files written by the original command are regenerated into a scratch location.
  const fs::path scratch = fs::temp_directory_path() /
                           ("qdisp-replay-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::path regenerated;
  const bool figure = !argv.empty() && argv[0] == "figure";
  if (!is_json) {
    bool redirected = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
      if (argv[i] == "--out") {
        regenerated = figure ? scratch / fs::path(file).filename() : scratch / "out.csv";
        argv[i + 1] = figure ? scratch.string() : regenerated.string();
        redirected = true;
      } else if (argv[i] == "--per-shot") {
        regenerated = scratch / "shots.csv";
        argv[i + 1] = regenerated.string();
        redirected = true;
      }
    }
    if (figure && !redirected) {
      argv.push_back("--out");
      argv.push_back(scratch.string());
      regenerated = scratch / fs::path(file).filename();
    }
    fs::create_directories(scratch);
  }

  std::ostringstream out, err;
  const int code = run_cli(argv, out, err);
  if (code != kExitOk) {
    fs::remove_all(scratch);
    throw NumericalError("replayed command failed: " + err.str());
  }

  bool match = false;
  std::size_t compared = 0;
  if (is_json) {
    const json fresh = json::parse(out.str());
    match = fresh.at("outputs") == original.at("outputs");
    compared = original.at("outputs").size();
  } else {
    std::istringstream a(text);
    std::vector<std::string> lhs = data_lines(a), rhs;
    if (regenerated.empty()) {
      std::istringstream b(out.str());
      rhs = data_lines(b);
    } else {
      std::ifstream b(regenerated);
      rhs = data_lines(b);
    }
    match = lhs == rhs;
    compared = lhs.size();
  }
  fs::remove_all(scratch);

  json o;
  o["file"] = file;
  o["match"] = match;
  o["compared"] = compared;
  ctx.out << o.dump(2) << "\n";
  if (!match) {
    ctx.err << "qdisp: replay of '" << file << "' does not reproduce the recorded values\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint displacement estimation with Gaussian probes: bounds, simulation, figure data", "qdisp"};
  app.set_version_flag("--version", std::string("qdisp ") + QDISP_VERSION);
  app.require_subcommand(1);

  BoundsArgs ba;
  auto* bounds = app.add_subcommand("bounds", "Cramer-Rao bounds (SLD, RLD, most informative)");
  bounds->add_option("--probe", ba.probe, "coherent | single | tmst | tmst-asym")->capture_default_str();
  ba.o_r = bounds->add_option("--r", ba.r, "squeezing parameter");
  ba.o_N = bounds->add_option("--N", ba.N, "thermal photons per mode");
  ba.o_N1 = bounds->add_option("--N1", ba.N1, "thermal photons, mode 1 (tmst-asym)");
  ba.o_N2 = bounds->add_option("--N2", ba.N2, "thermal photons, mode 2 (tmst-asym)");
  bounds->add_option("--delta", ba.delta, "Gaussian prior width (default flat)");
  bounds->add_option("--M", ba.M, "number of repetitions")->capture_default_str();
  bounds->add_option("--G", ba.G, "weight matrix g11,g12,g22 (default identity)");
  bounds->add_option("--format", ba.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo of the double-homodyne scheme or the heterodyne baseline");
  sim->add_option("--r", sa.r, "squeezing parameter");
  sim->add_option("--N", sa.N, "thermal photons (mode 1 for asymmetric probes)");
  sa.o_N2 = sim->add_option("--N2", sa.N2, "thermal photons of mode 2 (asymmetric probe)");
  sim->add_option("--shots", sa.shots)->capture_default_str();
  sim->add_option("--seed", sa.seed)->capture_default_str();
  sa.o_q0 = sim->add_option("--q0", sa.q0, "true q displacement");
  sa.o_p0 = sim->add_option("--p0", sa.p0, "true p displacement");
  sa.o_prior = sim->add_option("--prior-delta", sa.prior_delta, "draw (q0, p0) from a Gaussian prior of this width");
  sim->add_option("--scaling", sa.scaling, "none | coherent | optimal | K=<x>")->capture_default_str();
  sim->add_option("--jitter", sa.jitter, "displacement noise variances dq2,dp2");
  sim->add_option("--workers", sa.workers)->capture_default_str();
  sim->add_flag("--baseline", sa.baseline, "single-mode probe with heterodyne readout");
  sim->add_option("--per-shot", sa.per_shot, "write per-shot CSV to this file");
  sim->add_option("--record", sa.record_path, "also write the JSON run record to this file");

  FigureArgs fa;
  auto* fig = app.add_subcommand("figure", "Figure data as CSV");
  fig->add_option("name", fa.name)->required()->check(CLI::IsMember({"fig2", "fig3"}));
  fig->add_option("--out", fa.out, "output directory (default $QDISP_OUT_DIR or .)");
  fig->add_option("--r-min", fa.r_min)->capture_default_str();
  fig->add_option("--r-max", fa.r_max)->capture_default_str();
  fig->add_option("--steps", fa.steps, "number of grid points")->capture_default_str();
  fig->add_option("--Ns", fa.Ns, "fig2 thermal photon numbers")->capture_default_str();
  fig->add_option("--deltas", fa.deltas, "fig3 prior widths")->capture_default_str();
  fig->add_option("--N", fa.N, "fig3 thermal photon number")->capture_default_str();

  SweepArgs swa;
  auto* sweep = app.add_subcommand("sweep", "Evaluate quantities on a grid (long-format CSV)");
  sweep->add_option("quantity", swa.names, "comma-separated: B_S, B_R, B_MI, E, E_minus_B_MI, D, duan_lhs, ...")
      ->required();
  sweep->add_option("--over", swa.over, "grid variable: r | N | delta")->capture_default_str();
  sweep->add_option("--from", swa.from)->capture_default_str();
  sweep->add_option("--to", swa.to)->capture_default_str();
  sweep->add_option("--steps", swa.steps)->capture_default_str();
  sweep->add_option("--r", swa.r);
  sweep->add_option("--N", swa.N);
  sweep->add_option("--delta", swa.delta);
  sweep->add_option("--a", swa.a, "Duan parameter")->capture_default_str();
  sweep->add_option("--M", swa.M)->capture_default_str();
  sweep->add_option("--out", swa.out, "output file (default stdout)");

  std::string replay_file;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a JSON or CSV output and compare");
  replay->add_option("file", replay_file)->required();

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("qdisp");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "qdisp: error: " << e.what() << "\n";
    return kExitUsage;
  }

  const Context ctx{args, out, err};
  try {
    if (bounds->parsed()) return cmd_bounds(ctx, ba);
    if (sim->parsed()) return cmd_simulate(ctx, sa);
    if (fig->parsed()) return cmd_figure(ctx, fa);
    if (sweep->parsed()) return cmd_sweep(ctx, swa);
    if (replay->parsed()) return cmd_replay(ctx, replay_file);
  } catch (const UsageError& e) {
    err << "qdisp: error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "qdisp: error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "qdisp: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "qdisp: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace qdisp
