#include "qdisp/mc_sim.hpp"

#include "qdisp/errors.hpp"
#include "qdisp/gaussian.hpp"
#include "qdisp/philox.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>

namespace qdisp {

namespace {

// Philox block layout of one shot.
constexpr std::uint32_t kPriorBlock = 0;
constexpr std::uint32_t kJitterBlock = 1;
constexpr std::uint32_t kReadoutBlock = 2;

// Everything about a run that does not change from shot to shot.
struct Model {
  Scheme scheme;
  // Readout: outcome = response * displacement + noise_chol * (n0, n1).
  double resp_qq, resp_qp, resp_pq, resp_pp;  // d outcome_q / d(q, p), d outcome_p / d(q, p)
  double chol00, chol10, chol11;              // lower-triangular noise factor (q first)
  double gain_q, gain_p;                      // estimator u = outcome / gain
  double var0_q, var0_p;
  double K_q, K_p;
  double sd_jitter_q, sd_jitter_p;
  std::optional<double> delta;
  double q0, p0;
};

void validate(const RunConfig& c) {
  if (c.shots < 100) throw DomainError("a run needs at least 100 shots");
  if (c.workers < 1) throw DomainError("worker count must be >= 1");
  if (!(c.N >= 0.0) || (c.N2 && !(*c.N2 >= 0.0))) throw DomainError("thermal photon number must be >= 0");
  if (!std::isfinite(c.r)) throw DomainError("squeezing must be finite");
  if (!(c.jitter_q >= 0.0) || !(c.jitter_p >= 0.0)) throw DomainError("jitter variances must be >= 0");
  if (c.prior_delta && !(*c.prior_delta > 0.0 && std::isfinite(*c.prior_delta))) {
    throw DomainError("prior width must be positive and finite");
  }
  if (!std::isfinite(c.q0) || !std::isfinite(c.p0)) throw DomainError("true parameters must be finite");
  const bool needs_prior =
      c.scaling.mode == Scaling::Mode::coherent || c.scaling.mode == Scaling::Mode::optimal;
  if (needs_prior && !c.prior_delta) {
    throw DomainError("scaling '" + c.scaling.to_string() + "' needs a prior width");
  }
  if (c.scaling.mode == Scaling::Mode::explicit_k && !std::isfinite(c.scaling.k)) {
    throw DomainError("explicit scaling factor must be finite");
  }
}

double scale_factor(const Scaling& s, std::optional<double> delta, double var0) {
  switch (s.mode) {
    case Scaling::Mode::none: return 1.0;
    case Scaling::Mode::explicit_k: return s.k;
    case Scaling::Mode::coherent: {
      const double d2 = *delta * *delta;
      return d2 / (1.0 + d2);
    }
    case Scaling::Mode::optimal: {
      const double d2 = *delta * *delta;
      return d2 / (var0 + d2);
    }
  }
  throw DomainError("invalid scaling mode");
}

Model make_model(const RunConfig& c, Scheme scheme) {
  validate(c);
  Model m{};
  m.scheme = scheme;
  m.delta = c.prior_delta;
  m.q0 = c.q0;
  m.p0 = c.p0;
  m.sd_jitter_q = std::sqrt(c.jitter_q);
  m.sd_jitter_p = std::sqrt(c.jitter_p);

  if (scheme == Scheme::double_homodyne) {
    const auto probe = two_mode_squeezed_thermal(c.r, c.N, c.N2.value_or(c.N));
    const auto resp = double_homodyne_response(probe);
    m.resp_qq = resp.gain_q;
    m.resp_qp = resp.cross_q_from_p;
    m.resp_pq = resp.cross_p_from_q;
    m.resp_pp = resp.gain_p;
    const double c00 = std::sqrt(resp.var_q);
    m.chol00 = c00;
    m.chol10 = resp.cov_qp / c00;
    m.chol11 = std::sqrt(std::max(resp.var_p - m.chol10 * m.chol10, 0.0));
    m.gain_q = resp.gain_q;
    m.gain_p = resp.gain_p;
    m.var0_q = resp.var_q / (resp.gain_q * resp.gain_q);
    m.var0_p = resp.var_p / (resp.gain_p * resp.gain_p);
  } else {
    const auto probe = squeezed_thermal(c.r, c.N);
    const Eigen::Matrix2d cov = heterodyne_outcome_cov(probe, 0);
    const Eigen::Matrix2d L = cov.llt().matrixL();
    m.resp_qq = 1.0;
    m.resp_qp = 0.0;
    m.resp_pq = 0.0;
    m.resp_pp = 1.0;
    m.chol00 = L(0, 0);
    m.chol10 = L(1, 0);
    m.chol11 = L(1, 1);
    m.gain_q = 1.0;
    m.gain_p = 1.0;
    m.var0_q = cov(0, 0);
    m.var0_p = cov(1, 1);
  }
  m.var0_q += c.jitter_q;
  m.var0_p += c.jitter_p;
  m.K_q = scale_factor(c.scaling, c.prior_delta, m.var0_q);
  m.K_p = scale_factor(c.scaling, c.prior_delta, m.var0_p);
  return m;
}

Shot draw_shot(const Model& m, const Philox4x32& gen, std::uint64_t index) {
  const NormalStream ns(gen, index);
  Shot s{};
  s.index = index;
  if (m.delta) {
    const auto z = ns.pair(kPriorBlock);
    s.q_true = *m.delta * z[0];
    s.p_true = *m.delta * z[1];
  } else {
    s.q_true = m.q0;
    s.p_true = m.p0;
  }
  double dq = s.q_true;
  double dp = s.p_true;
  if (m.sd_jitter_q > 0.0 || m.sd_jitter_p > 0.0) {
    const auto j = ns.pair(kJitterBlock);
    dq += m.sd_jitter_q * j[0];
    dp += m.sd_jitter_p * j[1];
  }
  const auto n = ns.pair(kReadoutBlock);
  s.outcome_q = m.resp_qq * dq + m.resp_qp * dp + m.chol00 * n[0];
  s.outcome_p = m.resp_pq * dq + m.resp_pp * dp + m.chol10 * n[0] + m.chol11 * n[1];
  s.est_q = m.K_q * s.outcome_q / m.gain_q;
  s.est_p = m.K_p * s.outcome_p / m.gain_p;
  return s;
}

struct Accumulator {
  std::uint64_t n = 0;
  double est_q = 0, est_p = 0;
  double e_q = 0, e_p = 0;
  double e2_q = 0, e2_p = 0;
  double e4_q = 0, e4_p = 0;
  double s2 = 0;  // (e_q^2 + e_p^2)^2
  double uu_q = 0, uz_q = 0, zz_q = 0;
  double uu_p = 0, uz_p = 0, zz_p = 0;

  void add(const Model& m, const Shot& s) {
    ++n;
    const double eq = s.est_q - s.q_true;
    const double ep = s.est_p - s.p_true;
    const double uq = s.outcome_q / m.gain_q;
    const double up = s.outcome_p / m.gain_p;
    est_q += s.est_q;
    est_p += s.est_p;
    e_q += eq;
    e_p += ep;
    e2_q += eq * eq;
    e2_p += ep * ep;
    e4_q += eq * eq * eq * eq;
    e4_p += ep * ep * ep * ep;
    const double sum = eq * eq + ep * ep;
    s2 += sum * sum;
    uu_q += uq * uq;
    uz_q += uq * s.q_true;
    zz_q += s.q_true * s.q_true;
    uu_p += up * up;
    uz_p += up * s.p_true;
    zz_p += s.p_true * s.p_true;
  }

  void merge(const Accumulator& o) {
    n += o.n;
    est_q += o.est_q;
    est_p += o.est_p;
    e_q += o.e_q;
    e_p += o.e_p;
    e2_q += o.e2_q;
    e2_p += o.e2_p;
    e4_q += o.e4_q;
    e4_p += o.e4_p;
    s2 += o.s2;
    uu_q += o.uu_q;
    uz_q += o.uz_q;
    zz_q += o.zz_q;
    uu_p += o.uu_p;
    uz_p += o.uz_p;
    zz_p += o.zz_p;
  }
};

double standard_error(double mean, double mean_sq, std::uint64_t n) {
  const double var = std::max(mean_sq - mean * mean, 0.0) * static_cast<double>(n) /
                     static_cast<double>(n - 1);
  return std::sqrt(var / static_cast<double>(n));
}

double analytic_mse(const Model& m) {
  auto one = [&](double K, double var0, double truth) {
    const double spread = m.delta ? *m.delta * *m.delta : truth * truth;
    return (K - 1.0) * (K - 1.0) * spread + K * K * var0;
  };
  return one(m.K_q, m.var0_q, m.q0) + one(m.K_p, m.var0_p, m.p0);
}

RunStats finish(const Model& m, const Accumulator& acc) {
  const double n = static_cast<double>(acc.n);
  RunStats st;
  st.shots = acc.n;
  st.K_q = m.K_q;
  st.K_p = m.K_p;
  st.var0_q = m.var0_q;
  st.var0_p = m.var0_p;
  st.mean_est_q = acc.est_q / n;
  st.mean_est_p = acc.est_p / n;
  st.bias_q = acc.e_q / n;
  st.bias_p = acc.e_p / n;
  st.mse_q = acc.e2_q / n;
  st.mse_p = acc.e2_p / n;
  st.se_bias_q = standard_error(st.bias_q, st.mse_q, acc.n);
  st.se_bias_p = standard_error(st.bias_p, st.mse_p, acc.n);
  st.se_mse_q = standard_error(st.mse_q, acc.e4_q / n, acc.n);
  st.se_mse_p = standard_error(st.mse_p, acc.e4_p / n, acc.n);
  st.mse_sum = st.mse_q + st.mse_p;
  st.se_mse_sum = standard_error(st.mse_sum, acc.s2 / n, acc.n);
  st.uu_q = acc.uu_q / n;
  st.uz_q = acc.uz_q / n;
  st.zz_q = acc.zz_q / n;
  st.uu_p = acc.uu_p / n;
  st.uz_p = acc.uz_p / n;
  st.zz_p = acc.zz_p / n;
  st.analytic_mse_sum = analytic_mse(m);
  return st;
}

EstimationRun execute(const RunConfig& config, Scheme scheme) {
  const Model model = make_model(config, scheme);
  const Philox4x32 gen(config.seed);
  const unsigned workers = static_cast<unsigned>(
      std::min<std::uint64_t>(config.workers, config.shots));
  std::vector<Accumulator> parts(workers);

  auto work = [&](unsigned w) {
    const std::uint64_t begin = config.shots * w / workers;
    const std::uint64_t end = config.shots * (w + 1) / workers;
    Accumulator acc;
    for (std::uint64_t i = begin; i < end; ++i) acc.add(model, draw_shot(model, gen, i));
    parts[w] = acc;
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  Accumulator total;
  for (const auto& p : parts) total.merge(p);
  EstimationRun out{config, finish(model, total)};
  out.config.scheme = scheme;
  return out;
}

}  // namespace

Scaling Scaling::parse(std::string_view text) {
  if (text == "none") return {Mode::none, 1.0};
  if (text == "coherent") return {Mode::coherent, 1.0};
  if (text == "optimal") return {Mode::optimal, 1.0};
  if (text.starts_with("K=")) {
    const std::string value(text.substr(2));
    std::size_t used = 0;
    double k = 0.0;
    try {
      k = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == value.size() && used > 0 && std::isfinite(k)) return {Mode::explicit_k, k};
  }
  throw DomainError("invalid scaling mode '" + std::string(text) +
                    "' (expected none, coherent, optimal or K=<value>)");
}

std::string Scaling::to_string() const {
  switch (mode) {
    case Mode::none: return "none";
    case Mode::coherent: return "coherent";
    case Mode::optimal: return "optimal";
    case Mode::explicit_k: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "K=%.17g", k);
      return buf;
    }
  }
  return "?";
}

EstimationRun run_scheme(const RunConfig& config) {
  return execute(config, Scheme::double_homodyne);
}

EstimationRun run_baseline_heterodyne(const RunConfig& config) {
  return execute(config, Scheme::heterodyne);
}

EstimationRun run(const RunConfig& config) { return execute(config, config.scheme); }

void simulate_shots(const RunConfig& config, std::uint64_t first, std::uint64_t count,
                    const std::function<void(const Shot&)>& visit) {
  const Model model = make_model(config, config.scheme);
  const Philox4x32 gen(config.seed);
  for (std::uint64_t i = first; i < first + count; ++i) visit(draw_shot(model, gen, i));
}

KScan empirical_K_min(const RunConfig& base, std::span<const double> grid) {
  if (!base.prior_delta) throw DomainError("K scan needs a prior width");
  if (grid.empty()) throw DomainError("K grid is empty");
  RunConfig cfg = base;
  cfg.scaling = Scaling{};
  const auto stats = *run(cfg).results;
  KScan scan;
  scan.grid.assign(grid.begin(), grid.end());
  scan.mse.reserve(grid.size());
  for (double k : grid) scan.mse.push_back(stats.mse_sum_for(k, k));
  const auto best = std::min_element(scan.mse.begin(), scan.mse.end()) - scan.mse.begin();
  scan.K_star = scan.grid[static_cast<std::size_t>(best)];
  scan.mse_star = scan.mse[static_cast<std::size_t>(best)];
  return scan;
}

KScan empirical_K_min(double r, double N, double delta, std::uint64_t shots,
                      std::span<const double> grid, std::uint64_t seed) {
  RunConfig cfg;
  cfg.r = r;
  cfg.N = N;
  cfg.prior_delta = delta;
  cfg.shots = shots;
  cfg.seed = seed;
  return empirical_K_min(cfg, grid);
}

std::vector<double> unit_k_grid(int steps) {
  if (steps < 1) throw DomainError("grid needs at least one step");
  std::vector<double> grid(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) grid[static_cast<std::size_t>(k - 1)] = static_cast<double>(k) / steps;
  return grid;
}

UncertaintyProduct uncertainty_product(const RunStats& stats) {
  const double prod = stats.mse_q * stats.mse_p;
  return {prod, prod < 1.0};
}

}  // namespace qdisp
