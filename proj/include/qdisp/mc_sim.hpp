#pragma once

// Seeded Monte Carlo of the displacement-estimation pipelines.
//
// Every shot draws its randomness from a Philox stream keyed by the run seed and
// counted by the shot index, so a shot can be regenerated in isolation. Shots are
// split into contiguous ranges, one per worker; the per-worker sums are merged in
// worker order, which makes the statistics bit-identical for a fixed
// (seed, workers, config).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qdisp {

enum class Scheme {
  double_homodyne,  // two-mode squeezed thermal probe, beam splitter, p and q homodyne
  heterodyne,       // single-mode probe, heterodyne readout
};

struct Scaling {
  enum class Mode { none, coherent, optimal, explicit_k };
  Mode mode = Mode::none;
  double k = 1.0;  // used when mode == explicit_k

  /// "none", "coherent", "optimal" or "K=<value>". Throws DomainError otherwise.
  static Scaling parse(std::string_view text);
  std::string to_string() const;
};

struct RunConfig {
  Scheme scheme = Scheme::double_homodyne;
  double r = 0.0;
  double N = 0.0;
  std::optional<double> N2;  // second-mode thermal photons; defaults to N
  double q0 = 0.0;
  double p0 = 0.0;
  std::optional<double> prior_delta;  // parameters redrawn per shot when set
  std::uint64_t shots = 100000;
  std::uint64_t seed = 0;
  Scaling scaling;
  double jitter_q = 0.0;  // variance of the displacement error on q
  double jitter_p = 0.0;
  unsigned workers = 1;
};

struct RunStats {
  std::uint64_t shots = 0;
  double K_q = 1.0, K_p = 1.0;
  // Variance of the unscaled estimator for fixed true parameters (readout noise plus jitter).
  double var0_q = 0.0, var0_p = 0.0;

  double mean_est_q = 0.0, mean_est_p = 0.0;
  double bias_q = 0.0, bias_p = 0.0;  // mean of (estimate - true)
  double se_bias_q = 0.0, se_bias_p = 0.0;
  double mse_q = 0.0, mse_p = 0.0;
  double se_mse_q = 0.0, se_mse_p = 0.0;
  double mse_sum = 0.0;
  double se_mse_sum = 0.0;  // from the empirical fourth moment

  // Means of u^2, u z, z^2 for the unscaled estimate u and true value z; the MSE of
  // any rescaled estimator K u follows as K^2 uu - 2 K uz + zz.
  double uu_q = 0.0, uz_q = 0.0, zz_q = 0.0;
  double uu_p = 0.0, uz_p = 0.0, zz_p = 0.0;

  double analytic_mse_sum = 0.0;  // prediction for this configuration

  double mse_sum_for(double k_q, double k_p) const {
    return k_q * k_q * uu_q - 2.0 * k_q * uz_q + zz_q + k_p * k_p * uu_p - 2.0 * k_p * uz_p + zz_p;
  }
};

struct EstimationRun {
  RunConfig config;
  std::optional<RunStats> results;
};

struct Shot {
  std::uint64_t index;
  double q_true, p_true;
  double outcome_q, outcome_p;  // raw homodyne / heterodyne outcomes
  double est_q, est_p;          // scaled estimates
};

/// Double-homodyne scheme; `config.scheme` is ignored.
EstimationRun run_scheme(const RunConfig& config);
/// Coherent (or single-mode squeezed thermal) probe with heterodyne readout.
EstimationRun run_baseline_heterodyne(const RunConfig& config);
/// Dispatch on config.scheme.
EstimationRun run(const RunConfig& config);

/// Regenerate shots [first, first + count) sequentially.
void simulate_shots(const RunConfig& config, std::uint64_t first, std::uint64_t count,
                    const std::function<void(const Shot&)>& visit);

struct KScan {
  std::vector<double> grid;
  std::vector<double> mse;  // MSE sum per grid point
  double K_star = 0.0;
  double mse_star = 0.0;
};

/// Grid search of the common scaling factor K using one unscaled run; `base`
/// must carry a prior.
KScan empirical_K_min(const RunConfig& base, std::span<const double> grid);
KScan empirical_K_min(double r, double N, double delta, std::uint64_t shots,
                      std::span<const double> grid, std::uint64_t seed = 1);

/// Uniform grid on (0, 1]: k/steps for k = 1..steps.
std::vector<double> unit_k_grid(int steps);

struct UncertaintyProduct {
  double product;
  bool below_one;
};

/// MSE(q0) * MSE(p0); flagged when below 1.
UncertaintyProduct uncertainty_product(const RunStats& stats);

}  // namespace qdisp
