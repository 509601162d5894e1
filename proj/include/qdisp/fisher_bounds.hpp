#pragma once

// Quantum Cramer-Rao bounds for joint estimation of a displacement (q0, p0)
// imprinted on one mode of a Gaussian probe.

#include "qdisp/gaussian.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace qdisp {

/// SLD matrix H and the inverse RLD matrix J^{-1}, parameter order (q0, p0).
///
/// J^{-1} is stored instead of J: it exists for every physical probe while J
/// diverges for pure ones, and all bound formulas consume the inverse.
struct FisherMatrices {
  Eigen::Matrix2d H;
  Eigen::Matrix2cd Jinv;
  bool pure = false;  // cov + (i/2) Omega is singular
};

/// H is the displaced-mode block of cov^{-1}; J^{-1} is the Schur complement of
/// cov - (i/2) Omega onto the displaced mode (the sign of the imaginary part follows
/// J_{mu nu} = tr[rho L_nu L_mu^dagger] with G_q0 = p, G_p0 = -q).
FisherMatrices gaussian_fisher(const GaussianState& probe, int displaced_mode = 0);

/// Fisher information of the product Gaussian prior G(0,delta^2) x G(0,delta^2): I / delta^2.
/// A non-finite delta is the flat prior and gives the zero matrix.
Eigen::Matrix2d prior_fisher_gaussian(double delta);

/// tr[G (H + A)^{-1}] / M. Returns +inf when H + A is singular.
double bound_sld(const FisherMatrices& fm, const Eigen::Matrix2d& G = Eigen::Matrix2d::Identity(),
                 const Eigen::Matrix2d& A = Eigen::Matrix2d::Zero(), int shots = 1);

/// (tr[G Re X] + tr|G Im X|) / M with X = (J + A)^{-1}, evaluated as (I + J^{-1} A)^{-1} J^{-1}
/// so that pure probes (singular J^{-1}) go through the same path.
double bound_rld(const FisherMatrices& fm, const Eigen::Matrix2d& G = Eigen::Matrix2d::Identity(),
                 const Eigen::Matrix2d& A = Eigen::Matrix2d::Zero(), int shots = 1);

/// Trace norm of a real 2x2 matrix, sqrt of the eigenvalues of X^T X clipped at 1e-14.
double trace_abs(const Eigen::Matrix2d& X);

enum class ProbeKind { coherent, single, tmst, tmst_asym };

std::string_view to_string(ProbeKind kind);
std::optional<ProbeKind> parse_probe_kind(std::string_view name);

struct ProbeSpec {
  ProbeKind kind = ProbeKind::coherent;
  double r = 0.0;
  double N = 0.0;   // single and tmst
  double N1 = 0.0;  // tmst_asym
  double N2 = 0.0;

  GaussianState state() const;
  /// Symmetric N used for the thresholds; N1 for the asymmetric family.
  double thermal() const;
};

struct BoundQuery {
  ProbeSpec probe;
  Eigen::Matrix2d G = Eigen::Matrix2d::Identity();
  double delta = std::numeric_limits<double>::infinity();  // infinity = flat prior
  int shots = 1;
};

enum class Branch { sld, rld };
std::string_view to_string(Branch b);

struct BoundReport {
  double B_S = 0.0;
  double B_R = 0.0;
  double B_MI = 0.0;
  Branch branch = Branch::sld;
  double r_ths = 0.0;
  double r_sql = 0.0;
  bool pure = false;
};

/// Validates the query (G > 0, delta > 0, M >= 1) and evaluates both bounds.
BoundReport bound_most_informative(const BoundQuery& query);

struct Thresholds {
  double r_ths;  // SLD/RLD switch of the two-mode most-informative bound
  double r_sql;  // squeezing above which the double-homodyne scheme beats the SQL
};
Thresholds thresholds(double N);

// Closed forms for the probe families; used as cross-checks of the matrix route.
namespace closed_form {
double single_mode_sld(double r, double N);  // (2N+1) cosh 2r
double single_mode_mi(double r, double N);   // (2N+1) cosh 2r + 1
double tmst_sld(double r, double N);
double tmst_rld(double r, double N);
double tmst_mi(double r, double N);
double tmst_sld_prior(double r, double N, double delta);
double tmst_rld_prior(double r, double N, double delta);
double tmst_mi_prior(double r, double N, double delta);
double sql_prior(double delta);  // 2 delta^2 / (1 + delta^2)
}  // namespace closed_form

inline constexpr double kSql = 2.0;

/// Double-homodyne variance sum E = 2(2N+1)e^{-2r} + jitter_q + jitter_p (jitter given as variances).
double scheme_variance_sum(double r, double N, double jitter_q = 0.0, double jitter_p = 0.0);

/// Relative gap (E - B_MI) / B_MI between the scheme and the two-mode most-informative bound.
double gap_D(double r, double N);

struct ScalingFactors {
  double K_c;
  double K_min;
  double mse_min;  // averaged MSE sum with K_min
  double mse_Kc;   // averaged MSE sum with K_c
};

/// Scaling factors for estimators K * outcome under a Gaussian prior of width delta,
/// given a per-parameter unscaled estimator variance var0.
ScalingFactors scaling_factors(double var0, double delta);

}  // namespace qdisp
