#include "qdisp/fisher_bounds.hpp"

#include "qdisp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace qdisp {

namespace {

using cd = std::complex<double>;

bool finite_delta(double delta) { return std::isfinite(delta); }

void check_delta(double delta) {
  if (!(delta > 0.0)) throw DomainError("prior width delta must be > 0");
}

void check_N(double N) {
  if (!(N >= 0.0)) throw DomainError("thermal photon number must be >= 0");
}

// Moore-Penrose inverse of a Hermitian matrix.
Eigen::MatrixXcd hermitian_pinv(const Eigen::MatrixXcd& m, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  Eigen::VectorXd inv = es.eigenvalues();
  for (Eigen::Index k = 0; k < inv.size(); ++k) inv(k) = std::abs(inv(k)) > tol ? 1.0 / inv(k) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

FisherMatrices gaussian_fisher(const GaussianState& probe, int displaced_mode) {
  const int m = probe.modes();
  if (displaced_mode < 0 || displaced_mode >= m) throw DomainError("displaced mode out of range");
  const int k = 2 * displaced_mode;

  FisherMatrices fm;
  const Matrix cov_inv = probe.cov().inverse();
  fm.H = cov_inv.block<2, 2>(k, k);
  fm.H = 0.5 * (fm.H + fm.H.transpose()).eval();

  // The literal RLD operator route gives the conjugate of the cov + (i/2) Omega block.
  const Eigen::MatrixXcd full =
      probe.cov().cast<cd>() - cd(0.0, 0.5) * symplectic_form(m).cast<cd>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(full, Eigen::EigenvaluesOnly);
  fm.pure = es.eigenvalues().minCoeff() < 1e-10;

  // Schur complement of `full` onto the displaced mode.
  std::vector<int> rest;
  for (int i = 0; i < 2 * m; ++i) {
    if (i != k && i != k + 1) rest.push_back(i);
  }
  Eigen::Matrix2cd jinv = full.block<2, 2>(k, k);
  if (!rest.empty()) {
    const auto n = static_cast<Eigen::Index>(rest.size());
    Eigen::MatrixXcd b(2, n);
    Eigen::MatrixXcd d(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      b(0, c) = full(k, rest[c]);
      b(1, c) = full(k + 1, rest[c]);
      for (Eigen::Index r = 0; r < n; ++r) d(r, c) = full(rest[r], rest[c]);
    }
    jinv -= b * hermitian_pinv(d, 1e-12) * b.adjoint();
  }
  fm.Jinv = 0.5 * (jinv + jinv.adjoint());
  return fm;
}

Eigen::Matrix2d prior_fisher_gaussian(double delta) {
  check_delta(delta);
  if (!finite_delta(delta)) return Eigen::Matrix2d::Zero();
  return Eigen::Matrix2d::Identity() / (delta * delta);
}

double bound_sld(const FisherMatrices& fm, const Eigen::Matrix2d& G, const Eigen::Matrix2d& A,
                 int shots) {
  if (shots < 1) throw DomainError("number of measurements must be >= 1");
  const Eigen::Matrix2d total = fm.H + A;
  const double det = total.determinant();
  if (!(std::abs(det) > 1e-300)) return std::numeric_limits<double>::infinity();
  return (G * total.inverse()).trace() / shots;
}

double trace_abs(const Eigen::Matrix2d& X) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(X.transpose() * X, Eigen::EigenvaluesOnly);
  double sum = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev > 1e-14) sum += std::sqrt(ev);
  }
  return sum;
}

double bound_rld(const FisherMatrices& fm, const Eigen::Matrix2d& G, const Eigen::Matrix2d& A,
                 int shots) {
  if (shots < 1) throw DomainError("number of measurements must be >= 1");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(fm.Jinv, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > -1e-9)) {
    throw NumericalError("RLD bound unavailable: J^{-1} is not positive semidefinite");
  }
  const Eigen::Matrix2cd lhs = Eigen::Matrix2cd::Identity() + fm.Jinv * A.cast<cd>();
  Eigen::FullPivLU<Eigen::Matrix2cd> lu(lhs);
  if (!lu.isInvertible()) throw NumericalError("RLD bound unavailable: J + A is singular");
  Eigen::Matrix2cd x = lu.solve(fm.Jinv);
  x = 0.5 * (x + x.adjoint()).eval();
  return ((G * x.real()).trace() + trace_abs(G * x.imag())) / shots;
}

std::string_view to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::coherent: return "coherent";
    case ProbeKind::single: return "single";
    case ProbeKind::tmst: return "tmst";
    case ProbeKind::tmst_asym: return "tmst-asym";
  }
  return "?";
}

std::optional<ProbeKind> parse_probe_kind(std::string_view name) {
  for (auto k : {ProbeKind::coherent, ProbeKind::single, ProbeKind::tmst, ProbeKind::tmst_asym}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Branch b) { return b == Branch::sld ? "S" : "R"; }

GaussianState ProbeSpec::state() const {
  switch (kind) {
    case ProbeKind::coherent: return GaussianState::vacuum(1);
    case ProbeKind::single: return squeezed_thermal(r, N);
    case ProbeKind::tmst: return two_mode_squeezed_thermal(r, N);
    case ProbeKind::tmst_asym: return two_mode_squeezed_thermal(r, N1, N2);
  }
  throw DomainError("unknown probe kind");
}

double ProbeSpec::thermal() const {
  switch (kind) {
    case ProbeKind::coherent: return 0.0;
    case ProbeKind::tmst_asym: return N1;
    default: return N;
  }
}

BoundReport bound_most_informative(const BoundQuery& query) {
  check_delta(query.delta);
  if (query.shots < 1) throw DomainError("number of measurements must be >= 1");
  if ((query.G - query.G.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("weight matrix G must be symmetric");
  }
  if (!(query.G.determinant() > 0.0 && query.G(0, 0) > 0.0)) {
    throw DomainError("weight matrix G must be positive definite");
  }
  const auto fm = gaussian_fisher(query.probe.state(), 0);
  const Eigen::Matrix2d A = prior_fisher_gaussian(query.delta);

  BoundReport rep;
  rep.pure = fm.pure;
  rep.B_S = bound_sld(fm, query.G, A, query.shots);
  const bool pure_tmst = fm.pure && (query.probe.kind == ProbeKind::tmst || query.probe.kind == ProbeKind::tmst_asym);
  // Pure TMST: the conditional J^{-1} block vanishes, B_R is the N -> 0+ limit.
  rep.B_R = pure_tmst ? 0.0 : bound_rld(fm, query.G, A, query.shots);
  rep.branch = rep.B_S >= rep.B_R ? Branch::sld : Branch::rld;
  rep.B_MI = std::max(rep.B_S, rep.B_R);
  const auto th = thresholds(query.probe.thermal());
  rep.r_ths = th.r_ths;
  rep.r_sql = th.r_sql;
  return rep;
}

Thresholds thresholds(double N) {
  check_N(N);
  return {0.5 * std::acosh(2.0 * N + 1.0), 0.25 * std::log1p(4.0 * N + 4.0 * N * N)};
}

namespace closed_form {

double single_mode_sld(double r, double N) { return (2.0 * N + 1.0) * std::cosh(2.0 * r); }

double single_mode_mi(double r, double N) { return single_mode_sld(r, N) + 1.0; }

double tmst_sld(double r, double N) { return (2.0 * N + 1.0) / std::cosh(2.0 * r); }

double tmst_rld(double r, double N) {
  if (N == 0.0) return 0.0;  // pure-probe limit N -> 0+
  return 4.0 * N * (1.0 + N) / ((2.0 * N + 1.0) * std::cosh(2.0 * r) - 1.0);
}

double tmst_mi(double r, double N) {
  // Piecewise at r_ths; both expressions agree at the switch.
  return r < thresholds(N).r_ths ? tmst_rld(r, N) : tmst_sld(r, N);
}

double tmst_sld_prior(double r, double N, double delta) {
  if (!finite_delta(delta)) return tmst_sld(r, N);
  const double d2 = delta * delta;
  return 2.0 * (2.0 * N + 1.0) * d2 / (2.0 * N + 1.0 + 2.0 * d2 * std::cosh(2.0 * r));
}

double tmst_rld_prior(double r, double N, double delta) {
  if (!finite_delta(delta)) return tmst_rld(r, N);
  if (N == 0.0) return 0.0;
  const double d2 = delta * delta;
  return 4.0 * N * (1.0 + N) * d2 /
         (2.0 * N * (1.0 + N) + d2 * ((2.0 * N + 1.0) * std::cosh(2.0 * r) - 1.0));
}

double tmst_mi_prior(double r, double N, double delta) {
  return std::max(tmst_sld_prior(r, N, delta), tmst_rld_prior(r, N, delta));
}

double sql_prior(double delta) {
  if (!finite_delta(delta)) return kSql;
  return 2.0 * delta * delta / (1.0 + delta * delta);
}

}  // namespace closed_form

double scheme_variance_sum(double r, double N, double jitter_q, double jitter_p) {
  check_N(N);
  if (!(r >= 0.0)) throw DomainError("squeezing r must be >= 0");
  if (!(jitter_q >= 0.0) || !(jitter_p >= 0.0)) throw DomainError("jitter variances must be >= 0");
  return 2.0 * (2.0 * N + 1.0) * std::exp(-2.0 * r) + jitter_q + jitter_p;
}

double gap_D(double r, double N) {
  const double e = scheme_variance_sum(r, N);
  const double b = closed_form::tmst_mi(r, N);
  return (e - b) / b;
}

ScalingFactors scaling_factors(double var0, double delta) {
  if (!(var0 > 0.0)) throw DomainError("Var0 must be > 0");
  check_delta(delta);
  if (!finite_delta(delta)) return {1.0, 1.0, 2.0 * var0, 2.0 * var0};
  const double d2 = delta * delta;
  ScalingFactors sf;
  sf.K_c = d2 / (1.0 + d2);
  sf.K_min = d2 / (var0 + d2);
  sf.mse_min = 2.0 * var0 * d2 / (var0 + d2);
  sf.mse_Kc = 2.0 * d2 * (1.0 + d2 * var0) / ((1.0 + d2) * (1.0 + d2));
  return sf;
}

}  // namespace qdisp
