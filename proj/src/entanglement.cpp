#include "qdisp/entanglement.hpp"

#include "qdisp/errors.hpp"
#include "qdisp/philox.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>

namespace qdisp {

namespace {

void require_two_modes(const GaussianState& s) {
  if (s.modes() != 2) throw DomainError("entanglement tests need a two-mode state");
}

bool reduced_symmetric(const GaussianState& s) {
  const Eigen::Matrix2d diff = s.mode_cov(0) - s.mode_cov(1);
  const double scale = std::max(1.0, s.cov().cwiseAbs().maxCoeff());
  return diff.cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

// Largest N2 probed when looking for the end of the entangled region.
constexpr double kN2Cap = 1e6;

template <class F>
double bisect(F above, double lo, double hi, double tol) {
  // above(lo) is false, above(hi) is true
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (above(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

std::optional<double> ppt_threshold_N2(double r, double N1, double tol) {
  auto separable = [&](double n2) { return !ppt_entangled(two_mode_squeezed_thermal(r, N1, n2)); };
  if (separable(0.0)) return 0.0;
  double hi = 1.0;
  while (!separable(hi)) {
    if (hi >= kN2Cap) return std::nullopt;
    hi *= 2.0;
  }
  return bisect(separable, 0.0, hi, tol);
}

}  // namespace

DuanResult duan_check(const GaussianState& state, double a) {
  require_two_modes(state);
  if (a == 0.0 || !std::isfinite(a)) throw DomainError("Duan parameter a must be finite and nonzero");
  const auto& c = state.cov();
  const double s = std::abs(a);
  const double sign = s / a;  // |a| / a
  const double var_u = s * s * c(0, 0) + 2.0 * sign * c(0, 2) + c(2, 2) / (a * a);
  const double var_v = s * s * c(1, 1) - 2.0 * sign * c(1, 3) + c(3, 3) / (a * a);
  DuanResult res;
  res.a = a;
  res.lhs = var_u + var_v;
  res.rhs = a * a + 1.0 / (a * a);
  res.entangled_sufficient = res.lhs < res.rhs - 1e-12;
  res.symmetric = reduced_symmetric(state);
  return res;
}

double ppt_min_symplectic(const GaussianState& state) {
  require_two_modes(state);
  Eigen::Matrix4d pt = state.cov();
  pt.row(3) *= -1.0;
  pt.col(3) *= -1.0;
  // eigenvalues of Omega * cov come in pairs +-i nu
  const Eigen::Matrix4d M = symplectic_form(2) * pt;
  const Eigen::EigenSolver<Eigen::Matrix4d> es(M, false);
  double nu = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) nu = std::min(nu, std::abs(es.eigenvalues()(k).imag()));
  return nu;
}

bool ppt_entangled(const GaussianState& state, double tol) {
  return ppt_min_symplectic(state) < 0.5 - tol;
}

double double_homodyne_variance_sum(const GaussianState& probe) {
  return double_homodyne_response(probe).estimator_variance_sum();
}

std::optional<double> sql_threshold_N2(double r, double N1, double tol) {
  if (!(N1 >= 0.0) || !std::isfinite(r)) throw DomainError("invalid probe parameters");
  auto fails = [&](double n2) {
    return double_homodyne_variance_sum(two_mode_squeezed_thermal(r, N1, n2)) >= 2.0;
  };
  if (fails(0.0)) return std::nullopt;
  double hi = 1.0;
  while (!fails(hi)) hi *= 2.0;
  return bisect(fails, 0.0, hi, tol);
}

SqlEntanglementReport sql_beating_vs_entanglement(double r, double N1, double N2) {
  const GaussianState probe = two_mode_squeezed_thermal(r, N1, N2);
  const DuanResult duan = duan_check(probe, 1.0);
  SqlEntanglementReport rep;
  rep.r = r;
  rep.N1 = N1;
  rep.N2 = N2;
  rep.symmetric = duan.symmetric;
  rep.E = double_homodyne_variance_sum(probe);
  rep.duan_lhs = duan.lhs;
  rep.duan_entangled = duan.entangled_sufficient;
  rep.entangled = ppt_entangled(probe);
  rep.beats_sql = rep.E < 2.0;
  if (!rep.symmetric) {
    rep.N2_sql = sql_threshold_N2(r, N1);
    rep.N2_ent = ppt_threshold_N2(r, N1, 1e-8);
  }
  return rep;
}

SqlEntanglementReport sql_beating_vs_entanglement(double r, double N) {
  return sql_beating_vs_entanglement(r, N, N);
}

GaussianState random_locally_unsqueezed(std::uint64_t seed, std::uint64_t index) {
  const Philox4x32 gen(seed);
  const NormalStream ns(gen, index, 1);
  const double N1 = 3.0 * (1.0 - ns.uniform(0));
  const double N2 = 3.0 * (1.0 - ns.uniform(1));
  const double r = 1.5 * (1.0 - ns.uniform(2));
  const double th1 = 2.0 * std::numbers::pi * ns.uniform(3);
  // Opposite rotations leave a TMST invariant; spreading th1 + th2 over [-0.5, 0.5)
  // yields a mix of states that beat the SQL and states that do not.
  const double th2 = -th1 + (ns.uniform(4) - 0.5);
  GaussianState s = two_mode_squeezed_thermal(r, N1, N2);
  s = rotate_phase(s, 0, th1);
  return rotate_phase(s, 1, th2);
}

}  // namespace qdisp
