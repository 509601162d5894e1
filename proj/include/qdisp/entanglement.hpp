#pragma once

// Duan inseparability test on two-mode Gaussian states and its relation to the
// double-homodyne scheme beating the SQL.

#include "qdisp/gaussian.hpp"

#include <cstdint>
#include <optional>

namespace qdisp {

struct DuanResult {
  double a;
  double lhs;  // Var(u) + Var(v), u = |a| q1 + q2/a, v = |a| p1 - p2/a
  double rhs;  // a^2 + 1/a^2
  bool entangled_sufficient;  // lhs < rhs - 1e-12
  bool symmetric;             // both reduced covariances agree
};

/// Throws DomainError for a = 0 or a state that is not two-mode.
DuanResult duan_check(const GaussianState& state, double a = 1.0);

/// Smallest symplectic eigenvalue of the partially transposed covariance (p2 -> -p2).
double ppt_min_symplectic(const GaussianState& state);
/// PPT criterion; necessary and sufficient for two-mode Gaussian states.
bool ppt_entangled(const GaussianState& state, double tol = 1e-12);

/// Var(p-outcome)/gain_p^2 + Var(q-outcome)/gain_q^2 of the double-homodyne readout
/// with the displacement on mode 0.
double double_homodyne_variance_sum(const GaussianState& probe);

struct SqlEntanglementReport {
  double r;
  double N1;
  double N2;
  bool symmetric;
  double E;         // double-homodyne variance sum
  double duan_lhs;  // at a = 1
  bool duan_entangled;
  bool entangled;  // PPT
  bool beats_sql;  // E < 2
  // Asymmetric probes: beats_sql holds for N2 < N2_sql and the state stays entangled
  // for N2 < N2_ent (nullopt: entangled for every N2 probed). Entangled probes that fail
  // to beat the SQL exist whenever N2_ent > N2_sql.
  std::optional<double> N2_sql;
  std::optional<double> N2_ent;
};

SqlEntanglementReport sql_beating_vs_entanglement(double r, double N);
SqlEntanglementReport sql_beating_vs_entanglement(double r, double N1, double N2);

/// Thermal photon number of mode 2 at which the scheme variance sum of
/// TMST(r, N1, N2) crosses 2, by bisection to `tol`. nullopt when E >= 2 already at N2 = 0.
std::optional<double> sql_threshold_N2(double r, double N1, double tol = 1e-8);

/// Deterministic random two-mode state without local squeezing: thermal(N1) x thermal(N2),
/// two-mode squeezed by r, then local phase rotations. N1, N2 in [0, 3), r in [0, 1.5).
GaussianState random_locally_unsqueezed(std::uint64_t seed, std::uint64_t index);

}  // namespace qdisp
