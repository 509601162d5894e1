#pragma once

// Brute-force evaluation of displacement Fisher matrices in a truncated Fock space.
//
// This path never touches covariance matrices: probes are built from number-state
// density matrices and ladder operators, and H, J come from the spectral SLD sum and
// the generator trace formula for the RLD. It is slow and serves as ground truth for
// the Gaussian closed forms.
//
// Two frames are supported. In the lab frame the squeezer is exponentiated
// numerically and rho0 is diagonalised. In the thermal frame rho0 stays a diagonal
// product of thermal states and the quadratures are carried through the exact
// Bogoliubov map instead; Fisher matrices are unitarily invariant so both frames give
// the same numbers, but the thermal frame only needs enough levels to hold the
// thermal tail.

#include "qdisp/gaussian.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <optional>
#include <vector>

namespace qdisp {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx>;

enum class FockFrame { lab, thermal };

struct FockProbe {
  enum class Kind { single, tmst, tmst_asym } kind = Kind::single;
  double r = 0.0;
  double N1 = 0.0;  // thermal photons of mode 1 (and of mode 2 unless tmst_asym)
  double N2 = 0.0;

  static FockProbe single(double r, double N) { return {Kind::single, r, N, N}; }
  static FockProbe tmst(double r, double N) { return {Kind::tmst, r, N, N}; }
  static FockProbe tmst_asym(double r, double N1, double N2) { return {Kind::tmst_asym, r, N1, N2}; }

  int modes() const { return kind == Kind::single ? 1 : 2; }
};

struct FockOptions {
  int dim = 0;              // levels per mode; 0 picks a default and escalates
  int max_dim = 0;          // 0 -> 400 for one mode, 70 for two
  double tail_tol = 1e-10;  // allowed mass in the top 10% of levels (per mode)
  FockFrame frame = FockFrame::thermal;
};

/// Truncated operators and the probe state, expressed in one frame.
///
/// `a`, `q`, `p` are the frame images of the lab-frame ladder and quadrature
/// operators of each mode. The probe is stored by its spectral decomposition:
/// rho0 = V diag(spectrum) V^dagger, with V = identity in the thermal frame.
struct FockOperatorSet {
  int dim = 0;
  int modes = 1;
  FockFrame frame = FockFrame::thermal;
  std::vector<SpMat> a, adag, q, p;
  Eigen::VectorXd spectrum;
  Eigen::MatrixXcd eigenvectors;  // empty in the thermal frame; hilbert_size() x size() once displaced

  /// Number of eigenpairs of rho0.
  int size() const { return static_cast<int>(spectrum.size()); }
  /// Dimension of the truncated Hilbert space the operators act on.
  int hilbert_size() const { return q.empty() ? size() : static_cast<int>(q[0].rows()); }
  /// Dense rho0 in this frame. Throws DomainError above 4096 Hilbert-space states.
  Eigen::MatrixXcd density() const;
  /// Largest over modes of the probability mass in levels >= ceil(0.9 dim).
  double tail_mass() const;
  /// Generator matrices in the eigenbasis of rho0: G_q0 = p, G_p0 = -q of the displaced mode.
  std::vector<SpMat> generators(int displaced_mode) const;
};

/// Build the probe with automatic escalation of the truncation until the tail
/// invariant holds. Throws TruncationError (carrying the measured tail mass) if
/// max_dim is reached first.
FockOperatorSet build_probe_fock(const FockProbe& probe, const FockOptions& options = {});

/// Copy of `set` displaced by (q0, p0) on `mode`, in the same frame. The Weyl
/// operator factorises over the frame's ladder operators; each factor is
/// exponentiated in a padded space so that the kept levels are moved exactly.
/// The result lives on the padded space (dim grows) with a rectangular V.
FockOperatorSet displace_fock(const FockOperatorSet& set, int mode, double q0, double p0);

/// SLD Fisher matrix from the spectral sum over eigenpairs; pairs with
/// p_n + p_m < pair_eps are skipped.
Eigen::Matrix2d sld_fisher_fock(const FockOperatorSet& set, int displaced_mode,
                                double pair_eps = 1e-12);

/// RLD Fisher matrix J_{mu nu} = tr[G_nu rho^2 G_mu rho^{-1}] + tr[rho G_nu G_mu]
/// - 2 tr[rho G_mu G_nu]. rho^{-1} is taken on the eigenspace above inv_floor;
/// throws PureStateError when the generators move appreciable weight out of that
/// support (rank-deficient probe). The default floor is 1e-10 for a numerically
/// diagonalised rho0 and any strictly positive eigenvalue in the thermal frame,
/// where the spectrum is exact.
Eigen::Matrix2cd rld_fisher_fock(const FockOperatorSet& set, int displaced_mode,
                                 std::optional<double> inv_floor = std::nullopt);

struct QuadOp {
  int mode;
  Quadrature quad;
};
using Monomial = std::vector<QuadOp>;

/// tr[rho0 X_1 X_2 ... X_k] for each monomial (operators applied right to left).
std::vector<cplx> moments_fock(const FockOperatorSet& set, const std::vector<Monomial>& monomials);

struct FockFisher {
  Eigen::Matrix2d H;
  std::optional<Eigen::Matrix2cd> J;  // empty for pure probes
  int dim;        // truncation at which the result was accepted
  double change;  // max entry change between dim and dim + 5
};

/// H and J accepted only when the results at dim and dim + 5 differ by less than
/// conv_tol (absolute, entrywise); the truncation escalates in steps of 5 otherwise.
FockFisher converged_fisher_fock(const FockProbe& probe, int displaced_mode,
                                 const FockOptions& options = {}, double conv_tol = 1e-8);

}  // namespace qdisp
