#pragma once

// Gaussian states of one or two bosonic modes in the (q1,p1,...,qm,pm) ordering,
// with hbar = 1, [q,p] = i and vacuum covariance I/2.

#include <Eigen/Dense>

#include <cstddef>

namespace qdisp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Quadrature { q, p };

/// Standard symplectic form, block-diagonal [[0,1],[-1,0]] per mode.
Matrix symplectic_form(int modes);

/// True when cov is symmetric and cov + (i/2) Omega has no eigenvalue below -tol.
bool is_physical(const Matrix& cov, double tol = 1e-10);

class GaussianState {
 public:
  /// Throws DomainError when the covariance is asymmetric or violates the uncertainty principle.
  GaussianState(Vector mean, Matrix cov);

  static GaussianState vacuum(int modes);

  int modes() const { return static_cast<int>(mean_.size() / 2); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }

  Eigen::Matrix2d mode_cov(int mode) const;
  Eigen::Vector2d mode_mean(int mode) const;

  /// 1 / sqrt(det(2 cov)).
  double purity() const;
  /// Symplectic eigenvalues in ascending order (each >= 1/2 for physical states).
  Vector symplectic_eigenvalues() const;

 private:
  Vector mean_;
  Matrix cov_;
};

/// Affine symplectic map x -> S x + d.
struct SymplecticTransform {
  Matrix S;
  Vector d;

  GaussianState apply(const GaussianState& state) const;
  bool is_symplectic(double tol = 1e-10) const;
};

SymplecticTransform single_mode_squeezer(int modes, int mode, double r);
SymplecticTransform two_mode_squeezer(int modes, int i, int j, double r);
SymplecticTransform displacement(int modes, int mode, double q0, double p0);
SymplecticTransform balanced_beam_splitter(int modes, int i, int j);
SymplecticTransform phase_rotation(int modes, int mode, double theta);

GaussianState make_thermal(double N, int modes);

/// diag(e^r, e^-r) on (q,p) of `mode`; r > 0 squeezes p.
GaussianState squeeze_single(const GaussianState& state, int mode, double r);
/// Two-mode squeezer with cosh r on the diagonal blocks and -sinh r * diag(1,-1) off-diagonal,
/// so that q_i - q_j and p_i + p_j are squeezed.
GaussianState squeeze_two(const GaussianState& state, int i, int j, double r);
GaussianState displace(const GaussianState& state, int mode, double q0, double p0);
/// q_i' = (q_i - q_j)/sqrt2, q_j' = (q_i + q_j)/sqrt2, and likewise for p.
GaussianState beamsplit_balanced(const GaussianState& state, int i, int j);
GaussianState rotate_phase(const GaussianState& state, int mode, double theta);

struct Marginal {
  double mean;
  double var;
};

Marginal homodyne_marginal(const GaussianState& state, int mode, Quadrature quadrature);

/// Covariance of the heterodyne outcome distribution: mode covariance plus I/2.
Eigen::Matrix2d heterodyne_outcome_cov(const GaussianState& state, int mode);

// Probe families.
GaussianState squeezed_thermal(double r, double N);
GaussianState two_mode_squeezed_thermal(double r, double N1, double N2);
inline GaussianState two_mode_squeezed_thermal(double r, double N) {
  return two_mode_squeezed_thermal(r, N, N);
}

/// Linear response of the double-homodyne readout to a displacement (q0,p0) on mode 0.
///
/// The displaced probe is sent through the balanced beam splitter; mode 0 is read out
/// in p and mode 1 in q. `gain_p` and `gain_q` are the slopes of the two outcome means
/// with respect to p0 and q0, and the variances are the exact homodyne marginals.
struct DoubleHomodyneResponse {
  double gain_p;
  double gain_q;
  double var_p;  // p-homodyne on output mode 0
  double var_q;  // q-homodyne on output mode 1
  double cross_p_from_q;  // d<p-outcome>/dq0, zero for the probes considered here
  double cross_q_from_p;
  double cov_qp;  // covariance of the two outcomes

  /// Variance of the rescaled estimators outcome/gain, summed over both parameters.
  double estimator_variance_sum() const {
    return var_p / (gain_p * gain_p) + var_q / (gain_q * gain_q);
  }
};

DoubleHomodyneResponse double_homodyne_response(const GaussianState& probe);

}  // namespace qdisp
