#include "qdisp/gaussian.hpp"

#include "qdisp/errors.hpp"

#include <cmath>
#include <complex>
#include <string>

namespace qdisp {

namespace {

void check_mode(int modes, int mode) {
  if (mode < 0 || mode >= modes) {
    throw DomainError("mode index " + std::to_string(mode) + " out of range for " +
                      std::to_string(modes) + "-mode state");
  }
}

void check_pair(int modes, int i, int j) {
  check_mode(modes, i);
  check_mode(modes, j);
  if (i == j) throw DomainError("two-mode operation needs distinct modes");
}

SymplecticTransform identity_transform(int modes) {
  return {Matrix::Identity(2 * modes, 2 * modes), Vector::Zero(2 * modes)};
}

}  // namespace

Matrix symplectic_form(int modes) {
  Matrix omega = Matrix::Zero(2 * modes, 2 * modes);
  for (int k = 0; k < modes; ++k) {
    omega(2 * k, 2 * k + 1) = 1.0;
    omega(2 * k + 1, 2 * k) = -1.0;
  }
  return omega;
}

bool is_physical(const Matrix& cov, double tol) {
  if (cov.rows() != cov.cols() || cov.rows() % 2 != 0 || cov.rows() == 0) return false;
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  const int modes = static_cast<int>(cov.rows() / 2);
  const Eigen::MatrixXcd m =
      cov.cast<std::complex<double>>() +
      std::complex<double>(0.0, 0.5) * symplectic_form(modes).cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

GaussianState::GaussianState(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size() || mean_.size() % 2 != 0 ||
      mean_.size() == 0) {
    throw DomainError("Gaussian state needs a 2m mean vector and a 2m x 2m covariance");
  }
  if (!is_physical(cov_)) {
    throw DomainError("covariance is not symmetric or violates the uncertainty principle");
  }
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
}

GaussianState GaussianState::vacuum(int modes) {
  if (modes < 1) throw DomainError("mode count must be positive");
  return {Vector::Zero(2 * modes), 0.5 * Matrix::Identity(2 * modes, 2 * modes)};
}

Eigen::Matrix2d GaussianState::mode_cov(int mode) const {
  check_mode(modes(), mode);
  return cov_.block<2, 2>(2 * mode, 2 * mode);
}

Eigen::Vector2d GaussianState::mode_mean(int mode) const {
  check_mode(modes(), mode);
  return mean_.segment<2>(2 * mode);
}

double GaussianState::purity() const { return 1.0 / std::sqrt((2.0 * cov_).determinant()); }

Vector GaussianState::symplectic_eigenvalues() const {
  // sqrt(cov) (i Omega) sqrt(cov) is Hermitian with eigenvalues +-nu_k.
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov_);
  const Matrix root = es.operatorSqrt();
  const Eigen::MatrixXcd k = std::complex<double>(0.0, 1.0) *
                             (root * symplectic_form(modes()) * root).cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ks(k, Eigen::EigenvaluesOnly);
  // Eigenvalues come sorted ascending; the upper half are the positive ones.
  return ks.eigenvalues().tail(modes()).eval();
}

GaussianState SymplecticTransform::apply(const GaussianState& state) const {
  if (S.rows() != state.mean().size()) throw DomainError("transform dimension mismatch");
  return {S * state.mean() + d, S * state.cov() * S.transpose()};
}

bool SymplecticTransform::is_symplectic(double tol) const {
  const int modes = static_cast<int>(S.rows() / 2);
  const Matrix omega = symplectic_form(modes);
  return (S * omega * S.transpose() - omega).cwiseAbs().maxCoeff() <= tol;
}

SymplecticTransform single_mode_squeezer(int modes, int mode, double r) {
  check_mode(modes, mode);
  auto t = identity_transform(modes);
  t.S(2 * mode, 2 * mode) = std::exp(r);
  t.S(2 * mode + 1, 2 * mode + 1) = std::exp(-r);
  return t;
}

SymplecticTransform two_mode_squeezer(int modes, int i, int j, double r) {
  check_pair(modes, i, j);
  auto t = identity_transform(modes);
  const double c = std::cosh(r);
  const double s = std::sinh(r);
  for (int k = 0; k < 2; ++k) {
    const double sign = (k == 0) ? 1.0 : -1.0;  // Z = diag(1,-1)
    t.S(2 * i + k, 2 * i + k) = c;
    t.S(2 * j + k, 2 * j + k) = c;
    t.S(2 * i + k, 2 * j + k) = -s * sign;
    t.S(2 * j + k, 2 * i + k) = -s * sign;
  }
  return t;
}

SymplecticTransform displacement(int modes, int mode, double q0, double p0) {
  check_mode(modes, mode);
  auto t = identity_transform(modes);
  t.d(2 * mode) = q0;
  t.d(2 * mode + 1) = p0;
  return t;
}

SymplecticTransform balanced_beam_splitter(int modes, int i, int j) {
  check_pair(modes, i, j);
  auto t = identity_transform(modes);
  const double h = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < 2; ++k) {
    t.S(2 * i + k, 2 * i + k) = h;
    t.S(2 * i + k, 2 * j + k) = -h;
    t.S(2 * j + k, 2 * i + k) = h;
    t.S(2 * j + k, 2 * j + k) = h;
  }
  return t;
}

SymplecticTransform phase_rotation(int modes, int mode, double theta) {
  check_mode(modes, mode);
  auto t = identity_transform(modes);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  t.S(2 * mode, 2 * mode) = c;
  t.S(2 * mode, 2 * mode + 1) = s;
  t.S(2 * mode + 1, 2 * mode) = -s;
  t.S(2 * mode + 1, 2 * mode + 1) = c;
  return t;
}

GaussianState make_thermal(double N, int modes) {
  if (!(N >= 0.0)) throw DomainError("thermal photon number must be >= 0");
  if (modes < 1) throw DomainError("mode count must be positive");
  return {Vector::Zero(2 * modes), (2.0 * N + 1.0) / 2.0 * Matrix::Identity(2 * modes, 2 * modes)};
}

GaussianState squeeze_single(const GaussianState& state, int mode, double r) {
  return single_mode_squeezer(state.modes(), mode, r).apply(state);
}

GaussianState squeeze_two(const GaussianState& state, int i, int j, double r) {
  return two_mode_squeezer(state.modes(), i, j, r).apply(state);
}

GaussianState displace(const GaussianState& state, int mode, double q0, double p0) {
  return displacement(state.modes(), mode, q0, p0).apply(state);
}

GaussianState beamsplit_balanced(const GaussianState& state, int i, int j) {
  return balanced_beam_splitter(state.modes(), i, j).apply(state);
}

GaussianState rotate_phase(const GaussianState& state, int mode, double theta) {
  return phase_rotation(state.modes(), mode, theta).apply(state);
}

Marginal homodyne_marginal(const GaussianState& state, int mode, Quadrature quadrature) {
  check_mode(state.modes(), mode);
  const int idx = 2 * mode + (quadrature == Quadrature::q ? 0 : 1);
  return {state.mean()(idx), state.cov()(idx, idx)};
}

Eigen::Matrix2d heterodyne_outcome_cov(const GaussianState& state, int mode) {
  return state.mode_cov(mode) + 0.5 * Eigen::Matrix2d::Identity();
}

GaussianState squeezed_thermal(double r, double N) {
  return squeeze_single(make_thermal(N, 1), 0, r);
}

GaussianState two_mode_squeezed_thermal(double r, double N1, double N2) {
  if (!(N1 >= 0.0) || !(N2 >= 0.0)) throw DomainError("thermal photon numbers must be >= 0");
  Matrix cov = Matrix::Zero(4, 4);
  cov.block<2, 2>(0, 0) = (2.0 * N1 + 1.0) / 2.0 * Eigen::Matrix2d::Identity();
  cov.block<2, 2>(2, 2) = (2.0 * N2 + 1.0) / 2.0 * Eigen::Matrix2d::Identity();
  return squeeze_two(GaussianState(Vector::Zero(4), cov), 0, 1, r);
}

DoubleHomodyneResponse double_homodyne_response(const GaussianState& probe) {
  if (probe.modes() != 2) throw DomainError("double-homodyne readout needs a two-mode probe");
  const GaussianState out0 = beamsplit_balanced(probe, 0, 1);
  const GaussianState out_q = beamsplit_balanced(displace(probe, 0, 1.0, 0.0), 0, 1);
  const GaussianState out_p = beamsplit_balanced(displace(probe, 0, 0.0, 1.0), 0, 1);

  const auto p0 = homodyne_marginal(out0, 0, Quadrature::p);
  const auto q1 = homodyne_marginal(out0, 1, Quadrature::q);

  DoubleHomodyneResponse resp{};
  resp.gain_p = homodyne_marginal(out_p, 0, Quadrature::p).mean - p0.mean;
  resp.gain_q = homodyne_marginal(out_q, 1, Quadrature::q).mean - q1.mean;
  resp.cross_p_from_q = homodyne_marginal(out_q, 0, Quadrature::p).mean - p0.mean;
  resp.cross_q_from_p = homodyne_marginal(out_p, 1, Quadrature::q).mean - q1.mean;
  resp.var_p = p0.var;
  resp.var_q = q1.var;
  resp.cov_qp = out0.cov()(2, 1);  // q of mode 1 with p of mode 0
  return resp;
}

}  // namespace qdisp
