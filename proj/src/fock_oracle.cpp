#include "qdisp/fock_oracle.hpp"

#include "qdisp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qdisp {

namespace {

SpMat ladder(int dim) {
  SpMat a(dim, dim);
  std::vector<Eigen::Triplet<cplx>> t;
  for (int n = 1; n < dim; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

SpMat identity(int dim) {
  SpMat id(dim, dim);
  id.setIdentity();
  return id;
}

SpMat kron(const SpMat& x, const SpMat& y) {
  SpMat out(x.rows() * y.rows(), x.cols() * y.cols());
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(x.nonZeros() * y.nonZeros()));
  for (int kx = 0; kx < x.outerSize(); ++kx) {
    for (SpMat::InnerIterator ix(x, kx); ix; ++ix) {
      for (int ky = 0; ky < y.outerSize(); ++ky) {
        for (SpMat::InnerIterator iy(y, ky); iy; ++iy) {
          t.emplace_back(ix.row() * y.rows() + iy.row(), ix.col() * y.cols() + iy.col(),
                         ix.value() * iy.value());
        }
      }
    }
  }
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SpMat adjoint(const SpMat& m) { return SpMat(m.adjoint()); }

SpMat quad_q(const SpMat& a) { return (a + adjoint(a)) * cplx(1.0 / std::sqrt(2.0), 0.0); }
SpMat quad_p(const SpMat& a) { return (a - adjoint(a)) * cplx(0.0, -1.0 / std::sqrt(2.0)); }

// Truncated thermal distribution, renormalised to unit trace.
Eigen::VectorXd thermal_populations(double N, int dim) {
  Eigen::VectorXd pop(dim);
  const double x = N / (N + 1.0);
  double w = 1.0;
  for (int n = 0; n < dim; ++n) {
    pop(n) = w;
    w *= x;
  }
  return pop / pop.sum();
}

// exp(K) for anti-Hermitian K, via the Hermitian matrix iK.
Eigen::MatrixXcd expm_antihermitian(const Eigen::MatrixXcd& K) {
  const Eigen::MatrixXcd h = cplx(0.0, 1.0) * K;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
  Eigen::VectorXcd phase(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < phase.size(); ++k) phase(k) = std::exp(cplx(0.0, -es.eigenvalues()(k)));
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

double geometric_tail(double N, int dim) {
  const int start = static_cast<int>(std::ceil(0.9 * dim));
  const Eigen::VectorXd pop = thermal_populations(N, dim);
  return pop.tail(dim - start).sum();
}

int default_dim(const FockProbe& probe, const FockOptions& opt) {
  if (opt.dim > 0) return opt.dim;
  const double nmax = std::max(probe.N1, probe.N2);
  if (opt.frame == FockFrame::lab) {
    return std::max(20, static_cast<int>(std::ceil((nmax + 1.0) * std::cosh(2.0 * probe.r) * 8.0)));
  }
  int d = 20;
  while (geometric_tail(nmax, d) > opt.tail_tol && d < 1000) ++d;
  return d;
}

int max_dim(const FockProbe& probe, const FockOptions& opt) {
  if (opt.max_dim > 0) return opt.max_dim;
  if (probe.modes() == 1) return 400;
  return opt.frame == FockFrame::lab ? 40 : 70;
}

FockOperatorSet build_at(const FockProbe& probe, int dim, FockFrame frame) {
  FockOperatorSet set;
  set.dim = dim;
  set.modes = probe.modes();
  set.frame = frame;

  const SpMat a = ladder(dim);
  std::vector<SpMat> lab_a;
  if (set.modes == 1) {
    lab_a.push_back(a);
  } else {
    lab_a.push_back(kron(a, identity(dim)));
    lab_a.push_back(kron(identity(dim), a));
  }

  Eigen::VectorXd pop = thermal_populations(probe.N1, dim);
  if (set.modes == 2) {
    const Eigen::VectorXd pop2 = thermal_populations(probe.N2, dim);
    Eigen::VectorXd prod(dim * dim);
    for (int n = 0; n < dim; ++n) prod.segment(n * dim, dim) = pop(n) * pop2;
    pop = prod;
  }

  const double c = std::cosh(probe.r);
  const double s = std::sinh(probe.r);
  if (frame == FockFrame::thermal) {
    // Heisenberg images of the lab ladder operators under the squeezer.
    if (set.modes == 1) {
      set.a.push_back(lab_a[0] * cplx(c) + adjoint(lab_a[0]) * cplx(s));
    } else {
      set.a.push_back(lab_a[0] * cplx(c) - adjoint(lab_a[1]) * cplx(s));
      set.a.push_back(lab_a[1] * cplx(c) - adjoint(lab_a[0]) * cplx(s));
    }
    set.spectrum = pop;
  } else {
    set.a = lab_a;
    // Single mode: exp{(r/2)(a^dag^2 - a^2)}; two modes: exp{r(a b - a^dag b^dag)}.
    Eigen::MatrixXcd K;
    if (set.modes == 1) {
      const SpMat ad = adjoint(lab_a[0]);
      K = Eigen::MatrixXcd(SpMat(ad * ad - lab_a[0] * lab_a[0])) * (0.5 * probe.r);
    } else {
      const SpMat ab = lab_a[0] * lab_a[1];
      K = Eigen::MatrixXcd(SpMat(ab - adjoint(ab))) * probe.r;
    }
    const Eigen::MatrixXcd U = expm_antihermitian(K);
    Eigen::MatrixXcd rho = U * pop.cast<cplx>().asDiagonal() * U.adjoint();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    set.spectrum = es.eigenvalues();
    set.eigenvectors = es.eigenvectors();
  }
  for (const auto& op : set.a) {
    set.adag.push_back(adjoint(op));
    set.q.push_back(quad_q(op));
    set.p.push_back(quad_p(op));
  }
  return set;
}

void check_probe(const FockProbe& probe) {
  if (!(probe.N1 >= 0.0) || !(probe.N2 >= 0.0)) throw DomainError("thermal photon number must be >= 0");
  if (!std::isfinite(probe.r)) throw DomainError("squeezing must be finite");
}

void check_mode(const FockOperatorSet& set, int mode) {
  if (mode < 0 || mode >= set.modes) throw DomainError("mode index out of range");
}

double clipped(double p) { return p > 0.0 ? p : 0.0; }

}  // namespace

Eigen::MatrixXcd FockOperatorSet::density() const {
  if (hilbert_size() > 4096) throw DomainError("density matrix too large to materialise");
  if (eigenvectors.size() == 0) return spectrum.cast<cplx>().asDiagonal();
  return eigenvectors * spectrum.cast<cplx>().asDiagonal() * eigenvectors.adjoint();
}

double FockOperatorSet::tail_mass() const {
  Eigen::VectorXd diag;
  if (eigenvectors.size() == 0) {
    diag = spectrum;
  } else {
    diag = (eigenvectors * spectrum.cwiseMax(0.0).asDiagonal() * eigenvectors.adjoint())
               .diagonal()
               .real();
  }
  const int start = static_cast<int>(std::ceil(0.9 * dim));
  double worst = 0.0;
  for (int mode = 0; mode < modes; ++mode) {
    double tail = 0.0;
    for (int idx = 0; idx < diag.size(); ++idx) {
      const int level = (modes == 1) ? idx : (mode == 0 ? idx / dim : idx % dim);
      if (level >= start) tail += std::max(diag(idx), 0.0);
    }
    worst = std::max(worst, tail);
  }
  return worst;
}

std::vector<SpMat> FockOperatorSet::generators(int displaced_mode) const {
  check_mode(*this, displaced_mode);
  std::vector<SpMat> gens{p[displaced_mode], SpMat(q[displaced_mode] * cplx(-1.0))};
  if (eigenvectors.size() == 0) return gens;
  for (auto& g : gens) {
    const Eigen::MatrixXcd dense = eigenvectors.adjoint() * (g * eigenvectors);
    g = dense.sparseView(1.0, 1e-300);
  }
  return gens;
}

FockOperatorSet build_probe_fock(const FockProbe& probe, const FockOptions& options) {
  check_probe(probe);
  const int cap = max_dim(probe, options);
  int dim = std::min(default_dim(probe, options), cap);
  double tail = 1.0;
  while (true) {
    FockOperatorSet set = build_at(probe, dim, options.frame);
    tail = set.tail_mass();
    if (tail <= options.tail_tol) return set;
    if (dim >= cap) break;
    dim = std::min(dim + 5, cap);
  }
  std::ostringstream msg;
  msg << "Fock truncation insufficient: tail mass " << tail << " at dim " << dim << " exceeds "
      << options.tail_tol;
  throw TruncationError(msg.str(), tail, dim);
}

FockOperatorSet displace_fock(const FockOperatorSet& set, int mode, double q0, double p0) {
  check_mode(set, mode);
  if (!std::isfinite(q0) || !std::isfinite(p0)) throw DomainError("displacement must be finite");
  const int d = set.dim;
  const int m = set.modes;
  // Frame ladder operators of the stored basis, one per mode.
  auto unit = [&](int k) { return m == 1 ? 1 : (k == 0 ? d : 1); };
  // set.a[j] = sum_k u(j,k) A_k + v(j,k) A_k^dag; read the coefficients off the one-photon elements.
  Eigen::MatrixXcd u(m, m), v(m, m);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) {
      u(j, k) = set.a[j].coeff(0, unit(k));
      v(j, k) = set.a[j].coeff(unit(k), 0);
    }
  }
  // i (p0 q - q0 p) = sum_k gamma_k A_k^dag - conj(gamma_k) A_k
  const double rt2 = std::sqrt(2.0);
  std::vector<cplx> gamma(m);
  for (int k = 0; k < m; ++k) {
    const cplx q_dag = (std::conj(u(mode, k)) + v(mode, k)) / rt2;                  // A_k^dag coefficient of q
    const cplx p_dag = cplx(0.0, -1.0) * (v(mode, k) - std::conj(u(mode, k))) / rt2;  // ... of p
    gamma[k] = cplx(0.0, 1.0) * (p0 * q_dag - q0 * p_dag);
  }

  // Single-mode displacements in a padded space, so that D|n> is exact for every kept level n < d.
  auto factor = [&](cplx g, int levels) {
    const SpMat a = ladder(levels);
    const Eigen::MatrixXcd K = Eigen::MatrixXcd(SpMat(adjoint(a) * g - a * std::conj(g)));
    return Eigen::MatrixXcd(expm_antihermitian(K).leftCols(d));
  };
  double reach = 0.0;
  for (const cplx g : gamma) reach = std::max(reach, std::abs(g));
  int L = d + 20 + static_cast<int>(std::ceil(4.0 * reach * std::sqrt(static_cast<double>(d)) + reach * reach));
  std::vector<Eigen::MatrixXcd> cols(m);
  for (int tries = 0;; ++tries) {
    double err = 0.0;
    for (int k = 0; k < m; ++k) {
      cols[k] = factor(gamma[k], L);
      const Eigen::MatrixXcd wider = factor(gamma[k], L + 10);
      err = std::max(err, (wider.topRows(L) - cols[k]).cwiseAbs().maxCoeff());
    }
    if (err < 1e-14) break;
    if (tries == 10) throw NumericalError("displacement did not converge in the padded Fock space");
    L += 10;
  }
  const long hilbert = m == 1 ? L : static_cast<long>(L) * L;
  if (hilbert > 16384) throw DomainError("state too large to displace densely");

  FockOperatorSet out;
  out.dim = L;
  out.modes = m;
  out.frame = set.frame;
  out.spectrum = set.spectrum;
  const SpMat a = ladder(L);
  std::vector<SpMat> basis;
  if (m == 1) {
    basis.push_back(a);
  } else {
    basis.push_back(kron(a, identity(L)));
    basis.push_back(kron(identity(L), a));
  }
  for (int j = 0; j < m; ++j) {
    SpMat op(basis[0].rows(), basis[0].cols());
    for (int k = 0; k < m; ++k) op += basis[k] * u(j, k) + adjoint(basis[k]) * v(j, k);
    out.a.push_back(op);
    out.adag.push_back(adjoint(op));
    out.q.push_back(quad_q(op));
    out.p.push_back(quad_p(op));
  }
  // D restricted to the kept levels, tensor product over modes: L^m x d^m.
  Eigen::MatrixXcd D = cols[0];
  if (m == 2) {
    D.resize(static_cast<Eigen::Index>(L) * L, static_cast<Eigen::Index>(d) * d);
    for (int i = 0; i < d; ++i) {
      for (int r = 0; r < L; ++r) D.block(r * L, i * d, L, d) = cols[0](r, i) * cols[1];
    }
  }
  out.eigenvectors = set.eigenvectors.size() == 0 ? D : Eigen::MatrixXcd(D * set.eigenvectors);
  return out;
}

Eigen::Matrix2d sld_fisher_fock(const FockOperatorSet& set, int displaced_mode, double pair_eps) {
  const auto gens = set.generators(displaced_mode);
  Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
  for (int mu = 0; mu < 2; ++mu) {
    for (int nu = mu; nu < 2; ++nu) {
      double acc = 0.0;
      const SpMat& gm = gens[mu];
      const SpMat& gn = gens[nu];
      for (int col = 0; col < gm.outerSize(); ++col) {
        for (SpMat::InnerIterator it(gm, col); it; ++it) {
          const int s = static_cast<int>(it.row());
          const int t = static_cast<int>(it.col());
          if (s == t) continue;
          const double ps = clipped(set.spectrum(s));
          const double pt = clipped(set.spectrum(t));
          if (ps + pt < pair_eps) continue;
          const double w = (ps - pt) / (ps + pt);
          const cplx gnu = (mu == nu) ? it.value() : gn.coeff(s, t);
          // <G_mu>_st <G_nu>_ts + <G_nu>_st <G_mu>_ts with G Hermitian.
          acc += 2.0 * ps * w * w * 2.0 * std::real(it.value() * std::conj(gnu));
        }
      }
      H(mu, nu) = acc;
      H(nu, mu) = acc;
    }
  }
  return H;
}

Eigen::Matrix2cd rld_fisher_fock(const FockOperatorSet& set, int displaced_mode,
                                 std::optional<double> inv_floor_opt) {
  const double inv_floor = inv_floor_opt.value_or(set.frame == FockFrame::thermal ? 0.0 : 1e-10);
  const auto gens = set.generators(displaced_mode);
  Eigen::Matrix2cd J = Eigen::Matrix2cd::Zero();
  double leak = 0.0;
  double weight = 0.0;
  for (int mu = 0; mu < 2; ++mu) {
    for (int nu = 0; nu < 2; ++nu) {
      cplx t1 = 0.0, t2 = 0.0, t3 = 0.0;
      const SpMat& gm = gens[mu];
      const SpMat& gn = gens[nu];
      for (int col = 0; col < gm.outerSize(); ++col) {
        for (SpMat::InnerIterator it(gm, col); it; ++it) {
          const int s = static_cast<int>(it.row());
          const int t = static_cast<int>(it.col());
          const double ps = clipped(set.spectrum(s));
          const double pt = set.spectrum(t);
          const cplx gmu_st = it.value();
          const cplx gnu_st = (mu == nu) ? gmu_st : gn.coeff(s, t);
          // tr[G_nu rho^2 G_mu rho^-1] = sum_st (G_nu)_ts p_s^2 (G_mu)_st / p_t
          if (pt > inv_floor) {
            t1 += std::conj(gnu_st) * gmu_st * (ps * ps / pt);
          } else if (mu == nu) {
            leak += ps * std::norm(gmu_st);
          }
          if (mu == nu) weight += ps * std::norm(gmu_st);
          t2 += ps * gnu_st * std::conj(gmu_st);  // tr[rho G_nu G_mu]
          t3 += ps * gmu_st * std::conj(gnu_st);  // tr[rho G_mu G_nu]
        }
      }
      J(mu, nu) = t1 + t2 - 2.0 * t3;
    }
  }
  if (leak > 1e-6 * weight) throw PureStateError();
  return J;
}

std::vector<cplx> moments_fock(const FockOperatorSet& set, const std::vector<Monomial>& monomials) {
  std::vector<cplx> out;
  out.reserve(monomials.size());
  const bool diagonal = set.eigenvectors.size() == 0;
  Eigen::MatrixXcd rho;
  if (!diagonal) rho = set.density();
  for (const auto& mono : monomials) {
    SpMat prod = identity(set.hilbert_size());
    for (const auto& op : mono) {
      check_mode(set, op.mode);
      prod = SpMat(prod * (op.quad == Quadrature::q ? set.q[op.mode] : set.p[op.mode]));
    }
    cplx acc = 0.0;
    for (int col = 0; col < prod.outerSize(); ++col) {
      for (SpMat::InnerIterator it(prod, col); it; ++it) {
        // tr[rho X] = sum_ij rho_ij X_ji
        if (diagonal) {
          if (it.row() == it.col()) acc += set.spectrum(it.row()) * it.value();
        } else {
          acc += rho(it.col(), it.row()) * it.value();
        }
      }
    }
    out.push_back(acc);
  }
  return out;
}

FockFisher converged_fisher_fock(const FockProbe& probe, int displaced_mode,
                                 const FockOptions& options, double conv_tol) {
  FockOptions opt = options;
  const int cap = max_dim(probe, options);
  opt.max_dim = cap;
  FockOperatorSet low = build_probe_fock(probe, opt);
  double change = 0.0;
  while (low.dim + 5 <= cap) {
    FockOptions next = opt;
    next.dim = low.dim + 5;
    FockOperatorSet high = build_probe_fock(probe, next);
    const Eigen::Matrix2d h_low = sld_fisher_fock(low, displaced_mode);
    const Eigen::Matrix2d h_high = sld_fisher_fock(high, displaced_mode);
    change = (h_low - h_high).cwiseAbs().maxCoeff();
    std::optional<Eigen::Matrix2cd> j_high;
    try {
      const Eigen::Matrix2cd j_low = rld_fisher_fock(low, displaced_mode);
      j_high = rld_fisher_fock(high, displaced_mode);
      change = std::max(change, (j_low - *j_high).cwiseAbs().maxCoeff());
    } catch (const PureStateError&) {
      j_high.reset();
    }
    if (change < conv_tol) return {h_high, j_high, high.dim, change};
    low = std::move(high);
  }
  std::ostringstream msg;
  msg << "Fock Fisher matrices did not converge below " << conv_tol << " by dim " << low.dim
      << " (last change " << change << ")";
  throw TruncationError(msg.str(), low.tail_mass(), low.dim);
}

}  // namespace qdisp
