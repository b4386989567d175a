#include "dampopt/modal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace dampopt {

namespace {
constexpr double kReFloor = 1e-30;
}

ModalData modal_transform(const Mat& M, const Mat& K) {
  if (M.rows() != M.cols() || K.rows() != K.cols() || M.rows() != K.rows())
    throw ValidationError("modal transform needs square M, K of equal size");
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(K, M);
  if (es.info() != Eigen::Success)
    throw ValidationError("generalized eigensolve failed; is M positive definite?");
  const Index n = M.rows();
  Vec lam = es.eigenvalues();  // increasing
  for (Index i = 0; i < n; ++i) {
    if (!(lam(i) > 0))
      throw ValidationError("K is not positive definite on the mass inner product");
  }
  // Reverse to decreasing frequencies; keep the solver's vector pairing.
  ModalData out;
  out.Omega.resize(n);
  out.Phi.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    out.Omega(i) = std::sqrt(lam(n - 1 - i));
    out.Phi.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

Mat critical_damping(const Mat& M, const ModalData& modal) {
  Mat MPhi = M * modal.Phi;
  return 2.0 * MPhi * modal.Omega.asDiagonal() * MPhi.transpose();
}

Mat critical_damping(const Mat& M, const Mat& K) {
  // Computed in extended precision with a single final rounding.  The
  // critically damped pencil is exactly on the defective boundary, so every
  // bit of accumulated error in C splits its double eigenvalues by the square
  // root of that error.
  using MatLD = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const MatLD Mld = M.cast<long double>(), Kld = K.cast<long double>();
  const Eigen::LLT<MatLD> llt(Mld);
  const MatLD L = llt.matrixL();
  MatLD W = L.triangularView<Eigen::Lower>().solve(Kld);
  W = L.triangularView<Eigen::Lower>().solve(MatLD(W.transpose()));
  W = ((W + W.transpose()) / 2.0L).eval();
  const Eigen::SelfAdjointEigenSolver<MatLD> es(W);
  const MatLD sqrtW = es.eigenvectors() *
                      es.eigenvalues().cwiseSqrt().asDiagonal() *
                      es.eigenvectors().transpose();
  const MatLD C = 2.0L * L * sqrtW * L.transpose();
  return ((C + C.transpose()) / 2.0L).cast<double>();
}

Vec undamped_residue_norms(const VibrationalSystem& sys, const ModalData& modal) {
  const Index n = modal.Phi.cols();
  Mat h = sys.H1 * modal.Phi;   // l x n
  Mat e = sys.E2.transpose() * modal.Phi;  // m x n
  Vec r(n);
  for (Index i = 0; i < n; ++i)
    r(i) = h.col(i).norm() * e.col(i).norm() / (2.0 * modal.Omega(i));
  return r;
}

Vec real_part_estimates(const AffineClosedLoop& acl, const ModalData& modal,
                        const Vec& g) {
  Mat C = acl.damping_matrix(g);
  const Index n = modal.Phi.cols();
  Vec rho(n);
  for (Index i = 0; i < n; ++i) {
    double q = modal.Phi.col(i).dot(C * modal.Phi.col(i));
    rho(i) = std::max(0.5 * q, kReFloor);
  }
  return rho;
}

DominanceModel::DominanceModel(const AffineClosedLoop& acl, const ModalData& modal)
    : modal_(modal) {
  residues_ = undamped_residue_norms(acl.sys(), modal_);
  const Index n = modal_.Phi.cols();
  cint_quad_.resize(n);
  Mat cphi = acl.sys().C_int * modal_.Phi;
  for (Index i = 0; i < n; ++i) cint_quad_(i) = modal_.Phi.col(i).dot(cphi.col(i));
  phi_t_b2_ = modal_.Phi.transpose() * acl.sys().B2;
}

DominanceTable DominanceModel::table(const Vec& g) const {
  const Index n = modal_.Omega.size();
  if (g.size() != phi_t_b2_.cols())
    throw ValidationError("gain vector has wrong length");
  DominanceTable out(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double quad = cint_quad_(i);
    for (Index j = 0; j < g.size(); ++j)
      quad += g(j) * phi_t_b2_(i, j) * phi_t_b2_(i, j);
    DominanceEntry& e = out[static_cast<size_t>(i)];
    e.mode = i;
    e.omega = modal_.Omega(i);
    e.residue = residues_(i);
    e.re_estimate = std::max(0.5 * quad, kReFloor);
    e.dominance = e.residue / e.re_estimate;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DominanceEntry& a, const DominanceEntry& b) {
                     return a.dominance > b.dominance;
                   });
  return out;
}

InitialFrequencies DominanceModel::initial_frequencies(const Vec& g,
                                                       Index count) const {
  DominanceTable tab = table(g);
  InitialFrequencies out;
  const Index k = std::min<Index>(count, static_cast<Index>(tab.size()));
  out.omega.reserve(static_cast<size_t>(k));
  for (Index i = 0; i < k; ++i) {
    const DominanceEntry& e = tab[static_cast<size_t>(i)];
    out.omega.push_back(e.omega);
    if (e.re_estimate <= 2.0 * kReFloor) out.unbounded_dominance = true;
  }
  return out;
}

DominanceTable dominance_table(const AffineClosedLoop& acl, const ModalData& modal,
                               const Vec& g) {
  return DominanceModel(acl, modal).table(g);
}

InitialFrequencies initial_frequencies(const AffineClosedLoop& acl,
                                       const ModalData& modal, const Vec& g,
                                       Index count) {
  return DominanceModel(acl, modal).initial_frequencies(g, count);
}

}  // namespace dampopt
