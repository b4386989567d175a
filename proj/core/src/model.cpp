#include "dampopt/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace dampopt {

PoleProximityError::PoleProximityError(Complex s, double rc)
    : std::runtime_error("shifted system is numerically singular (rcond proxy " +
                         std::to_string(rc) + ")"),
      shift(s),
      rcond(rc) {}

UnboundedModelError::UnboundedModelError(const std::string& what, double omega)
    : std::runtime_error(what), omega_hint(omega) {}

NonsmoothPointError::NonsmoothPointError(const std::string& what, double sg, double pg)
    : std::runtime_error(what), singular_gap(sg), second_peak_gap(pg) {}

SolveCounters& solve_counters() {
  thread_local SolveCounters counters;
  return counters;
}

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

void check_symmetric(const Mat& a, const std::string& name) {
  double scale = a.cwiseAbs().maxCoeff();
  double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * (1.0 + scale), name + " is not symmetric");
}

void check_spd(const Mat& a, const std::string& name) {
  Eigen::LLT<Mat> llt(a);
  require(llt.info() == Eigen::Success, name + " is not positive definite");
}

}  // namespace

void validate(const VibrationalSystem& sys) {
  const Index n = sys.M.rows();
  require(n > 0, "M is empty");
  require(sys.M.cols() == n, "M is not square");
  require(sys.K.rows() == n && sys.K.cols() == n, "K has wrong shape");
  require(sys.C_int.rows() == n && sys.C_int.cols() == n, "C_int has wrong shape");
  require(sys.B2.rows() == n && sys.B2.cols() > 0, "B2 has wrong shape");
  require(sys.E2.rows() == n && sys.E2.cols() > 0, "E2 has wrong shape");
  require(sys.H1.cols() == n && sys.H1.rows() > 0, "H1 has wrong shape");
  require(sys.M.allFinite(), "M has non-finite entries");
  require(sys.K.allFinite(), "K has non-finite entries");
  require(sys.C_int.allFinite(), "C_int has non-finite entries");
  require(sys.B2.allFinite(), "B2 has non-finite entries");
  require(sys.E2.allFinite(), "E2 has non-finite entries");
  require(sys.H1.allFinite(), "H1 has non-finite entries");
  check_symmetric(sys.M, "M");
  check_symmetric(sys.K, "K");
  check_symmetric(sys.C_int, "C_int");
  check_spd(sys.M, "M");
  check_spd(sys.K, "K");
  // C_int only needs to be PSD; probe with a small diagonal lift.
  double scale = sys.C_int.cwiseAbs().maxCoeff();
  Mat lifted = sys.C_int + 1e-10 * (1.0 + scale) * Mat::Identity(n, n);
  Eigen::LLT<Mat> llt(lifted);
  require(llt.info() == Eigen::Success, "C_int is not positive semidefinite");
}

AffineClosedLoop::AffineClosedLoop(VibrationalSystem sys) : sys_(std::move(sys)) {
  validate(sys_);
}

AffineClosedLoop assemble_closed_loop(VibrationalSystem sys) {
  return AffineClosedLoop(std::move(sys));
}

Mat AffineClosedLoop::damping_matrix(const Vec& g) const {
  if (g.size() != p())
    throw ValidationError("gain vector has wrong length");
  return sys_.C_int + sys_.B2 * g.asDiagonal() * sys_.B2.transpose();
}

Mat AffineClosedLoop::first_order_E() const {
  const Index nn = n();
  Mat E = Mat::Zero(2 * nn, 2 * nn);
  E.topLeftCorner(nn, nn).setIdentity();
  E.bottomRightCorner(nn, nn) = sys_.M;
  return E;
}

Mat AffineClosedLoop::first_order_A(const Vec& g) const {
  const Index nn = n();
  Mat A = Mat::Zero(2 * nn, 2 * nn);
  A.topRightCorner(nn, nn).setIdentity();
  A.bottomLeftCorner(nn, nn) = -sys_.K;
  A.bottomRightCorner(nn, nn) = -damping_matrix(g);
  return A;
}

Mat AffineClosedLoop::first_order_B() const {
  const Index nn = n();
  Mat B = Mat::Zero(2 * nn, m());
  B.bottomRows(nn) = sys_.E2;
  return B;
}

Mat AffineClosedLoop::first_order_C() const {
  const Index nn = n();
  Mat C = Mat::Zero(l(), 2 * nn);
  C.leftCols(nn) = sys_.H1;
  return C;
}

ShiftedFactorization::ShiftedFactorization(const AffineClosedLoop& acl, const Vec& g,
                                           Complex s)
    : acl_(&acl), g_(g), s_(s) {
  damping_ = acl.damping_matrix(g);
  const auto& sys = acl.sys();
  CMat S = (s * s) * sys.M.cast<Complex>();
  S.noalias() += s * damping_.cast<Complex>();
  S += sys.K.cast<Complex>();
  lu_.compute(S);
  ++solve_counters().full_factorizations;
  const auto& u = lu_.matrixLU();
  double umax = 0.0, umin = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < u.rows(); ++i) {
    double d = std::abs(u(i, i));
    umax = std::max(umax, d);
    umin = std::min(umin, d);
  }
  if (!(umin > 1e-14 * umax))
    throw PoleProximityError(s, umax > 0.0 ? umin / umax : 0.0);
}

const CMat& ShiftedFactorization::X() const {
  if (!have_x_) {
    x_ = lu_.solve(acl_->sys().E2.cast<Complex>());
    have_x_ = true;
  }
  return x_;
}

CMat ShiftedFactorization::transfer() const {
  return acl_->sys().H1.cast<Complex>() * X();
}

CMat ShiftedFactorization::solve_right(const CMat& dirs) const {
  const Index nn = acl_->n();
  CMat xd = X() * dirs;
  CMat out(2 * nn, dirs.cols());
  out.topRows(nn) = xd;
  out.bottomRows(nn) = s_ * xd;
  return out;
}

CMat ShiftedFactorization::solve_left(const CMat& dirs) const {
  // Solve D(g,s)^H y = [H1 0]^H d blockwise.  With S = s^2 M + s C + K complex
  // symmetric, y2 = conj(S^-1 conj(H1^T d)) and y1 = (conj(s) M + C) y2.
  const Index nn = acl_->n();
  const auto& sys = acl_->sys();
  CMat rhs = sys.H1.transpose().cast<Complex>() * dirs;
  CMat y2 = lu_.solve(rhs.conjugate()).conjugate();
  CMat out(2 * nn, dirs.cols());
  out.bottomRows(nn) = y2;
  out.topRows(nn) = std::conj(s_) * (sys.M.cast<Complex>() * y2) +
                    damping_.cast<Complex>() * y2;
  return out;
}

FrequencyResponseSample ShiftedFactorization::sample(const Vec& g_tag) const {
  FrequencyResponseSample out;
  out.g = g_tag;
  out.omega = s_.imag();
  out.F = transfer();
  Eigen::JacobiSVD<CMat> svd(out.F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.sigma = svd.singularValues()(0);
  out.v = svd.matrixU().col(0);
  out.u = svd.matrixV().col(0);
  return out;
}

CMat eval_transfer(const AffineClosedLoop& acl, const Vec& g, double omega) {
  ShiftedFactorization fac(acl, g, Complex(0.0, omega));
  return fac.transfer();
}

double eval_sigma_max(const AffineClosedLoop& acl, const Vec& g, double omega) {
  CMat F = eval_transfer(acl, g, omega);
  Eigen::JacobiSVD<CMat> svd(F);
  return svd.singularValues()(0);
}

FrequencyResponseSample eval_sample(const AffineClosedLoop& acl, const Vec& g,
                                    double omega) {
  ShiftedFactorization fac(acl, g, Complex(0.0, omega));
  return fac.sample(g);
}

}  // namespace dampopt
