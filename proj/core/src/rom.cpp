#include "dampopt/rom.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <utility>

namespace dampopt {

namespace {

constexpr double kRankTol = 1e-10;

// Sequential MGS append with pair coupling: a raw (v, w) pair is kept only if
// both residuals clear the rank tolerance, so V and W grow in lockstep.  Two
// projection passes per column.
Index append_pairs(CMat& V, CMat& W, const CMat& vraw, const CMat& wraw) {
  const Index k_in = vraw.cols();
  double vscale = 0.0;
  double wscale = 0.0;
  for (Index i = 0; i < k_in; ++i) {
    vscale = std::max(vscale, vraw.col(i).norm());
    wscale = std::max(wscale, wraw.col(i).norm());
  }
  const double vtol = kRankTol * vscale;
  const double wtol = kRankTol * wscale;

  Index kept = 0;
  for (Index i = 0; i < k_in; ++i) {
    CVec vc = vraw.col(i);
    CVec wc = wraw.col(i);
    for (int pass = 0; pass < 2; ++pass) {
      if (V.cols() > 0) vc -= V * (V.adjoint() * vc);
      if (W.cols() > 0) wc -= W * (W.adjoint() * wc);
    }
    const double vn = vc.norm();
    const double wn = wc.norm();
    if (vn <= vtol || wn <= wtol) continue;
    V.conservativeResize(Eigen::NoChange, V.cols() + 1);
    W.conservativeResize(Eigen::NoChange, W.cols() + 1);
    V.col(V.cols() - 1) = vc / vn;
    W.col(W.cols() - 1) = wc / wn;
    ++kept;
  }
  return kept;
}

void ensure_shape(ProjectionBasisPair& bases, Index two_n) {
  if (bases.V.rows() != two_n) {
    bases.V.resize(two_n, 0);
    bases.W.resize(two_n, 0);
  }
}

}  // namespace

DirectionSet interpolation_directions(const FrequencyResponseSample& sample,
                                      DirectionMode mode) {
  const Index m = sample.F.cols();
  const Index l = sample.F.rows();
  DirectionSet d;
  if (mode == DirectionMode::tangential) {
    d.right = sample.u;
    d.left = sample.v;
    return d;
  }
  // full falls through to the padded construction when the channel counts
  // disagree; with m == l both modes reduce to identity directions.
  if (l == m) {
    d.right = CMat::Identity(m, m);
    d.left = CMat::Identity(l, l);
  } else if (l > m) {
    d.right = sample.F.adjoint();
    d.left = CMat::Identity(l, l);
  } else {
    d.right = CMat::Identity(m, m);
    d.left = sample.F;
  }
  return d;
}

InterpolationRecord expand_with_directions(ProjectionBasisPair& bases,
                                           const AffineClosedLoop& acl,
                                           const ShiftedFactorization& fac,
                                           const FrequencyResponseSample& sample,
                                           const DirectionSet& dirs,
                                           DirectionMode mode_tag) {
  ensure_shape(bases, 2 * acl.n());
  InterpolationRecord rec;
  rec.g = sample.g;
  rec.omega = sample.omega;
  rec.mode = mode_tag;
  rec.directions = dirs;
  rec.sigma = sample.sigma;
  rec.u = sample.u;
  rec.v = sample.v;

  const CMat vraw = fac.solve_right(dirs.right);
  const CMat wraw = fac.solve_left(dirs.left);
  rec.kept = append_pairs(bases.V, bases.W, vraw, wraw);
  rec.stagnated = (rec.kept == 0);
  // a no-op probe certifies nothing; only contributing nodes enter the log
  if (rec.kept > 0) bases.log.push_back(rec);
  return rec;
}

InterpolationRecord expand_from_factorization(ProjectionBasisPair& bases,
                                              const AffineClosedLoop& acl,
                                              const ShiftedFactorization& fac,
                                              const FrequencyResponseSample& sample,
                                              DirectionMode mode) {
  return expand_with_directions(bases, acl, fac, sample,
                                interpolation_directions(sample, mode), mode);
}

InterpolationRecord expand(ProjectionBasisPair& bases, const AffineClosedLoop& acl,
                           const Vec& g, double omega, DirectionMode mode) {
  ensure_shape(bases, 2 * acl.n());
  try {
    ShiftedFactorization fac(acl, g, Complex(0.0, omega));
    const FrequencyResponseSample sample = fac.sample(g);
    return expand_from_factorization(bases, acl, fac, sample, mode);
  } catch (const PoleProximityError&) {
    InterpolationRecord rec;
    rec.g = g;
    rec.omega = omega;
    rec.mode = mode;
    rec.skipped = true;
    rec.stagnated = true;
    bases.log.push_back(rec);
    return rec;
  }
}

ProjectionBasisPair initial_bases(const AffineClosedLoop& acl,
                                  const std::vector<Vec>& init_gains,
                                  const std::vector<std::vector<double>>& init_freqs,
                                  DirectionMode mode) {
  if (init_gains.size() != init_freqs.size())
    throw ValidationError("initial_bases: one frequency list per gain vector required");
  ProjectionBasisPair bases;
  ensure_shape(bases, 2 * acl.n());
  for (std::size_t i = 0; i < init_gains.size(); ++i)
    for (double w : init_freqs[i]) expand(bases, acl, init_gains[i], w, mode);
  return bases;
}

CMat ReducedParametricModel::A_of(const Vec& g) const {
  if (g.size() != Wfac.cols())
    throw ValidationError("reduced model: gain dimension mismatch");
  CMat A = At0;
  for (Index j = 0; j < g.size(); ++j)
    A.noalias() -= g(j) * (Wfac.col(j) * Vfac.col(j).transpose());
  return A;
}

ReducedParametricModel reduce(const AffineClosedLoop& acl,
                              const ProjectionBasisPair& bases) {
  const Index n = acl.n();
  if (bases.V.rows() != 2 * n || bases.W.rows() != 2 * n ||
      bases.V.cols() != bases.W.cols() || bases.V.cols() == 0)
    throw ValidationError("reduce: basis pair is empty or has mismatched shape");
  const auto& sys = acl.sys();
  const auto V1 = bases.V.topRows(n);
  const auto V2 = bases.V.bottomRows(n);
  const auto W1 = bases.W.topRows(n);
  const auto W2 = bases.W.bottomRows(n);

  ReducedParametricModel rom;
  rom.Et = W1.adjoint() * V1 + W2.adjoint() * (sys.M.cast<Complex>() * V2);
  rom.At0 = W1.adjoint() * V2 - W2.adjoint() * (sys.K.cast<Complex>() * V1) -
            W2.adjoint() * (sys.C_int.cast<Complex>() * V2);
  rom.Wfac = W2.adjoint() * sys.B2.cast<Complex>();
  rom.Vfac = V2.transpose() * sys.B2.cast<Complex>();
  rom.Bt = W2.adjoint() * sys.E2.cast<Complex>();
  rom.Ct = sys.H1.cast<Complex>() * V1;
  return rom;
}

CMat eval_reduced_transfer(const ReducedParametricModel& rom, const Vec& g,
                           double omega) {
  const CMat D = Complex(0.0, omega) * rom.Et - rom.A_of(g);
  Eigen::PartialPivLU<CMat> lu(D);
  return rom.Ct * lu.solve(rom.Bt);
}

double eval_reduced_sigma_max(const ReducedParametricModel& rom, const Vec& g,
                              double omega) {
  return eval_reduced_transfer(rom, g, omega).jacobiSvd().singularValues()(0);
}

FrequencyResponseSample eval_reduced_sample(const ReducedParametricModel& rom,
                                            const Vec& g, double omega) {
  FrequencyResponseSample s;
  s.g = g;
  s.omega = omega;
  s.F = eval_reduced_transfer(rom, g, omega);
  Eigen::JacobiSVD<CMat> svd(s.F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  s.sigma = svd.singularValues()(0);
  s.v = svd.matrixU().col(0);
  s.u = svd.matrixV().col(0);
  return s;
}

namespace {

// Fourth-order central difference of a matrix-valued map on a fixed stencil.
template <typename F>
CMat fd_derivative(F&& eval, double w, double h) {
  const CMat fm2 = eval(w - 2 * h);
  const CMat fm1 = eval(w - h);
  const CMat fp1 = eval(w + h);
  const CMat fp2 = eval(w + 2 * h);
  return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
}

}  // namespace

HermiteReport check_hermite(const AffineClosedLoop& acl,
                            const ReducedParametricModel& rom,
                            const InterpolationRecord& record,
                            const HermiteCheckOptions& opts) {
  HermiteReport rep;
  if (record.skipped) return rep;

  const Vec& g = record.g;
  const double w = record.omega;
  const CMat Ffull = eval_transfer(acl, g, w);
  const CMat Fred = eval_reduced_transfer(rom, g, w);
  const double sigma =
      record.sigma > 0.0 ? record.sigma : Ffull.jacobiSvd().singularValues()(0);
  const bool tangential = record.mode == DirectionMode::tangential;

  if (tangential) {
    rep.value_residual = ((Ffull - Fred) * record.u).norm() / sigma;
    rep.left_value_residual = (record.v.adjoint() * (Ffull - Fred)).norm() / sigma;
  } else {
    rep.value_residual = (Ffull - Fred).norm() / Ffull.norm();
    rep.left_value_residual = rep.value_residual;
  }
  rep.sigma_residual =
      std::abs(eval_reduced_sigma_max(rom, g, w) - sigma) / sigma;
  rep.value_ok = rep.value_residual <= opts.value_tol &&
                 rep.left_value_residual <= opts.value_tol;

  const double h = 1e-5 * (1.0 + std::abs(w));
  if (opts.with_full_fd) {
    const CMat dF = fd_derivative(
        [&](double x) { return eval_transfer(acl, g, x); }, w, h);
    const CMat dFr = fd_derivative(
        [&](double x) { return eval_reduced_transfer(rom, g, x); }, w, h);
    double num, den;
    if (tangential) {
      num = std::abs((record.v.adjoint() * (dF - dFr) * record.u).value());
      den = std::max(std::abs((record.v.adjoint() * dF * record.u).value()),
                     1e-6 * sigma);
    } else {
      num = (dF - dFr).norm();
      den = std::max(dF.norm(), 1e-6 * sigma);
    }
    rep.deriv_residual = num / den;
    rep.deriv_ok = rep.deriv_residual <= opts.deriv_tol;
    rep.checked_derivative = true;
  }

  if (opts.with_stationarity && tangential) {
    // two-sided projection matches the directional derivative v^H F'(s) u at
    // every tangential point; at a polished maximizer this is the transferred
    // stationarity condition.  Both sides are evaluated analytically,
    // F'(s) = -H1 S^-1 (2sM + C) S^-1 E2 for the quadratic pencil, in
    // extended precision: the squared resolvents amplify rounding near poles
    // well past the certificate tolerance otherwise.
    using LD = long double;
    using CLD = std::complex<LD>;
    using CMatLD = Eigen::Matrix<CLD, Eigen::Dynamic, Eigen::Dynamic>;
    using CVecLD = Eigen::Matrix<CLD, Eigen::Dynamic, 1>;
    const CLD s(0.0L, static_cast<LD>(w));
    const auto& sys = acl.sys();
    const CMatLD Mld = sys.M.cast<CLD>();
    const CMatLD Cgld = acl.damping_matrix(g).cast<CLD>();
    const CMatLD S = (s * s) * Mld + s * Cgld + sys.K.cast<CLD>();
    const Eigen::PartialPivLU<CMatLD> lu(S);
    const CVecLD a = lu.solve(sys.E2.cast<CLD>() * record.u.cast<CLD>());
    // S is complex symmetric, so the adjoint solve is a conjugated solve
    const CVecLD b =
        lu.solve((sys.H1.transpose().cast<CLD>() * record.v.cast<CLD>())
                     .conjugate())
            .conjugate();
    const CMatLD G = (2.0L * s) * Mld + Cgld;
    const CLD d_full = -(b.adjoint() * G * a).value();

    const CMatLD D = s * rom.Et.cast<CLD>() - rom.A_of(g).cast<CLD>();
    const Eigen::PartialPivLU<CMatLD> lud(D);
    const CVecLD ar = lud.solve(rom.Bt.cast<CLD>() * record.u.cast<CLD>());
    const CVecLD br = lud.adjoint().solve(rom.Ct.adjoint().cast<CLD>() *
                                          record.v.cast<CLD>());
    const CLD d_red = -(br.adjoint() * rom.Et.cast<CLD>() * ar).value();

    rep.stationarity_residual = static_cast<double>(
        std::abs(d_red - d_full) * (1.0L + std::abs((LD)w)) /
        static_cast<LD>(sigma));
    rep.stationarity_ok = rep.stationarity_residual <= opts.stationarity_tol;
  }
  return rep;
}

}  // namespace dampopt
