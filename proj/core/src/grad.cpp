#include "dampopt/grad.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace dampopt {

namespace {

constexpr double kGapRelTol = 1e-6;

double top_gap(const CMat& F) {
  const Vec sv = F.jacobiSvd().singularValues();
  if (sv.size() < 2) return std::numeric_limits<double>::infinity();
  return sv(0) - sv(1);
}

}  // namespace

GradientContext make_gradient_context(const AffineClosedLoop& acl,
                                      const ShiftedFactorization& fac,
                                      const FrequencyResponseSample& sample) {
  (void)acl;
  GradientContext ctx;
  ctx.sample = sample;
  ctx.x = fac.solve_right(sample.u);
  ctx.y = fac.solve_left(sample.v);
  ctx.singular_gap = top_gap(sample.F);
  return ctx;
}

GradientContext make_gradient_context(const AffineClosedLoop& acl, const Vec& g,
                                      double omega) {
  ShiftedFactorization fac(acl, g, Complex(0.0, omega));
  return make_gradient_context(acl, fac, fac.sample(g));
}

Vec hinf_gradient(const AffineClosedLoop& acl, const GradientContext& ctx,
                  bool strict) {
  const double sigma = ctx.sample.sigma;
  if (strict && ctx.singular_gap <= kGapRelTol * sigma)
    throw NonsmoothPointError(
        "gain gradient requested at a point with coalescing singular values",
        ctx.singular_gap, std::numeric_limits<double>::quiet_NaN());

  const Index n = acl.n();
  const CVec rx =
      acl.sys().B2.transpose().cast<Complex>() * ctx.x.bottomRows(n);
  const CVec ry =
      acl.sys().B2.transpose().cast<Complex>() * ctx.y.bottomRows(n);
  return -(ry.conjugate().cwiseProduct(rx)).real();
}

Vec reduced_hinf_gradient(const ReducedParametricModel& rom, const Vec& g,
                          const FrequencyResponseSample& reduced_sample) {
  const CMat D =
      Complex(0.0, reduced_sample.omega) * rom.Et - rom.A_of(g);
  Eigen::PartialPivLU<CMat> lu(D);
  const CVec xt = lu.solve(rom.Bt * reduced_sample.u);
  const CVec yt = lu.adjoint().solve(rom.Ct.adjoint() * reduced_sample.v);
  const CVec a = rom.Wfac.adjoint() * yt;   // conj(a_j) = y^H w_j
  const CVec b = rom.Vfac.transpose() * xt; // b_j = v_j^T x
  return -(a.conjugate().cwiseProduct(b)).real();
}

SmoothnessReport smoothness_diagnostics(const AffineClosedLoop& acl, const Vec& g,
                                        const NormResult& nr) {
  (void)acl;
  (void)g;
  SmoothnessReport rep;
  const double sigma = nr.value;
  rep.singular_gap = top_gap(nr.sample.F);
  rep.singular_gap_rel = sigma > 0.0 ? rep.singular_gap / sigma
                                     : std::numeric_limits<double>::infinity();

  // Best competing peak: the largest probe away from the maximizer.  The
  // separation window scales with frequency so refinement clusters around the
  // maximizer are not mistaken for rivals.
  const double window = 0.02 * (1.0 + std::abs(nr.omega_star));
  double rival = -std::numeric_limits<double>::infinity();
  for (const auto& [w, s] : nr.probes) {
    if (std::abs(std::abs(w) - nr.omega_star) > window) rival = std::max(rival, s);
  }
  if (std::isfinite(rival)) {
    rep.second_peak_gap = std::max(0.0, sigma - rival);
    rep.second_peak_gap_rel =
        sigma > 0.0 ? rep.second_peak_gap / sigma
                    : std::numeric_limits<double>::infinity();
  }
  rep.nonsmooth = rep.singular_gap_rel <= kGapRelTol ||
                  rep.second_peak_gap_rel <= kGapRelTol;
  return rep;
}

}  // namespace dampopt
