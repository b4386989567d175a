#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dampopt/bench.hpp"
#include "dampopt/grad.hpp"
#include "dampopt/linf.hpp"
#include "dampopt/model.hpp"
#include "dampopt/rom.hpp"
#include "support/oracles.hpp"

using namespace dampopt;

namespace {

NormResult dense_norm(const AffineClosedLoop& acl, const Vec& g,
                      double tol = 1e-12) {
  LinfOptions opts;
  opts.tol = tol;
  return linf_dense(acl.first_order_E(), acl.first_order_A(g),
                    acl.first_order_B(), acl.first_order_C(), opts);
}

// two identical decoupled channels: the top singular value is exactly double
VibrationalSystem twin_channel() {
  VibrationalSystem sys;
  sys.M = Mat::Identity(2, 2);
  sys.K = Mat::Identity(2, 2);
  sys.C_int = 0.05 * Mat::Identity(2, 2);
  sys.B2 = Mat::Identity(2, 2);
  sys.E2 = Mat::Identity(2, 2);
  sys.H1 = Mat::Identity(2, 2);
  return sys;
}

}  // namespace

TEST_CASE("norm gradient matches finite differences") {
  std::mt19937 rng(81);
  const VibrationalSystem sys = testsupport::random_system(rng, 10, 2, 3, 3);
  AffineClosedLoop acl(sys);
  Vec g(2);
  g << 2.0, 5.0;

  const NormResult nr = dense_norm(acl, g);
  const GradientContext ctx = make_gradient_context(acl, g, nr.omega_star);
  const Vec grad = hinf_gradient(acl, ctx);

  const Vec fd = testsupport::fd_gradient(
      [&](const Vec& gg) { return dense_norm(acl, gg).value; }, g, 1e-3);
  CHECK((grad - fd).norm() <= 1e-6 * fd.norm());
}

TEST_CASE("gradient context from a factorization equals the recomputed one") {
  AffineClosedLoop acl(twin_channel());
  Vec g(2);
  g << 1.0, 3.0;  // distinct gains split the channels
  const double w = 0.95;
  ShiftedFactorization fac(acl, g, Complex(0.0, w));
  const auto s = fac.sample(g);
  const GradientContext c1 = make_gradient_context(acl, fac, s);
  const GradientContext c2 = make_gradient_context(acl, g, w);
  CHECK((hinf_gradient(acl, c1) - hinf_gradient(acl, c2)).norm() <= 1e-12);
}

TEST_CASE("reduced gradient matches finite differences of the surrogate") {
  OscillatorSpec spec;
  spec.n = 20;
  spec.damper_j = 5;
  spec.damper_k = 12;
  AffineClosedLoop acl(build_oscillator(spec));
  ProjectionBasisPair bases;
  Vec g(2);
  g << 30.0, 110.0;
  for (double w : {0.5, 1.1, 1.9, 2.8})
    expand(bases, acl, g, w, DirectionMode::tangential);
  const ReducedParametricModel rom = reduce(acl, bases);

  const NormResult nr = linf_dense(rom, g);
  const Vec grad = reduced_hinf_gradient(rom, g, nr.sample);

  LinfOptions tight;
  tight.tol = 1e-12;
  const Vec fd = testsupport::fd_gradient(
      [&](const Vec& gg) { return linf_dense(rom, gg, tight).value; }, g, 1e-3);
  CHECK((grad - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
}

TEST_CASE("coalescing singular values are flagged and strictness throws") {
  AffineClosedLoop acl(twin_channel());
  const Vec g = Vec::Constant(2, 2.0);  // identical channels, sigma1 = sigma2
  const double w = 0.9;
  const GradientContext ctx = make_gradient_context(acl, g, w);
  CHECK(ctx.singular_gap <= 1e-12);
  try {
    hinf_gradient(acl, ctx);
    CHECK(false);
  } catch (const NonsmoothPointError& e) {
    CHECK(e.singular_gap <= 1e-12);
  }
  // non-strict evaluation still hands back a descent-usable vector
  const Vec loose = hinf_gradient(acl, ctx, false);
  CHECK(loose.allFinite());
}

TEST_CASE("smoothness diagnostics separate clean and degenerate maximizers") {
  AffineClosedLoop twins(twin_channel());
  const Vec geq = Vec::Constant(2, 2.0);
  const NormResult nr = dense_norm(twins, geq, 1e-8);
  const SmoothnessReport bad = smoothness_diagnostics(twins, geq, nr);
  CHECK(bad.nonsmooth);
  CHECK(bad.singular_gap_rel <= 1e-6);

  OscillatorSpec spec;
  spec.n = 16;
  spec.damper_j = 4;
  spec.damper_k = 10;
  AffineClosedLoop acl(build_oscillator(spec));
  Vec g(2);
  g << 20.0, 90.0;
  const NormResult nr2 = dense_norm(acl, g, 1e-8);
  const SmoothnessReport good = smoothness_diagnostics(acl, g, nr2);
  CHECK_FALSE(good.nonsmooth);
  CHECK(good.singular_gap_rel > 1e-6);
}
