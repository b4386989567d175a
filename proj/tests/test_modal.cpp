#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "dampopt/bench.hpp"
#include "dampopt/modal.hpp"
#include "dampopt/model.hpp"
#include "support/oracles.hpp"

using namespace dampopt;

TEST_CASE("modal transform diagonalizes the pencil, decreasing frequencies") {
  std::mt19937 rng(31);
  const Mat M = testsupport::random_spd(rng, 12, 0.5, 4.0);
  const Mat K = testsupport::random_spd(rng, 12, 1.0, 30.0);
  const ModalData md = modal_transform(M, K);
  CHECK((md.Phi.transpose() * M * md.Phi - Mat::Identity(12, 12))
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
  const Mat kd = md.Phi.transpose() * K * md.Phi;
  CHECK((kd - md.Omega.cwiseAbs2().asDiagonal().toDenseMatrix())
            .cwiseAbs()
            .maxCoeff() <= 1e-8 * K.norm());
  CHECK(std::is_sorted(md.Omega.data(), md.Omega.data() + 12,
                       std::greater<double>()));
  CHECK(md.Omega(11) > 0.0);
}

TEST_CASE("critical damping matches the matrix square root construction") {
  std::mt19937 rng(33);
  const Mat M = testsupport::random_spd(rng, 9, 0.5, 4.0);
  const Mat K = testsupport::random_spd(rng, 9, 1.0, 30.0);
  const Mat C = critical_damping(M, K);

  // independent route: 2 L sqrt(L^-1 K L^-T) L^T with M = L L^T
  const Mat L = Eigen::LLT<Mat>(M).matrixL();
  const Mat W = L.triangularView<Eigen::Lower>().solve(
      L.triangularView<Eigen::Lower>()
          .solve(K)
          .transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(W);
  const Mat sqw = es.eigenvectors() *
                  es.eigenvalues().cwiseSqrt().asDiagonal() *
                  es.eigenvectors().transpose();
  const Mat expect = 2.0 * L * sqw * L.transpose();
  CHECK((C - expect).cwiseAbs().maxCoeff() <= 1e-9 * expect.norm());

  // modal coordinates see exactly 2 Omega
  const ModalData md = modal_transform(M, K);
  const Mat cd = md.Phi.transpose() * C * md.Phi;
  const Mat twoOmega = (2.0 * md.Omega).asDiagonal();
  CHECK((cd - twoOmega).cwiseAbs().maxCoeff() <= 1e-8 * md.Omega(0));
}

TEST_CASE("critically damped quadratic spectrum is real") {
  std::mt19937 rng(37);
  const Mat M = testsupport::random_spd(rng, 6, 0.5, 2.0);
  const Mat K = testsupport::random_spd(rng, 6, 1.0, 10.0);
  const Mat C = critical_damping(M, K);
  const auto eigs = testsupport::quad_eigs_ld(M, C, K);
  const ModalData md = modal_transform(M, K);
  for (const auto& lam : eigs) {
    // rounding C to double already splits the double eigenvalues by about
    // sqrt(eps)*omega, so the bound scales with the whole frequency vector
    CHECK(double(std::abs(lam.imag())) <= 1e-8 * md.Omega.norm());
    CHECK(double(lam.real()) < 0.0);
  }
}

TEST_CASE("real part estimates track light damping") {
  OscillatorSpec spec;
  spec.n = 12;
  spec.damper_j = 3;
  spec.damper_k = 8;
  spec.alpha_c = 1e-3;
  const VibrationalSystem sys = build_oscillator(spec);
  AffineClosedLoop acl(sys);
  const ModalData md = modal_transform(sys.M, sys.K);
  const Vec g = Vec::Zero(sys.B2.cols());
  const Vec est = real_part_estimates(acl, md, g);

  const auto eigs =
      testsupport::quad_eigs_ld(sys.M, acl.damping_matrix(g), sys.K);
  for (Index i = 0; i < md.Omega.size(); ++i) {
    // pair the mode with the eigenvalue whose imaginary part is closest
    double best = std::numeric_limits<double>::infinity();
    double re = 0.0;
    for (const auto& lam : eigs) {
      const double d = std::abs(double(lam.imag()) - md.Omega(i));
      if (d < best) {
        best = d;
        re = double(lam.real());
      }
    }
    CHECK(std::abs(est(i) - std::abs(re)) <= 0.1 * std::abs(re));
  }
}

TEST_CASE("dominance table ordering drives the initial frequencies") {
  OscillatorSpec spec;
  spec.n = 16;
  spec.damper_j = 4;
  spec.damper_k = 11;
  const VibrationalSystem sys = build_oscillator(spec);
  AffineClosedLoop acl(sys);
  const ModalData md = modal_transform(sys.M, sys.K);
  Vec g(2);
  g << 5.0, 40.0;

  const DominanceTable table = dominance_table(acl, md, g);
  CHECK(table.size() == 16);
  for (std::size_t i = 1; i < table.size(); ++i)
    CHECK(table[i - 1].dominance >= table[i].dominance);

  const InitialFrequencies init = initial_frequencies(acl, md, g, 5);
  REQUIRE(init.omega.size() == 5);
  for (int i = 0; i < 5; ++i)
    CHECK(init.omega[i] == table[static_cast<std::size_t>(i)].omega);
  CHECK_FALSE(init.unbounded_dominance);

  // cached model agrees with the free functions
  DominanceModel dm(acl, md);
  const DominanceTable table2 = dm.table(g);
  REQUIRE(table2.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(table2[i].mode == table[i].mode);
    CHECK(table2[i].dominance == doctest::Approx(table[i].dominance));
  }
  const InitialFrequencies init2 = dm.initial_frequencies(g, 5);
  CHECK(init2.omega == init.omega);

  // count larger than n clips
  CHECK(dm.initial_frequencies(g, 99).omega.size() == 16);
}

TEST_CASE("undamped modes flag unbounded dominance") {
  std::mt19937 rng(41);
  VibrationalSystem sys = testsupport::random_system(rng, 6, 1, 1, 1);
  sys.C_int = Mat::Zero(6, 6);
  AffineClosedLoop acl(sys);
  const ModalData md = modal_transform(sys.M, sys.K);
  const InitialFrequencies init =
      initial_frequencies(acl, md, Vec::Zero(1), 3);
  CHECK(init.unbounded_dominance);
  CHECK(init.omega.size() == 3);
}
