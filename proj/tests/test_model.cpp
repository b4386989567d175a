#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dampopt/bench.hpp"
#include "dampopt/model.hpp"
#include "dampopt/types.hpp"
#include "support/oracles.hpp"

using namespace dampopt;
using testsupport::dense_blocks;
using testsupport::pencil_transfer;

namespace {

VibrationalSystem small_system(unsigned seed = 11) {
  std::mt19937 rng(seed);
  return testsupport::random_system(rng, 8, 2, 3, 2);
}

}  // namespace

TEST_CASE("validate rejects broken inputs with the matrix named") {
  VibrationalSystem sys = small_system();
  CHECK_NOTHROW(validate(sys));

  SUBCASE("asymmetric mass") {
    sys.M(0, 1) += 0.5;
    try {
      validate(sys);
      CHECK(false);
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("M") != std::string::npos);
    }
  }
  SUBCASE("indefinite stiffness") {
    sys.K = -sys.K;
    CHECK_THROWS_AS(validate(sys), ValidationError);
  }
  SUBCASE("shape mismatch") {
    sys.E2 = Mat::Zero(sys.M.rows() + 1, 2);
    CHECK_THROWS_AS(validate(sys), ValidationError);
  }
  SUBCASE("non-finite entry") {
    sys.H1(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(validate(sys), ValidationError);
  }
  SUBCASE("indefinite internal damping") {
    sys.C_int = -0.1 * sys.M;
    CHECK_THROWS_AS(validate(sys), ValidationError);
  }
}

TEST_CASE("damping matrix is the affine gain map") {
  const VibrationalSystem sys = small_system();
  AffineClosedLoop acl(sys);
  Vec g(2);
  g << 3.0, 0.25;
  Mat expect = sys.C_int;
  for (Index j = 0; j < 2; ++j)
    expect += g(j) * sys.B2.col(j) * sys.B2.col(j).transpose();
  CHECK((acl.damping_matrix(g) - expect).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(acl.damping_matrix(Vec::Ones(3)), ValidationError);
}

TEST_CASE("first order blocks match the literal assembly") {
  const VibrationalSystem sys = small_system(3);
  AffineClosedLoop acl(sys);
  Vec g(2);
  g << 1.5, 4.0;
  const auto dr = dense_blocks(sys, g);
  CHECK((acl.first_order_E() - dr.E).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((acl.first_order_A(g) - dr.A).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((acl.first_order_B() - dr.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((acl.first_order_C() - dr.C).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transfer evaluation agrees with the dense pencil route") {
  const VibrationalSystem sys = small_system(5);
  AffineClosedLoop acl(sys);
  Vec g(2);
  g << 0.7, 2.2;
  const auto dr = dense_blocks(sys, g);
  for (double w : {0.0, 0.3, 1.7, 6.0}) {
    const CMat f1 = eval_transfer(acl, g, w);
    const CMat f2 = pencil_transfer(dr, w);
    CHECK((f1 - f2).norm() <= 1e-10 * (1.0 + f2.norm()));
  }
}

TEST_CASE("static gain is H1 K^-1 E2") {
  const VibrationalSystem sys = small_system(9);
  AffineClosedLoop acl(sys);
  const Vec g = Vec::Constant(2, 5.0);
  const Mat expect = sys.H1 * sys.K.ldlt().solve(sys.E2);
  const CMat f0 = eval_transfer(acl, g, 0.0);
  CHECK(f0.imag().cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + expect.norm()));
  CHECK((f0.real() - expect).cwiseAbs().maxCoeff() <=
        1e-10 * (1.0 + expect.cwiseAbs().maxCoeff()));
}

TEST_CASE("factorization solves satisfy their defining equations") {
  const VibrationalSystem sys = small_system(13);
  AffineClosedLoop acl(sys);
  Vec g(2);
  g << 2.0, 0.1;
  const double w = 1.3;
  ShiftedFactorization fac(acl, g, Complex(0.0, w));
  const auto dr = dense_blocks(sys, g);
  const CMat pencil =
      Complex(0.0, w) * dr.E.cast<Complex>() - dr.A.cast<Complex>();

  std::mt19937 rng(2);
  const CMat rdirs = testsupport::random_matrix(rng, 3, 2).cast<Complex>();
  const CMat xr = fac.solve_right(rdirs);
  CHECK((pencil * xr - dr.B.cast<Complex>() * rdirs).norm() <=
        1e-9 * (1.0 + xr.norm()));

  const CMat ldirs = testsupport::random_matrix(rng, 2, 2).cast<Complex>();
  const CMat xl = fac.solve_left(ldirs);
  CHECK((pencil.adjoint() * xl - dr.C.cast<Complex>().adjoint() * ldirs).norm() <=
        1e-9 * (1.0 + xl.norm()));

  const CMat f = fac.transfer();
  CHECK((f - pencil_transfer(dr, w)).norm() <= 1e-10 * (1.0 + f.norm()));
}

TEST_CASE("sample returns the top singular triple of F") {
  const VibrationalSystem sys = small_system(17);
  AffineClosedLoop acl(sys);
  Vec g(2);
  g << 1.0, 1.0;
  const auto s = eval_sample(acl, g, 0.9);
  Eigen::JacobiSVD<CMat> svd(s.F);
  CHECK(s.sigma == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
  CHECK(std::abs(s.u.norm() - 1.0) <= 1e-12);
  CHECK(std::abs(s.v.norm() - 1.0) <= 1e-12);
  // v^H F u = sigma for the returned orientation
  const Complex quad = (s.v.adjoint() * s.F * s.u).value();
  CHECK(std::abs(quad - Complex(s.sigma, 0.0)) <= 1e-10 * (1.0 + s.sigma));
  CHECK((s.F * s.u - s.sigma * s.v).norm() <= 1e-10 * (1.0 + s.sigma));
  CHECK(s.omega == 0.9);
  CHECK(eval_sigma_max(acl, g, 0.9) == doctest::Approx(s.sigma).epsilon(1e-13));
}

TEST_CASE("factorizing at an undamped resonance reports pole proximity") {
  // scalar oscillator q'' + q = w with no damping: exact pole at s = i
  VibrationalSystem sys;
  sys.M = Mat::Ones(1, 1);
  sys.K = Mat::Ones(1, 1);
  sys.C_int = Mat::Zero(1, 1);
  sys.B2 = Mat::Ones(1, 1);
  sys.E2 = Mat::Ones(1, 1);
  sys.H1 = Mat::Ones(1, 1);
  AffineClosedLoop acl(sys);
  const Vec g = Vec::Zero(1);
  try {
    ShiftedFactorization fac(acl, g, Complex(0.0, 1.0));
    CHECK(false);
  } catch (const PoleProximityError& e) {
    CHECK(e.rcond <= 1e-14);
    CHECK(e.shift == Complex(0.0, 1.0));
  }
  // a touch of damping moves the pole off the axis and the shift factors fine
  sys.C_int = 0.1 * Mat::Ones(1, 1);
  AffineClosedLoop damped(sys);
  CHECK(eval_sigma_max(damped, g, 1.0) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("factorizations are counted") {
  const VibrationalSystem sys = small_system(23);
  AffineClosedLoop acl(sys);
  const Vec g = Vec::Ones(2);
  const long before = solve_counters().full_factorizations;
  eval_transfer(acl, g, 1.0);
  eval_sigma_max(acl, g, 2.0);
  CHECK(solve_counters().full_factorizations == before + 2);
}
