#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dampopt/bench.hpp"
#include "dampopt/linf.hpp"
#include "dampopt/modal.hpp"
#include "dampopt/model.hpp"
#include "support/oracles.hpp"

using namespace dampopt;

TEST_CASE("oscillator chain structure") {
  OscillatorSpec spec;  // n = 50, dampers at 5 and 25
  const VibrationalSystem sys = build_oscillator(spec);
  const Index n = 50;
  REQUIRE(sys.M.rows() == n);

  // stiffness: anchored tridiagonal chain with unit stencil value 10
  CHECK(sys.K(0, 0) == 20.0);
  CHECK(sys.K(n - 1, n - 1) == 20.0);
  CHECK(sys.K(3, 4) == -10.0);
  CHECK(sys.K(4, 3) == -10.0);
  CHECK(sys.K(0, 2) == 0.0);

  // masses: descending then ascending, all positive
  const Vec masses = sys.M.diagonal();
  CHECK(sys.M.isDiagonal(0.0));
  CHECK(masses.minCoeff() > 0.0);
  CHECK(masses(0) == doctest::Approx(200.3 - 420.0 / 50.0));
  const Index brk = 21;  // round(3 n / 7)
  CHECK(masses(brk - 1) == doctest::Approx(200.3 - 8.4 * brk));
  CHECK(masses(brk) == doctest::Approx(5.6 * (brk + 1) - 100.2));
  CHECK(masses(n - 1) == doctest::Approx(5.6 * 50 - 100.2));

  // dampers: grounded difference pairs at positions 5 and 25
  REQUIRE(sys.B2.cols() == 2);
  CHECK(sys.B2(4, 0) == 1.0);
  CHECK(sys.B2(5, 0) == -1.0);
  CHECK(sys.B2(24, 1) == 1.0);
  CHECK(sys.B2(25, 1) == -1.0);
  CHECK(sys.B2.cwiseAbs().sum() == 4.0);

  // disturbances at the walls, weighted 2 and 1
  REQUIRE(sys.E2.cols() == 4);
  CHECK(sys.E2(0, 0) == 2.0);
  CHECK(sys.E2(1, 1) == 1.0);
  CHECK(sys.E2(n - 2, 2) == 2.0);
  CHECK(sys.E2(n - 1, 3) == 1.0);
  CHECK(sys.E2.cwiseAbs().sum() == 6.0);

  // center displacement outputs
  REQUIRE(sys.H1.rows() == 4);
  for (Index r = 0; r < 4; ++r) CHECK(sys.H1(r, 23 + r) == 1.0);
  CHECK(sys.H1.cwiseAbs().sum() == 4.0);

  // internal damping is the stated fraction of critical damping
  const Mat crit = critical_damping(sys.M, sys.K);
  CHECK((sys.C_int - 1e-2 * crit).cwiseAbs().maxCoeff() <=
        1e-12 * crit.cwiseAbs().maxCoeff());
  CHECK_NOTHROW(validate(sys));
}

TEST_CASE("oscillator spec is validated") {
  OscillatorSpec spec;
  spec.n = 6;
  CHECK_THROWS_AS(build_oscillator(spec), ValidationError);  // too small
  spec.n = 20;
  spec.damper_k = 20;  // k must leave room for the k+1 neighbor
  CHECK_THROWS_AS(build_oscillator(spec), ValidationError);
  spec.damper_k = 19;
  spec.damper_j = 0;
  CHECK_THROWS_AS(build_oscillator(spec), ValidationError);
}

TEST_CASE("full size configuration") {
  const VibrationalSystem sys = reference_oscillator(300, 350, 1e-2);
  REQUIRE(sys.M.rows() == 700);
  CHECK(sys.E2.cols() == 10);
  CHECK(sys.H1.rows() == 20);

  CHECK(sys.M(0, 0) == doctest::Approx(200.3 - 0.6));
  CHECK(sys.M(299, 299) == doctest::Approx(200.3 - 0.6 * 300));
  CHECK(sys.M(300, 300) == doctest::Approx(0.4 * 301 - 100.2));
  CHECK(sys.M(699, 699) == doctest::Approx(0.4 * 700 - 100.2));

  for (Index r = 0; r < 5; ++r) {
    CHECK(sys.E2(r, r) == double(5 - r));
    CHECK(sys.E2(695 + r, 5 + r) == double(5 - r));
  }
  CHECK(sys.E2.cwiseAbs().sum() == 30.0);
  for (Index r = 0; r < 20; ++r) CHECK(sys.H1(r, 289 + r) == 1.0);
  CHECK(sys.H1.cwiseAbs().sum() == 20.0);

  CHECK(sys.B2(299, 0) == 1.0);
  CHECK(sys.B2(300, 0) == -1.0);
  CHECK(sys.B2(349, 1) == 1.0);
  CHECK(sys.B2(350, 1) == -1.0);
}

TEST_CASE("problem presets") {
  CHECK(problem_alpha('a') == 1e-5);
  CHECK(problem_alpha('b') == 1e-2);
  CHECK_THROWS_AS(problem_alpha('c'), ValidationError);

  const auto ga = problem_init_gains('a');
  REQUIRE(ga.size() == 4);
  CHECK(ga[0](0) == 10.0);
  CHECK(ga[0](1) == 10.0);
  CHECK(ga[1](0) == 10.0);
  CHECK(ga[1](1) == 100.0);
  CHECK(ga[2](0) == 100.0);
  CHECK(ga[2](1) == 10.0);
  CHECK(ga[3](0) == 100.0);
  CHECK(ga[3](1) == 100.0);

  const auto gb = problem_init_gains('b');
  CHECK(gb[0](0) == 100.0);
  CHECK(gb[3](1) == 1000.0);
}

TEST_CASE("reference optimizer refuses big systems without the override") {
  const VibrationalSystem sys = reference_oscillator(300, 350, 1e-2);
  Vec g0(2);
  g0 << 100.0, 100.0;
  try {
    naive_optimize(sys, g0);
    CHECK(false);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("200") != std::string::npos);
  }
}

TEST_CASE("reference optimizer and surrogate optimizer meet") {
  OscillatorSpec spec;
  spec.n = 16;
  spec.damper_j = 4;
  spec.damper_k = 10;
  const VibrationalSystem sys = build_oscillator(spec);

  const DampingOptResult fast = optimize_damping(sys, problem_init_gains('b'));
  NaiveOptions nopts;
  const NaiveResult slow = naive_optimize(sys, problem_init_gains('b')[0], nopts);

  CHECK(std::abs(fast.hinf_value - slow.value) <= 1e-6 * slow.value);
  CHECK((fast.g_star - slow.g_star).norm() <= 1e-4 * slow.g_star.norm());
  CHECK(slow.norm_evals > 0);
  CHECK(slow.factorizations > 0);
}

TEST_CASE("sweep rows are labeled, ordered and reproducible across jobs") {
  SweepConfig cfg;
  cfg.base.n = 16;
  cfg.j_set = {4, 8};
  cfg.k_set = {11};
  cfg.problem = 'b';
  cfg.jobs = 1;
  const auto rows1 = run_sweep(cfg);
  REQUIRE(rows1.size() == 2);
  CHECK(rows1[0].config_id == "n16_j4_k11_b_iii");
  CHECK(rows1[1].config_id == "n16_j8_k11_b_iii");
  CHECK(rows1[0].n == 16);
  CHECK_FALSE(rows1[0].has_oracle);
  CHECK(std::isnan(rows1[0].rel_gain_err));
  CHECK(rows1[0].result.full_factorizations > 0);

  cfg.jobs = 2;
  const auto rows2 = run_sweep(cfg);
  REQUIRE(rows2.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK((rows1[i].result.g_star - rows2[i].result.g_star).norm() == 0.0);
    CHECK(rows1[i].result.hinf_value == rows2[i].result.hinf_value);
  }
}

TEST_CASE("sweep oracle columns carry relative errors") {
  SweepConfig cfg;
  cfg.base.n = 14;
  cfg.j_set = {4};
  cfg.k_set = {9};
  cfg.with_oracle = true;
  const auto rows = run_sweep(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].has_oracle);
  CHECK(rows[0].rel_hinf_err >= 0.0);
  CHECK(rows[0].rel_hinf_err <= 1e-3);
  CHECK(rows[0].oracle.norm_evals > 0);
}

TEST_CASE("custom problem sweeps override the presets") {
  SweepConfig cfg;
  cfg.base.n = 14;
  cfg.base.alpha_c = 5e-3;
  cfg.j_set = {4};
  cfg.k_set = {9};
  cfg.use_preset = false;
  Vec g0(2);
  g0 << 25.0, 25.0;
  cfg.custom_gains = {g0};
  const auto rows = run_sweep(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].result.hinf_value > 0.0);
  // alpha actually applied: rebuild and compare the internal damping
  OscillatorSpec spec = cfg.base;
  spec.damper_j = 4;
  spec.damper_k = 9;
  const VibrationalSystem sys = build_oscillator(spec);
  CHECK((sys.C_int - 5e-3 * critical_damping(sys.M, sys.K))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}
