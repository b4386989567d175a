#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dampopt/bench.hpp"
#include "dampopt/linf.hpp"
#include "dampopt/modal.hpp"
#include "dampopt/model.hpp"
#include "dampopt/rom.hpp"
#include "support/oracles.hpp"

using namespace dampopt;

namespace {

AffineClosedLoop desk_loop(Index n = 20) {
  OscillatorSpec spec;
  spec.n = n;
  spec.damper_j = 5;
  spec.damper_k = n / 2 + 2;
  return assemble_closed_loop(build_oscillator(spec));
}

Vec gains(double a, double b) {
  Vec g(2);
  g << a, b;
  return g;
}

NormResult dense_norm(const AffineClosedLoop& acl, const Vec& g,
                      double tol = 1e-10) {
  LinfOptions opts;
  opts.tol = tol;
  return linf_dense(acl.first_order_E(), acl.first_order_A(g),
                    acl.first_order_B(), acl.first_order_C(), opts);
}

}  // namespace

TEST_CASE("single resonance peak matches the closed form") {
  const double zeta = 0.05;
  Mat A(2, 2), B(2, 1), C(1, 2);
  A << 0.0, 1.0, -1.0, -2.0 * zeta;
  B << 0.0, 1.0;
  C << 1.0, 0.0;
  LinfOptions opts;
  opts.tol = 1e-10;
  const NormResult nr = linf_dense(Mat::Identity(2, 2), A, B, C, opts);
  const double peak = 1.0 / (2.0 * zeta * std::sqrt(1.0 - zeta * zeta));
  const double wpeak = std::sqrt(1.0 - 2.0 * zeta * zeta);
  CHECK(std::abs(nr.value - peak) <= 1e-8 * peak);
  CHECK(std::abs(nr.omega_star - wpeak) <= 1e-6 * wpeak);
  CHECK(nr.converged);
  CHECK(nr.omega_star == std::abs(nr.omega_signed));
}

TEST_CASE("monotone transfer attains its maximum at zero frequency") {
  Mat A = -Mat::Identity(3, 3);
  std::mt19937 rng(61);
  const Mat B = testsupport::random_matrix(rng, 3, 2);
  const Mat C = testsupport::random_matrix(rng, 2, 3);
  const NormResult nr = linf_dense(Mat::Identity(3, 3), A, B, C);
  const double expect = (C * B).jacobiSvd().singularValues()(0);
  CHECK(std::abs(nr.value - expect) <= 1e-8 * expect);
  CHECK(nr.omega_star <= 1e-6);
}

TEST_CASE("random descriptor models agree with the grid oracle") {
  std::mt19937 rng(67);
  std::uniform_int_distribution<int> kd(2, 12), md(1, 3);
  for (int trial = 0; trial < 8; ++trial) {
    const auto model = testsupport::random_stable_model(
        rng, kd(rng), md(rng), md(rng));
    const auto oracle = testsupport::grid_linf_oracle(model, 200000);
    LinfOptions opts;
    opts.tol = 1e-9;
    const NormResult nr = linf_dense(model.E, model.A, model.B, model.C, opts);
    CAPTURE(trial);
    CHECK(std::abs(nr.value - oracle.value) <= 1e-6 * oracle.value);
  }
}

TEST_CASE("complex data path reproduces the real result") {
  std::mt19937 rng(71);
  const auto model = testsupport::random_stable_model(rng, 8, 2, 2);
  const NormResult re = linf_dense(model.E, model.A, model.B, model.C);
  const CMat Ec = model.E.cast<Complex>(), Ac = model.A.cast<Complex>(),
             Bc = model.B.cast<Complex>(), Cc = model.C.cast<Complex>();
  const NormResult cx = linf_dense(Ec, Ac, Bc, Cc);
  CHECK(std::abs(re.value - cx.value) <= 1e-7 * re.value);
  CHECK(std::abs(re.omega_star - cx.omega_star) <= 1e-4 * (1.0 + re.omega_star));
}

TEST_CASE("imaginary axis poles raise with a frequency hint") {
  Mat A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;  // eigenvalues +-i
  try {
    linf_dense(Mat::Identity(2, 2), A, Mat::Ones(2, 1), Mat::Ones(1, 2));
    CHECK(false);
  } catch (const UnboundedModelError& e) {
    CHECK(std::abs(e.omega_hint) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::string(e.what()).find("imaginary axis") != std::string::npos);
  }
}

TEST_CASE("singular descriptor matrix raises") {
  Mat E = Mat::Identity(3, 3);
  E(2, 2) = 0.0;
  try {
    linf_dense(E, -Mat::Identity(3, 3), Mat::Ones(3, 1), Mat::Ones(1, 3));
    CHECK(false);
  } catch (const UnboundedModelError& e) {
    CHECK(std::string(e.what()).find("singular") != std::string::npos);
  }
}

TEST_CASE("reduced overload equals the generic dense solver") {
  AffineClosedLoop acl = desk_loop();
  ProjectionBasisPair bases;
  const Vec g = gains(20, 75);
  for (double w : {0.4, 1.0, 1.8, 2.6})
    expand(bases, acl, g, w, DirectionMode::tangential);
  const ReducedParametricModel rom = reduce(acl, bases);
  const NormResult a = linf_dense(rom, g);
  const NormResult b = linf_dense(rom.Et, rom.A_of(g), rom.Bt, rom.Ct);
  CHECK(std::abs(a.value - b.value) <= 1e-9 * b.value);
  CHECK(std::abs(a.omega_star - b.omega_star) <= 1e-5 * (1.0 + b.omega_star));
}

TEST_CASE("probe history is recorded and monotone") {
  AffineClosedLoop acl = desk_loop();
  const NormResult nr = dense_norm(acl, gains(50, 50));
  CHECK(!nr.probes.empty());
  CHECK(!nr.history.empty());
  for (std::size_t i = 1; i < nr.history.size(); ++i)
    CHECK(nr.history[i].second >= nr.history[i - 1].second);
  CHECK(nr.history.back().second == nr.value);
}

TEST_CASE("warm start frequencies are honored") {
  AffineClosedLoop acl = desk_loop();
  const Vec g = gains(35, 90);
  const NormResult cold = dense_norm(acl, g);
  LinfOptions opts;
  opts.tol = 1e-10;
  opts.init_freqs = {cold.omega_star};
  const NormResult warm =
      linf_dense(acl.first_order_E(), acl.first_order_A(g),
                 acl.first_order_B(), acl.first_order_C(), opts);
  CHECK(std::abs(warm.value - cold.value) <= 1e-9 * cold.value);
}

TEST_CASE("local refinement climbs to the nearby peak") {
  AffineClosedLoop acl = desk_loop();
  const Vec g = gains(10, 10);
  const NormResult nr = dense_norm(acl, g);
  const double w0 = nr.omega_star * 0.98;
  const auto [wr, sr] = sigma_max_local_refine(acl, g, w0,
                                               0.5 * nr.omega_star,
                                               1.5 * nr.omega_star);
  CHECK(sr >= eval_sigma_max(acl, g, w0));
  CHECK(std::abs(sr - nr.value) <= 1e-7 * nr.value);
}

TEST_CASE("greedy lower bound meets the dense solver on the oscillator") {
  AffineClosedLoop acl = desk_loop(26);
  const ModalData md = modal_transform(acl.sys().M, acl.sys().K);
  for (auto [a, b] : {std::pair{10.0, 10.0}, {100.0, 400.0}, {1500.0, 30.0}}) {
    const Vec g = gains(a, b);
    const NormResult dense = dense_norm(acl, g);
    const NormResult greedy =
        hinf_greedy(acl, g, initial_frequencies(acl, md, g, 8).omega);
    CAPTURE(a);
    CAPTURE(b);
    CHECK(greedy.converged);
    // genuine lower bound up to solver tolerance
    CHECK(greedy.value <= dense.value * (1.0 + 1e-9));
    CHECK(std::abs(greedy.value - dense.value) <= 1e-6 * dense.value);
    CHECK(greedy.final_fac != nullptr);
    CHECK(greedy.omega_star >= 0.0);
  }
}

TEST_CASE("greedy works in every direction mode") {
  AffineClosedLoop acl = desk_loop();
  const ModalData md = modal_transform(acl.sys().M, acl.sys().K);
  const Vec g = gains(60, 220);
  const NormResult dense = dense_norm(acl, g);
  const auto init = initial_frequencies(acl, md, g, 6).omega;
  for (DirectionMode mode : {DirectionMode::tangential, DirectionMode::full,
                             DirectionMode::padded}) {
    GreedyOptions opts;
    opts.mode = mode;
    const NormResult nr = hinf_greedy(acl, g, init, opts);
    CHECK(std::abs(nr.value - dense.value) <= 1e-6 * dense.value);
  }
}

TEST_CASE("a seeded scratch basis cuts full order work") {
  AffineClosedLoop acl = desk_loop(30);
  const ModalData md = modal_transform(acl.sys().M, acl.sys().K);
  const Vec g1 = gains(80, 120);
  const Vec g2 = gains(85, 125);
  const auto init = initial_frequencies(acl, md, g1, 6).omega;
  ProjectionBasisPair scratch;

  auto& counters = solve_counters();
  const long before1 = counters.full_factorizations;
  const NormResult r1 = hinf_greedy(acl, g1, init, {}, &scratch);
  const long cost1 = counters.full_factorizations - before1;

  GreedyOptions warm;
  warm.screen_top = 2;
  const long before2 = counters.full_factorizations;
  const NormResult r2 = hinf_greedy(acl, g2, init, warm, &scratch);
  const long cost2 = counters.full_factorizations - before2;

  CHECK(cost2 < cost1);
  const NormResult dense = dense_norm(acl, g2);
  CHECK(std::abs(r2.value - dense.value) <= 1e-6 * dense.value);
  CHECK(r1.value > 0.0);
}
