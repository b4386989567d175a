#include "dampopt/bench.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <limits>

#include "dampopt/linf.hpp"
#include "dampopt/modal.hpp"

namespace dampopt {

namespace {

Mat chain_stiffness(Index n, double k) {
  Mat K = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    K(i, i) = 2.0 * k;
    if (i + 1 < n) {
      K(i, i + 1) = -k;
      K(i + 1, i) = -k;
    }
  }
  return K;
}

Vec chain_masses(Index n) {
  // descends to the break mass, then ascends; positive for every n >= 7
  const Index brk = static_cast<Index>(std::llround(3.0 * static_cast<double>(n) / 7.0));
  Vec m(n);
  for (Index i = 1; i <= n; ++i) {
    const double x = static_cast<double>(i);
    m(i - 1) = i <= brk ? 200.3 - (420.0 / static_cast<double>(n)) * x
                        : (280.0 / static_cast<double>(n)) * x - 100.2;
  }
  return m;
}

Mat damper_columns(Index n, Index j, Index k) {
  if (j < 1 || j >= n || k < 1 || k >= n)
    throw ValidationError("damper positions must satisfy 1 <= pos <= n-1");
  Mat B2 = Mat::Zero(n, 2);
  B2(j - 1, 0) = 1.0;
  B2(j, 0) = -1.0;
  B2(k - 1, 1) = 1.0;
  B2(k, 1) = -1.0;
  return B2;
}

VibrationalSystem finish_system(Mat M, Mat K, Mat B2, Mat E2, Mat H1,
                                double alpha_c) {
  if (!(alpha_c >= 0.0))
    throw ValidationError("alpha_c must be nonnegative");
  VibrationalSystem sys;
  sys.M = std::move(M);
  sys.K = std::move(K);
  sys.C_int = alpha_c * critical_damping(sys.M, sys.K);
  sys.B2 = std::move(B2);
  sys.E2 = std::move(E2);
  sys.H1 = std::move(H1);
  validate(sys);
  return sys;
}

}  // namespace

VibrationalSystem build_oscillator(const OscillatorSpec& spec) {
  const Index n = spec.n;
  if (n < 8) throw ValidationError("oscillator needs n >= 8");
  Mat M = chain_masses(n).asDiagonal();
  Mat K = chain_stiffness(n, 10.0);
  Mat B2 = damper_columns(n, spec.damper_j, spec.damper_k);

  Mat E2 = Mat::Zero(n, 4);
  E2(0, 0) = 2.0;
  E2(1, 1) = 1.0;
  E2(n - 2, 2) = 2.0;
  E2(n - 1, 3) = 1.0;

  Mat H1 = Mat::Zero(4, n);
  const Index c0 = n / 2 - 2;  // outputs at masses n/2 - 1 .. n/2 + 2
  for (Index r = 0; r < 4; ++r) H1(r, c0 + r) = 1.0;

  return finish_system(std::move(M), std::move(K), std::move(B2), std::move(E2),
                       std::move(H1), spec.alpha_c);
}

VibrationalSystem reference_oscillator(Index damper_j, Index damper_k,
                                       double alpha_c) {
  const Index n = 700;
  Mat M = chain_masses(n).asDiagonal();
  Mat K = chain_stiffness(n, 10.0);
  Mat B2 = damper_columns(n, damper_j, damper_k);

  Mat E2 = Mat::Zero(n, 10);
  for (Index r = 0; r < 5; ++r) {
    E2(r, r) = static_cast<double>(5 - r);
    E2(n - 5 + r, 5 + r) = static_cast<double>(5 - r);
  }
  Mat H1 = Mat::Zero(20, n);
  for (Index r = 0; r < 20; ++r) H1(r, 289 + r) = 1.0;

  return finish_system(std::move(M), std::move(K), std::move(B2), std::move(E2),
                       std::move(H1), alpha_c);
}

double problem_alpha(char problem) {
  switch (problem) {
    case 'a':
      return 1e-5;
    case 'b':
      return 1e-2;
    default:
      throw ValidationError("unknown problem tag (expected 'a' or 'b')");
  }
}

std::vector<Vec> problem_init_gains(char problem) {
  const double base = problem == 'a' ? 10.0 : (problem == 'b' ? 100.0 : 0.0);
  if (base == 0.0)
    throw ValidationError("unknown problem tag (expected 'a' or 'b')");
  std::vector<Vec> gains;
  for (double a : {base, 10.0 * base})
    for (double b : {base, 10.0 * base}) {
      Vec g(2);
      g << a, b;
      gains.push_back(g);
    }
  return gains;  // order: (c,c), (c,10c), (10c,c), (10c,10c)
}

NaiveResult naive_optimize(const VibrationalSystem& sys, const Vec& g0,
                           const NaiveOptions& opts) {
  validate(sys);
  const Index n = sys.M.rows();
  if (n > 200 && !opts.allow_large)
    throw ValidationError(
        "dense reference optimizer is limited to n <= 200; "
        "set allow_large to override");

  const AffineClosedLoop acl = assemble_closed_loop(sys);
  const Mat E = acl.first_order_E();
  const Mat B = acl.first_order_B();
  const Mat C = acl.first_order_C();

  const long ne0 = solve_counters().full_norm_evals;
  const long nf0 = solve_counters().full_factorizations;

  std::vector<double> recent;
  double last_omega = 0.0;
  const Objective f = [&](const Vec& g, Vec* grad) -> double {
    LinfOptions lo;
    lo.tol = opts.linf_tol;
    lo.init_freqs = recent;
    NormResult nr;
    try {
      ++solve_counters().full_norm_evals;
      nr = linf_dense(E, acl.first_order_A(g), B, C, lo);
    } catch (const UnboundedModelError&) {
      return std::numeric_limits<double>::infinity();
    }
    recent.assign(1, nr.omega_star);
    last_omega = nr.omega_star;
    if (grad) {
      ShiftedFactorization fac(acl, g, Complex(0.0, nr.omega_star));
      const GradientContext ctx = make_gradient_context(acl, fac, nr.sample);
      *grad = hinf_gradient(acl, ctx, /*strict=*/false);
    }
    return nr.value;
  };

  const InnerResult inner = minimize_nonsmooth(f, g0, opts.inner);

  NaiveResult res;
  res.g_star = inner.g;
  res.value = inner.value;
  res.omega_star = last_omega;
  res.iterations = inner.iterations;
  res.evals = inner.evals;
  res.norm_evals = solve_counters().full_norm_evals - ne0;
  res.factorizations = solve_counters().full_factorizations - nf0;
  return res;
}

namespace {

SweepRow run_cell(const SweepConfig& cfg, Index j, Index k, unsigned salt) {
  OscillatorSpec spec = cfg.base;
  spec.damper_j = j;
  spec.damper_k = k;
  if (cfg.use_preset) spec.alpha_c = problem_alpha(cfg.problem);
  if (cfg.reference_family) spec.n = 700;
  const VibrationalSystem sys =
      cfg.reference_family
          ? reference_oscillator(spec.damper_j, spec.damper_k, spec.alpha_c)
          : build_oscillator(spec);
  const std::vector<Vec> gains =
      cfg.use_preset ? problem_init_gains(cfg.problem) : cfg.custom_gains;
  if (gains.empty())
    throw ValidationError("sweep: no initial gains configured");

  AlgorithmConfig algo = cfg.algo;
  algo.inner.seed = cfg.seed + salt;

  SweepRow row;
  row.n = spec.n;
  row.j = j;
  row.k = k;
  row.problem = cfg.problem;
  row.mode = algo.init_mode;
  row.config_id = "n" + std::to_string(spec.n) + "_j" + std::to_string(j) +
                  "_k" + std::to_string(k) + "_" + cfg.problem +
                  (algo.init_mode == InitMode::equidistant ? "_i" : "_iii");

  const auto t0 = std::chrono::steady_clock::now();
  row.result = optimize_damping(sys, gains, algo);
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  row.rel_gain_err = std::numeric_limits<double>::quiet_NaN();
  row.rel_hinf_err = std::numeric_limits<double>::quiet_NaN();
  if (cfg.with_oracle) {
    NaiveOptions nopts = cfg.oracle;
    nopts.inner.seed = cfg.seed + salt + 9001;
    const auto t1 = std::chrono::steady_clock::now();
    row.oracle = naive_optimize(sys, gains.front(), nopts);
    row.oracle_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1)
            .count();
    row.has_oracle = true;
    const double gn = row.oracle.g_star.norm();
    row.rel_gain_err = (row.result.g_star - row.oracle.g_star).norm() /
                       (gn > 0.0 ? gn : 1.0);
    row.rel_hinf_err = std::abs(row.result.hinf_value - row.oracle.value) /
                       std::abs(row.oracle.value);
  }
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
  std::vector<std::pair<Index, Index>> cells;
  for (Index j : cfg.j_set)
    for (Index k : cfg.k_set) cells.emplace_back(j, k);

  std::vector<SweepRow> rows(cells.size());
  if (cfg.jobs > 1) {
    std::vector<std::future<SweepRow>> futs;
    futs.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
      futs.push_back(std::async(std::launch::async, [&cfg, &cells, i] {
        return run_cell(cfg, cells[i].first, cells[i].second,
                        static_cast<unsigned>(i));
      }));
    for (std::size_t i = 0; i < cells.size(); ++i) rows[i] = futs[i].get();
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i)
      rows[i] = run_cell(cfg, cells[i].first, cells[i].second,
                         static_cast<unsigned>(i));
  }
  return rows;
}

}  // namespace dampopt
