#include "dampopt/optim.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <random>

#include "dampopt/modal.hpp"

namespace dampopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Box {
  Vec lo;
  Vec hi;  // +inf entries when unbounded
};

Box make_box(const OptimizerConfig& cfg, Index p) {
  Box b;
  b.lo = cfg.lower_bounds.size() ? cfg.lower_bounds : Vec::Zero(p);
  b.hi = cfg.upper_bounds.size() ? cfg.upper_bounds : Vec::Constant(p, kInf);
  if (b.lo.size() != p || b.hi.size() != p)
    throw ValidationError("optimizer bounds: wrong dimension");
  return b;
}

Vec project_box(Vec g, const Box& b) {
  for (Index j = 0; j < g.size(); ++j) g(j) = std::clamp(g(j), b.lo(j), b.hi(j));
  return g;
}

// Tangent-cone projection of the steepest descent direction; its norm is the
// stationarity measure for the bound-constrained problem.
Vec projected_descent(const Vec& g, const Vec& grad, const Box& b) {
  Vec d = -grad;
  for (Index j = 0; j < g.size(); ++j) {
    const double eps = 1e-10 * (1.0 + std::abs(g(j)));
    if (g(j) <= b.lo(j) + eps && d(j) < 0.0) d(j) = 0.0;
    if (g(j) >= b.hi(j) - eps && d(j) > 0.0) d(j) = 0.0;
  }
  return d;
}

std::vector<bool> active_set(const Vec& g, const Vec& grad, const Box& b) {
  std::vector<bool> act(static_cast<std::size_t>(g.size()), false);
  for (Index j = 0; j < g.size(); ++j) {
    const double eps = 1e-10 * (1.0 + std::abs(g(j)));
    const bool at_lo = g(j) <= b.lo(j) + eps && grad(j) > 0.0;
    const bool at_hi = g(j) >= b.hi(j) - eps && grad(j) < 0.0;
    act[static_cast<std::size_t>(j)] = at_lo || at_hi;
  }
  return act;
}

double max_feasible_step(const Vec& g, const Vec& d, const Box& b) {
  double t = kInf;
  for (Index j = 0; j < g.size(); ++j) {
    if (d(j) < 0.0) t = std::min(t, (g(j) - b.lo(j)) / (-d(j)));
    if (d(j) > 0.0 && std::isfinite(b.hi(j)))
      t = std::min(t, (b.hi(j) - g(j)) / d(j));
  }
  return std::max(t, 0.0);
}

struct LbfgsMemory {
  std::deque<std::pair<Vec, Vec>> pairs;  // (s, y)
  int capacity = 10;

  void clear() { pairs.clear(); }
  void push(const Vec& s, const Vec& y) {
    if (s.dot(y) <= 1e-12 * s.norm() * y.norm()) return;
    pairs.emplace_back(s, y);
    while (static_cast<int>(pairs.size()) > capacity) pairs.pop_front();
  }
  // Two-loop recursion applied to -grad.
  Vec direction(const Vec& grad) const {
    Vec q = -grad;
    if (pairs.empty()) return q;
    std::vector<double> alpha(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      const auto& [s, y] = pairs[i];
      const double rho = 1.0 / y.dot(s);
      alpha[i] = rho * s.dot(q);
      q -= alpha[i] * y;
    }
    const auto& [s_l, y_l] = pairs.back();
    q *= s_l.dot(y_l) / y_l.dot(y_l);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& [s, y] = pairs[i];
      const double rho = 1.0 / y.dot(s);
      const double beta = rho * y.dot(q);
      q += (alpha[i] - beta) * s;
    }
    return q;
  }
};

struct LineSearchResult {
  bool ok = false;
  bool decreased = false;
  double t = 0.0;
  Vec g;
  double fv = kInf;
  Vec grad;
  int evals = 0;
};

// Weak Wolfe conditions by bisection (bracketing also handles kinks: the
// curvature test uses the one-sided derivative of the active branch).
LineSearchResult weak_wolfe(const Objective& f, const Vec& g0, double fv0,
                            const Vec& grad0, const Vec& d, double t_max,
                            const Box& box, const OptimizerConfig& cfg) {
  LineSearchResult best;
  const double dd0 = grad0.dot(d);
  if (!(dd0 < 0.0)) return best;

  double a = 0.0;
  double bnd = kInf;
  double t = std::min(1.0, t_max);
  Vec grad(g0.size());
  for (int i = 0; i < cfg.max_ls_evals; ++i) {
    const Vec gt = project_box(g0 + t * d, box);
    const double fv = f(gt, &grad);
    ++best.evals;
    const bool sufficient = std::isfinite(fv) && fv <= fv0 + cfg.wolfe_c1 * t * dd0;
    if (sufficient && fv < best.fv) {
      best.decreased = fv < fv0;
      best.t = t;
      best.g = gt;
      best.fv = fv;
      best.grad = grad;
    }
    if (!sufficient) {
      bnd = t;
    } else if (grad.dot(d) < cfg.wolfe_c2 * dd0 &&
               t < t_max * (1.0 - 1e-12)) {
      a = t;
    } else {
      best.ok = true;
      best.t = t;
      best.g = gt;
      best.fv = fv;
      best.grad = grad;
      best.decreased = fv < fv0;
      return best;
    }
    double t_next;
    if (std::isfinite(bnd))
      t_next = 0.5 * (a + bnd);
    else
      t_next = std::min(2.0 * t, t_max);
    if (std::abs(t_next - t) <= 1e-16 * std::max(1.0, t)) break;
    t = t_next;
  }
  best.ok = best.decreased;  // accept the best sufficient-decrease point
  return best;
}

void project_simplex(Vec& lam) {
  // Euclidean projection onto the probability simplex (sort-based).
  const Index n = lam.size();
  std::vector<double> u(lam.data(), lam.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0;
  double theta = 0.0;
  int k = 0;
  for (Index i = 0; i < n; ++i) {
    css += u[static_cast<std::size_t>(i)];
    const double th = (css - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - th > 0.0) {
      theta = th;
      k = static_cast<int>(i) + 1;
    }
  }
  if (k == 0) {
    lam.setConstant(1.0 / static_cast<double>(n));
    return;
  }
  for (Index i = 0; i < n; ++i) lam(i) = std::max(0.0, lam(i) - theta);
}

// Minimum-norm element of the convex hull of the columns of G.
Vec min_norm_hull(const Mat& G) {
  const Index nb = G.cols();
  Vec lam = Vec::Constant(nb, 1.0 / static_cast<double>(nb));
  const Mat Q = G.transpose() * G;
  const double qn = Q.norm();
  if (qn <= 0.0) return Vec::Zero(G.rows());
  const double step = 1.0 / qn;
  for (int it = 0; it < 300; ++it) {
    lam -= step * (Q * lam);
    project_simplex(lam);
  }
  return G * lam;
}

}  // namespace

InnerResult minimize_nonsmooth(const Objective& f, const Vec& g0,
                               const OptimizerConfig& cfg) {
  const Index p = g0.size();
  const Box box = make_box(cfg, p);
  std::mt19937 rng(cfg.seed);

  InnerResult res;
  Vec g = project_box(g0, box);
  Vec grad(p);
  double fv = f(g, &grad);
  res.evals = 1;
  if (!std::isfinite(fv))
    throw UnboundedModelError("objective not finite at the starting point");

  LbfgsMemory mem;
  mem.capacity = cfg.lbfgs_memory;
  std::vector<bool> prev_active = active_set(g, grad, box);
  double gs_radius = cfg.gs_radius0 * (1.0 + g.norm());
  int gs_rounds = 0;
  double stationarity = projected_descent(g, grad, box).norm();

  auto gradient_sampling_step = [&]() -> bool {
    // One sampled descent attempt at the current radius.  Returns true when
    // the iterate moved.
    const int batch = cfg.gs_batch > 0 ? cfg.gs_batch
                                       : 2 * static_cast<int>(p) + 4;
    Mat G(p, batch + 1);
    G.col(0) = grad;
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Vec gtmp(p);
    for (int c = 0; c < batch; ++c) {
      Vec u(p);
      for (Index j = 0; j < p; ++j) u(j) = nd(rng);
      const double un = u.norm();
      if (un > 0.0)
        u *= gs_radius *
             std::pow(ud(rng), 1.0 / static_cast<double>(p)) / un;
      const Vec xs = project_box(g + u, box);
      const double fs = f(xs, &gtmp);
      ++res.evals;
      if (std::isfinite(fs) && fs < fv - 1e-14 * (1.0 + std::abs(fv))) {
        g = xs;
        fv = fs;
        grad = gtmp;
        mem.clear();
        return true;
      }
      G.col(c + 1) = std::isfinite(fs) ? gtmp : grad;
    }
    const Vec dmin = min_norm_hull(G);
    Vec d = -dmin;
    for (Index j = 0; j < p; ++j) {
      const double eps = 1e-10 * (1.0 + std::abs(g(j)));
      if (g(j) <= box.lo(j) + eps && d(j) < 0.0) d(j) = 0.0;
      if (g(j) >= box.hi(j) - eps && d(j) > 0.0) d(j) = 0.0;
    }
    stationarity = std::min(stationarity, d.norm());
    if (d.norm() <= cfg.stationarity_tol) return false;
    double t = gs_radius / std::max(d.norm(), 1e-300);
    t = std::min(t, max_feasible_step(g, d, box));
    for (int i = 0; i < 20 && t > 0.0; ++i) {
      const Vec xs = project_box(g + t * d, box);
      const double fs = f(xs, &gtmp);
      ++res.evals;
      if (std::isfinite(fs) &&
          fs < fv - cfg.wolfe_c1 * t * d.squaredNorm()) {
        g = xs;
        fv = fs;
        grad = gtmp;
        mem.clear();
        return true;
      }
      t *= 0.5;
    }
    return false;
  };

  for (int iter = 0; iter < cfg.max_inner_iter; ++iter) {
    res.iterations = iter + 1;
    const std::vector<bool> act = active_set(g, grad, box);
    if (act != prev_active) mem.clear();
    prev_active = act;

    stationarity = projected_descent(g, grad, box).norm();
    if (stationarity <= cfg.stationarity_tol) break;

    Vec d = mem.direction(grad);
    for (Index j = 0; j < p; ++j)
      if (act[static_cast<std::size_t>(j)]) d(j) = 0.0;
    if (!(d.dot(grad) < -1e-12 * d.norm() * grad.norm()))
      d = projected_descent(g, grad, box);

    bool moved = false;
    const double t_max = max_feasible_step(g, d, box);
    if (d.norm() > 0.0 && t_max > 0.0) {
      const LineSearchResult ls = weak_wolfe(f, g, fv, grad, d, t_max, box, cfg);
      res.evals += ls.evals;
      if (ls.ok && ls.decreased) {
        const Vec s = ls.g - g;
        const Vec y = ls.grad - grad;
        mem.push(s, y);
        g = ls.g;
        fv = ls.fv;
        grad = ls.grad;
        moved = true;
        gs_radius = std::max(gs_radius, 1e-3 * (1.0 + g.norm()));
      }
    }
    if (!moved) {
      // Smooth model is stuck: sample.
      bool gs_moved = false;
      while (gs_rounds < cfg.max_gs_rounds &&
             gs_radius > cfg.gs_radius_floor * (1.0 + g.norm())) {
        ++gs_rounds;
        if (gradient_sampling_step()) {
          gs_moved = true;
          break;
        }
        gs_radius *= cfg.gs_shrink;
        if (stationarity <= cfg.stationarity_tol) break;
      }
      if (!gs_moved) break;
    }
  }

  res.g = g;
  res.value = fv;
  res.stationarity = stationarity;
  res.hit_max_iter = res.iterations >= cfg.max_inner_iter;
  return res;
}

InnerResult minimize_reduced(const ReducedParametricModel& rom, const Vec& g0,
                             const OptimizerConfig& cfg) {
  // Let a degenerate surrogate at the start surface to the caller with its
  // frequency hint intact.
  LinfOptions warm;
  warm.tol = cfg.dense_tol;
  {
    const NormResult probe = linf_dense(rom, g0, warm);
    warm.init_freqs.push_back(probe.omega_signed);
  }
  std::vector<double> recent = warm.init_freqs;
  const Objective f = [&rom, &recent, &cfg](const Vec& g, Vec* grad) -> double {
    LinfOptions lo;
    lo.tol = cfg.dense_tol;
    lo.init_freqs = recent;
    NormResult nr;
    try {
      nr = linf_dense(rom, g, lo);
    } catch (const UnboundedModelError&) {
      return kInf;
    }
    recent.assign(1, nr.omega_signed);
    if (grad) *grad = reduced_hinf_gradient(rom, g, nr.sample);
    return nr.value;
  };
  return minimize_nonsmooth(f, g0, cfg);
}

namespace {

double safe_reduced_value(const ReducedParametricModel& rom, const Vec& g,
                          double tol) {
  LinfOptions lo;
  lo.tol = std::max(tol, 1e-8);
  lo.refine_maximizer = false;
  try {
    return linf_dense(rom, g, lo).value;
  } catch (const UnboundedModelError&) {
    return kInf;
  }
}

std::vector<double> equidistant_grid(double omega_max, int count) {
  std::vector<double> w(static_cast<std::size_t>(std::max(count, 2)));
  const int nn = static_cast<int>(w.size());
  for (int i = 0; i < nn; ++i)
    w[static_cast<std::size_t>(i)] =
        omega_max * static_cast<double>(i) / static_cast<double>(nn - 1);
  return w;
}

}  // namespace

DampingOptResult optimize_damping(const VibrationalSystem& sys,
                                  const std::vector<Vec>& init_gains,
                                  const AlgorithmConfig& cfg) {
  validate(sys);
  if (init_gains.empty())
    throw ValidationError("optimize_damping: at least one initial gain required");
  for (const Vec& g : init_gains) {
    if (g.size() != sys.B2.cols())
      throw ValidationError("optimize_damping: initial gain dimension mismatch");
    if ((g.array() < 0.0).any())
      throw ValidationError("optimize_damping: initial gains must be nonnegative");
  }

  const AffineClosedLoop acl = assemble_closed_loop(sys);
  const long fac_before = solve_counters().full_factorizations;
  DampingOptResult res;

  const ModalData modal = modal_transform(sys.M, sys.K);
  const double omega_max = modal.Omega.maxCoeff();
  const DominanceModel dmodel(acl, modal);

  const Index channels = std::min(sys.E2.cols(), sys.H1.rows());
  ProjectionBasisPair bases;
  double warm_omega = std::numeric_limits<double>::quiet_NaN();

  auto candidate_freqs = [&](const Vec& g) {
    std::vector<double> freqs =
        cfg.init_mode == InitMode::equidistant
            ? equidistant_grid(omega_max, cfg.init_sample_count)
            : dmodel.initial_frequencies(g, cfg.heuristic_count).omega;
    if (std::isfinite(warm_omega)) freqs.push_back(warm_omega);
    return freqs;
  };

  GreedyOptions gbase;
  gbase.tol = cfg.greedy_tol;
  gbase.max_iter = cfg.greedy_max_iter;
  gbase.mode = DirectionMode::tangential;
  gbase.dense_tol = cfg.inner.dense_tol;

  if (cfg.init_mode == InitMode::equidistant) {
    const std::vector<double> grid =
        equidistant_grid(omega_max, cfg.init_sample_count);
    for (const Vec& g : init_gains)
      for (double w : grid) expand(bases, acl, g, w, cfg.init_direction_mode);
  } else {
    // One norm computation per initial gain; later runs inherit the scratch
    // bases of the earlier ones, so their probing can be screened.
    ProjectionBasisPair scratch;
    double best_init = -kInf;
    for (const Vec& g : init_gains) {
      GreedyOptions go = gbase;
      go.screen_top = cfg.screen_top;
      const NormResult nr = hinf_greedy(acl, g, candidate_freqs(g), go, &scratch);
      expand_from_factorization(bases, acl, *nr.final_fac, nr.sample,
                                cfg.init_direction_mode);
      if (nr.value > best_init) {
        best_init = nr.value;
        warm_omega = nr.omega_star;
      }
    }
  }

  Vec g_hat;
  Vec g_prev;
  double reduced_prev = std::numeric_limits<double>::quiet_NaN();
  NormResult full_nr;
  TerminationReason reason = TerminationReason::max_outer;

  for (int j = 1; j <= cfg.max_outer_iter; ++j) {
    res.outer_iterations = j;
    ReducedParametricModel rom = reduce(acl, bases);

    Vec start;
    if (j == 1) {
      double best = kInf;
      for (const Vec& g : init_gains) {
        const double v = safe_reduced_value(rom, g, cfg.inner.dense_tol);
        if (v < best) {
          best = v;
          start = g;
        }
      }
      if (!std::isfinite(best)) start = init_gains.front();
    } else {
      start = g_hat;
    }

    InnerResult inner;
    bool inner_done = false;
    for (int attempt = 0; attempt <= 3; ++attempt) {
      try {
        inner = minimize_reduced(rom, start, cfg.inner);
        inner_done = true;
        break;
      } catch (const UnboundedModelError& e) {
        if (attempt == 3) throw;
        // Degenerate surrogate at the start: anchor it there and retry.
        double wp = std::isfinite(e.omega_hint) ? std::abs(e.omega_hint)
                                                : warm_omega;
        if (!std::isfinite(wp) || wp > 10.0 * omega_max)
          wp = omega_max * (0.25 + 0.25 * attempt);
        expand(bases, acl, start, wp * (1.0 + 1e-6 * attempt) + 1e-9 * attempt,
               DirectionMode::tangential);
        rom = reduce(acl, bases);
      }
    }
    if (!inner_done)
      throw UnboundedModelError("reduced surrogate stayed degenerate");

    bool restarted = false;
    if (j > 1) {
      // A warm start underperforming a plain initial gain on the current
      // surrogate signals a stalled branch; restart from the better point.
      double best = kInf;
      Vec g_best;
      for (const Vec& g : init_gains) {
        const double v = safe_reduced_value(rom, g, cfg.inner.dense_tol);
        if (v < best) {
          best = v;
          g_best = g;
        }
      }
      if (std::isfinite(best) && best < inner.value * (1.0 - 1e-9)) {
        try {
          const InnerResult alt = minimize_reduced(rom, g_best, cfg.inner);
          if (alt.value < inner.value) {
            inner = alt;
            restarted = true;
          }
        } catch (const UnboundedModelError&) {
        }
      }
    }

    const Vec g_new = inner.g;
    const double reduced_value = inner.value;

    GreedyOptions go = gbase;
    go.screen_top = cfg.screen_top;
    ProjectionBasisPair scratch = bases;
    const NormResult nr =
        hinf_greedy(acl, g_new, candidate_freqs(g_new), go, &scratch);
    warm_omega = nr.omega_star;
    full_nr = nr;

    const InterpolationRecord rec = expand_from_factorization(
        bases, acl, *nr.final_fac, nr.sample, cfg.update_direction_mode);

    OuterIterate ot;
    ot.iter = j;
    ot.g = g_new;
    ot.reduced_value = reduced_value;
    ot.full_value = nr.value;
    ot.omega = nr.omega_star;
    ot.inner_iterations = inner.iterations;
    ot.inner_evals = inner.evals;
    ot.restarted = restarted;

    if (cfg.hermite_check) {
      HermiteCheckOptions hopts;
      hopts.with_full_fd = false;
      hopts.with_stationarity =
          cfg.update_direction_mode == DirectionMode::tangential;
      ReducedParametricModel rom_chk = reduce(acl, bases);
      HermiteReport hrep = check_hermite(acl, rom_chk, rec, hopts);
      const int max_rep = cfg.max_repairs >= 0
                              ? cfg.max_repairs
                              : static_cast<int>(channels) - 1;
      Eigen::JacobiSVD<CMat> svd(nr.sample.F,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
      while (!hrep.value_ok && ot.repairs < max_rep) {
        const int k = ot.repairs + 1;
        if (k >= svd.singularValues().size()) break;
        DirectionSet extra;
        extra.right = svd.matrixV().col(k);
        extra.left = svd.matrixU().col(k);
        expand_with_directions(bases, acl, *nr.final_fac, nr.sample, extra,
                               DirectionMode::tangential);
        ++ot.repairs;
        rom_chk = reduce(acl, bases);
        hrep = check_hermite(acl, rom_chk, rec, hopts);
      }
      ot.hermite_value_residual =
          std::max(hrep.value_residual, hrep.left_value_residual);
      ot.hermite_stationarity_residual = hrep.stationarity_residual;
    }

    ot.rom_dim = static_cast<int>(bases.dim());
    res.trace.push_back(ot);

    if (j >= 2) {
      const double gdiff = (g_new - g_prev).norm();
      const double gsum = (g_new + g_prev).norm();
      const double vdiff = std::abs(reduced_value - reduced_prev);
      const double vsum = std::abs(reduced_value + reduced_prev);
      if (gdiff < 0.5 * cfg.tol_gains * gsum) {
        g_hat = g_new;
        reason = TerminationReason::gains_tol;
        break;
      }
      if (vdiff < 0.5 * cfg.tol_value * vsum) {
        g_hat = g_new;
        reason = TerminationReason::value_tol;
        break;
      }
    }
    g_prev = g_new;
    g_hat = g_new;
    reduced_prev = reduced_value;
  }

  res.g_star = g_hat;
  res.hinf_value = full_nr.value;
  res.omega_star = full_nr.omega_star;
  res.rom_dimension = static_cast<int>(bases.dim());
  res.termination = reason;
  res.full_factorizations =
      solve_counters().full_factorizations - fac_before;
  if (cfg.keep_bases)
    res.bases = std::make_shared<ProjectionBasisPair>(std::move(bases));
  return res;
}

}  // namespace dampopt
