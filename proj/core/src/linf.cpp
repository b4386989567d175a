#include "dampopt/linf.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace dampopt {

namespace {

constexpr double kAxisPoleTol = 1e-13;   // pole purely imaginary -> unbounded
constexpr double kImagClassTol = 1e-6;   // level-crossing classification
constexpr double kEtCondTol = 1e-14;

std::vector<double> dedup_sorted(std::vector<double> w) {
  std::sort(w.begin(), w.end());
  std::vector<double> out;
  for (double x : w) {
    if (out.empty() || std::abs(x - out.back()) > 1e-12 * (1.0 + std::abs(x)))
      out.push_back(x);
  }
  return out;
}

// Keeps first occurrences in the given order; callers pass candidate
// frequencies most promising first and the priority must survive dedup.
std::vector<double> dedup_keep_order(const std::vector<double>& w) {
  std::vector<double> out;
  out.reserve(w.size());
  for (double x : w) {
    bool dup = false;
    for (double y : out) {
      if (std::abs(x - y) <= 1e-12 * (1.0 + std::abs(x))) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(x);
  }
  return out;
}

struct RefinePoint {
  double omega = 0.0;
  double sigma = -1.0;
};

// Ascent to a local maximizer of sigma(omega) given sigma and its derivative
// at each trial point: derivative-sign bisection with secant acceleration.
// Every trial costs one evaluation; the best value seen is returned.
RefinePoint refine_by_derivative(
    const std::function<std::pair<double, double>(double)>& sig_and_grad,
    double w0, double lo, double hi, int max_evals, double grad_stop_rel) {
  if (!(lo < hi)) {
    const double pad = 0.05 * (1.0 + std::abs(w0));
    lo = w0 - pad;
    hi = w0 + pad;
  }
  double a = lo;
  double b = hi;
  double x = std::clamp(w0, a, b);
  double x_prev = 0.0, d_prev = 0.0;
  bool have_prev = false;
  RefinePoint best;
  for (int it = 0; it < max_evals; ++it) {
    const auto [s, d] = sig_and_grad(x);
    if (s > best.sigma) {
      best.sigma = s;
      best.omega = x;
    }
    const double scale = std::max(best.sigma, 0.0);
    if (!std::isfinite(d) ||
        std::abs(d) <= grad_stop_rel * scale / (1.0 + std::abs(x)))
      break;
    if (d > 0.0)
      a = x;
    else
      b = x;
    if (b - a <= 1e-13 * (1.0 + std::abs(x))) break;
    double x_new = 0.5 * (a + b);
    if (have_prev && d != d_prev) {
      const double sec = x - d * (x - x_prev) / (d - d_prev);
      if (sec > a && sec < b) x_new = sec;
    }
    x_prev = x;
    d_prev = d;
    have_prev = true;
    x = x_new;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Level-set solver on a standard-form realization C (i w I - Ae)^{-1} Be.
// Shared by the dense overloads and the reduced-model path.  Real data gets
// real Hamiltonian eigenvalue problems and the fold to w >= 0.

template <typename MatType>
Eigen::VectorXcd eigenvalues_of(const MatType& Hm) {
  if constexpr (std::is_same_v<typename MatType::Scalar, double>) {
    Eigen::EigenSolver<Mat> es(Hm, /*computeEigenvectors=*/false);
    return es.eigenvalues();
  } else {
    Eigen::ComplexEigenSolver<CMat> es(Hm, /*computeEigenvectors=*/false);
    return es.eigenvalues();
  }
}

template <typename MatType>
NormResult linf_core(const MatType& Ae, const MatType& Be, const MatType& Ce,
                     const LinfOptions& opts) {
  constexpr bool real_data = std::is_same_v<typename MatType::Scalar, double>;
  const Index k = Ae.rows();
  NormResult out;

  const CMat Aec = Ae.template cast<Complex>();
  const CMat Bec = Be.template cast<Complex>();
  const CMat Cec = Ce.template cast<Complex>();

  // Axis poles make the norm infinite; their imaginary parts double as probe
  // frequencies, most weakly damped first.
  const Eigen::VectorXcd poles = eigenvalues_of(Ae);
  std::vector<Index> order(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(poles(a).real()) < std::abs(poles(b).real());
  });
  for (Index i = 0; i < k; ++i) {
    if (std::abs(poles(i).real()) <= kAxisPoleTol * (1.0 + std::abs(poles(i))))
      throw UnboundedModelError("pole on the imaginary axis", poles(i).imag());
  }

  std::vector<double> probe_freqs = opts.init_freqs;
  probe_freqs.push_back(0.0);
  const std::size_t pole_cap = 50;
  for (std::size_t i = 0; i < order.size() && i < pole_cap; ++i) {
    const double wi = poles(order[i]).imag();
    probe_freqs.push_back(real_data ? std::abs(wi) : wi);
  }
  if constexpr (real_data) {
    for (double& w : probe_freqs) w = std::abs(w);
  }
  probe_freqs = dedup_sorted(probe_freqs);

  Eigen::PartialPivLU<CMat> lu_ws(k);
  auto shifted_lu = [&](double w) -> Eigen::PartialPivLU<CMat>& {
    CMat S = -Aec;
    S.diagonal().array() += Complex(0.0, w);
    lu_ws.compute(S);
    return lu_ws;
  };
  auto sigma_at = [&](double w) -> double {
    const CMat F = Cec * shifted_lu(w).solve(Bec);
    const double s = F.jacobiSvd().singularValues()(0);
    out.probes.emplace_back(w, s);
    return s;
  };

  double best_sigma = -1.0;
  double best_w = 0.0;
  auto consider = [&](double w) {
    const double s = sigma_at(w);
    if (s > best_sigma) {
      best_sigma = s;
      best_w = w;
    }
  };
  for (double w : probe_freqs) consider(w);
  out.history.emplace_back(best_w, best_sigma);

  if (best_sigma <= 1e-200) {
    out.value = std::max(best_sigma, 0.0);
    out.converged = true;
    return out;
  }

  const double tol = std::max(opts.tol, 1e-14);
  int stalls = 0;
  for (int level = 0; level < opts.max_level_iter; ++level) {
    out.iterations = level + 1;
    const double gamma = best_sigma * (1.0 + tol);

    MatType Hm(2 * k, 2 * k);
    Hm << Ae, (Be * Be.adjoint()) / gamma, -(Ce.adjoint() * Ce) / gamma,
        -Ae.adjoint();
    const Eigen::VectorXcd ev = eigenvalues_of(Hm);

    std::vector<double> cands;
    for (Index i = 0; i < ev.size(); ++i) {
      if (std::abs(ev(i).real()) <= kImagClassTol * (1.0 + std::abs(ev(i)))) {
        const double w = ev(i).imag();
        cands.push_back(real_data ? std::abs(w) : w);
      }
    }
    if (cands.empty()) {
      out.converged = true;
      break;
    }
    cands = dedup_sorted(cands);

    const double before = best_sigma;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      consider(cands[i]);
      if (i + 1 < cands.size()) consider(0.5 * (cands[i] + cands[i + 1]));
    }
    out.history.emplace_back(best_w, best_sigma);
    if (best_sigma <= before * (1.0 + 1e-2 * tol)) {
      if (++stalls >= 2) {
        out.converged = true;
        break;
      }
    } else {
      stalls = 0;
    }
  }

  if (opts.refine_maximizer) {
    // Bracket from the neighboring probes of the incumbent.
    std::vector<double> ws;
    ws.reserve(out.probes.size());
    for (const auto& pr : out.probes) ws.push_back(pr.first);
    ws = dedup_sorted(ws);
    double lo = best_w - 0.05 * (1.0 + std::abs(best_w));
    double hi = best_w + 0.05 * (1.0 + std::abs(best_w));
    for (double w : ws) {
      if (w < best_w - 1e-14 * (1.0 + std::abs(best_w))) lo = std::max(lo, w);
      if (w > best_w + 1e-14 * (1.0 + std::abs(best_w))) {
        hi = std::min(hi, w);
        break;
      }
    }
    if constexpr (real_data) lo = std::max(lo, best_w > 0.0 ? 0.0 : lo);

    auto sig_and_grad = [&](double w) -> std::pair<double, double> {
      auto& lu = shifted_lu(w);
      const CMat F = Cec * lu.solve(Bec);
      Eigen::JacobiSVD<CMat> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const double s = svd.singularValues()(0);
      out.probes.emplace_back(w, s);
      const CVec u = svd.matrixV().col(0);
      const CVec v = svd.matrixU().col(0);
      const CVec x = lu.solve(Bec * u);
      const CVec y = lu.adjoint().solve(Cec.adjoint() * v);
      const double d = (y.adjoint() * x).value().imag();
      return {s, d};
    };
    const RefinePoint ref =
        refine_by_derivative(sig_and_grad, best_w, lo, hi, 40, 1e-12);
    if (ref.sigma > best_sigma) {
      best_sigma = ref.sigma;
      best_w = ref.omega;
    }
  }

  out.value = best_sigma;
  out.omega_signed = best_w;
  out.omega_star = std::abs(best_w);
  out.history.emplace_back(best_w, best_sigma);

  // Final sample at the maximizer.
  const CMat F = Cec * shifted_lu(best_w).solve(Bec);
  Eigen::JacobiSVD<CMat> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.sample.omega = best_w;
  out.sample.F = F;
  out.sample.sigma = svd.singularValues()(0);
  out.sample.v = svd.matrixU().col(0);
  out.sample.u = svd.matrixV().col(0);
  return out;
}

template <typename MatType>
void standard_form(const MatType& E, const MatType& A, const MatType& B,
                   MatType& Ae, MatType& Be) {
  Eigen::PartialPivLU<MatType> lu(E);
  const auto& U = lu.matrixLU();
  double umin = std::numeric_limits<double>::infinity();
  double umax = 0.0;
  for (Index i = 0; i < U.rows(); ++i) {
    const double d = std::abs(U(i, i));
    umin = std::min(umin, d);
    umax = std::max(umax, d);
  }
  if (!(umin > kEtCondTol * umax))
    throw UnboundedModelError("descriptor matrix numerically singular");
  Ae = lu.solve(A);
  Be = lu.solve(B);
}

}  // namespace

NormResult linf_dense(const CMat& E, const CMat& A, const CMat& B, const CMat& C,
                      const LinfOptions& opts) {
  CMat Ae, Be;
  standard_form(E, A, B, Ae, Be);
  return linf_core(Ae, Be, C, opts);
}

NormResult linf_dense(const Mat& E, const Mat& A, const Mat& B, const Mat& C,
                      const LinfOptions& opts) {
  Mat Ae, Be;
  standard_form(E, A, B, Ae, Be);
  return linf_core(Ae, Be, C, opts);
}

NormResult linf_dense(const ReducedParametricModel& rom, const Vec& g,
                      const LinfOptions& opts) {
  NormResult out = linf_dense(rom.Et, rom.A_of(g), rom.Bt, rom.Ct, opts);
  out.sample.g = g;
  return out;
}

std::pair<double, double> sigma_max_local_refine(const AffineClosedLoop& acl,
                                                 const Vec& g, double omega0,
                                                 double lo, double hi) {
  const auto& sys = acl.sys();
  const Index n = acl.n();
  auto sig_and_grad = [&](double w) -> std::pair<double, double> {
    ShiftedFactorization fac(acl, g, Complex(0.0, w));
    const FrequencyResponseSample s = fac.sample(g);
    const CVec x = fac.solve_right(s.u);
    const CVec y = fac.solve_left(s.v);
    const Complex q = (y.topRows(n).adjoint() * x.topRows(n)).value() +
                      (y.bottomRows(n).adjoint() *
                       (sys.M.cast<Complex>() * x.bottomRows(n)))
                          .value();
    return {s.sigma, q.imag()};
  };
  const RefinePoint ref =
      refine_by_derivative(sig_and_grad, omega0, lo, hi, 40, 1e-11);
  return {ref.omega, ref.sigma};
}

namespace {

double sigma_prime_at(const ShiftedFactorization& fac,
                      const FrequencyResponseSample& s,
                      const VibrationalSystem& sys) {
  const Index n = sys.M.rows();
  const CVec x = fac.solve_right(s.u);
  const CVec y = fac.solve_left(s.v);
  const Complex q = (y.topRows(n).adjoint() * x.topRows(n)).value() +
                    (y.bottomRows(n).adjoint() *
                     (sys.M.cast<Complex>() * x.bottomRows(n)))
                        .value();
  return q.imag();
}

}  // namespace

NormResult hinf_greedy(const AffineClosedLoop& acl, const Vec& g,
                       const std::vector<double>& init_freqs,
                       const GreedyOptions& opts, ProjectionBasisPair* scratch) {
  ProjectionBasisPair local;
  ProjectionBasisPair& bases = scratch ? *scratch : local;

  NormResult out;
  double best_sigma = -1.0;
  double best_w = 0.0;
  std::shared_ptr<ShiftedFactorization> best_fac;
  FrequencyResponseSample best_sample;
  std::vector<double> probed;

  auto already_probed = [&](double w) {
    for (double p : probed)
      if (std::abs(w - p) <= 1e-12 * (1.0 + std::abs(w))) return true;
    return false;
  };

  // Full-model evaluation at w; expands the working bases there.  Returns
  // false when the shifted pencil is too close to singular.
  bool last_probe_stagnated = false;
  auto full_probe = [&](double w) -> bool {
    try {
      auto fac = std::make_shared<ShiftedFactorization>(acl, g, Complex(0.0, w));
      const FrequencyResponseSample s = fac->sample(g);
      probed.push_back(w);
      out.probes.emplace_back(w, s.sigma);
      if (s.sigma > best_sigma) {
        best_sigma = s.sigma;
        best_w = w;
        best_fac = fac;
        best_sample = s;
      }
      last_probe_stagnated =
          expand_from_factorization(bases, acl, *fac, s, opts.mode).stagnated;
      return true;
    } catch (const PoleProximityError&) {
      probed.push_back(w);
      return false;
    }
  };

  const std::vector<double> freqs = dedup_keep_order(init_freqs);
  if (freqs.empty()) throw ValidationError("hinf_greedy: no initial frequencies");

  if (opts.screen_top > 0 &&
      static_cast<int>(freqs.size()) > opts.screen_top) {
    // Only the most promising candidates cost full factorizations.  With
    // inherited bases the reduced model ranks them; cold, the leading
    // candidates bootstrap the bases first and the rest are ranked on that
    // surrogate.
    std::size_t next = 0;
    if (bases.dim() == 0) {
      while (next < freqs.size() &&
             static_cast<int>(next) < opts.screen_top)
        full_probe(freqs[next++]);
    }
    if (bases.dim() > 0) {
      const ReducedParametricModel rom = reduce(acl, bases);
      std::vector<std::pair<double, double>> ranked;
      ranked.reserve(freqs.size() - next);
      for (std::size_t i = next; i < freqs.size(); ++i)
        ranked.emplace_back(eval_reduced_sigma_max(rom, g, freqs[i]), freqs[i]);
      std::sort(ranked.begin(), ranked.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
      const int top = std::min<int>(opts.screen_top, static_cast<int>(ranked.size()));
      for (int i = 0; i < top; ++i) full_probe(ranked[static_cast<std::size_t>(i)].second);
    } else {
      // Every bootstrap probe sat on a pole; nothing to rank on.
      for (std::size_t i = next; i < freqs.size(); ++i) full_probe(freqs[i]);
    }
  } else {
    for (double w : freqs) full_probe(w);
  }
  if (best_sigma < 0.0)
    throw ValidationError("hinf_greedy: every initial probe hit a pole");
  out.history.emplace_back(std::abs(best_w), best_sigma);

  double prev = best_sigma;
  int failures = 0;
  bool converged = false;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    out.iterations = iter;
    NormResult rn;
    try {
      LinfOptions lopts;
      lopts.tol = opts.dense_tol;
      lopts.init_freqs = probed;
      const ReducedParametricModel rom = reduce(acl, bases);
      rn = linf_dense(rom, g, lopts);
    } catch (const UnboundedModelError& e) {
      if (++failures > 3) throw;
      const double wp = std::isfinite(e.omega_hint)
                            ? e.omega_hint
                            : best_w * (1.0 + 1e-3) + 1e-3;
      full_probe(already_probed(wp) ? wp * (1.0 + 1e-3) + 1e-3 : wp);
      continue;
    }

    // Surrogate maximizers may sit at negative frequencies; interpolating at
    // the signed point pins the surrogate exactly where it peaked while the
    // full value is even in omega.
    const double w_cand = rn.omega_signed;
    if (already_probed(w_cand)) {
      converged = true;
      break;
    }
    if (!full_probe(w_cand)) {
      if (++failures > 3) break;
      continue;
    }
    out.history.emplace_back(std::abs(best_w), best_sigma);
    if (std::abs(best_sigma - prev) <= opts.tol * best_sigma) {
      converged = true;
      break;
    }
    if (last_probe_stagnated) {
      converged = true;
      break;
    }
    prev = best_sigma;
  }

  if (opts.polish && best_fac) {
    // Every probe left both value and slope in the working bases, so the
    // surrogate argmax is a Newton-quality update for the maximizer.  Each
    // round either lands on an already probed point or spends one
    // factorization that also sharpens the surrogate.
    for (int round = 0; round < 3; ++round) {
      const double d0 = sigma_prime_at(*best_fac, best_sample, acl.sys());
      if (std::abs(d0) <= 1e-9 * best_sigma / (1.0 + std::abs(best_w))) break;
      NormResult rn;
      try {
        LinfOptions lopts;
        lopts.tol = opts.dense_tol;
        lopts.init_freqs = probed;
        const ReducedParametricModel rom = reduce(acl, bases);
        rn = linf_dense(rom, g, lopts);
      } catch (const UnboundedModelError&) {
        break;
      }
      if (already_probed(rn.omega_signed) || !full_probe(rn.omega_signed))
        break;
    }
  }

  // Realign at positive frequency before handing the factorization out; the
  // value is even in omega for real data, so only the sample moves.
  if (best_w < 0.0) {
    try {
      const double wp = -best_w;
      auto fac = std::make_shared<ShiftedFactorization>(acl, g, Complex(0.0, wp));
      const FrequencyResponseSample s = fac->sample(g);
      out.probes.emplace_back(wp, s.sigma);
      best_sigma = std::max(best_sigma, s.sigma);
      best_w = wp;
      best_fac = fac;
      best_sample = s;
    } catch (const PoleProximityError&) {
      best_w = -best_w;
    }
  }

  out.value = best_sigma;
  out.omega_star = std::abs(best_w);
  out.omega_signed = best_w;
  out.sample = best_sample;
  out.final_fac = best_fac;
  out.converged = converged;
  out.history.emplace_back(out.omega_star, best_sigma);
  return out;
}

}  // namespace dampopt
