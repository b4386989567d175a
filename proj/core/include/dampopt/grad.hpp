#pragma once

#include <limits>

#include "dampopt/linf.hpp"
#include "dampopt/model.hpp"
#include "dampopt/rom.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// Everything needed to evaluate the gain gradient of sigma_max(F(g, i w)) at
// a fixed frequency: the singular triple at the evaluation point plus the two
// pencil solves along it.
struct GradientContext {
  FrequencyResponseSample sample;
  CVec x;  // D(g, i w)^{-1} B u
  CVec y;  // D(g, i w)^{-H} C^H v
  double singular_gap = std::numeric_limits<double>::infinity();
};

GradientContext make_gradient_context(const AffineClosedLoop& acl, const Vec& g,
                                      double omega);
GradientContext make_gradient_context(const AffineClosedLoop& acl,
                                      const ShiftedFactorization& fac,
                                      const FrequencyResponseSample& sample);

// Gradient of sigma_max with respect to the gains at the context's frequency.
// At the H-infinity maximizer with a unique peak and a simple top singular
// value this is the gradient of the norm itself; component j costs only two
// inner products against the damper rows.  strict=true raises
// NonsmoothPointError when the singular gap is degenerate (coalescing top
// singular values); strict=false returns the active-branch gradient.
Vec hinf_gradient(const AffineClosedLoop& acl, const GradientContext& ctx,
                  bool strict = true);

// Same formula on a reduced parametric model, using its own low-order solves.
Vec reduced_hinf_gradient(const ReducedParametricModel& rom, const Vec& g,
                          const FrequencyResponseSample& reduced_sample);

struct SmoothnessReport {
  double singular_gap = std::numeric_limits<double>::infinity();
  double singular_gap_rel = std::numeric_limits<double>::infinity();
  double second_peak_gap = std::numeric_limits<double>::infinity();
  double second_peak_gap_rel = std::numeric_limits<double>::infinity();
  bool nonsmooth = false;
};

// Classify how trustworthy a norm gradient is at the maximizer of nr: the gap
// between the two largest singular values there, and the margin over the best
// competing frequency peak seen during the norm computation.
SmoothnessReport smoothness_diagnostics(const AffineClosedLoop& acl, const Vec& g,
                                        const NormResult& nr);

}  // namespace dampopt
