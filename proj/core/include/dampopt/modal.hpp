#pragma once

#include <vector>

#include "dampopt/model.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// Undamped modal data for the pencil (K, M):  K phi = omega^2 M phi,
// Phi^T M Phi = I, Omega sorted in decreasing order.
struct ModalData {
  Mat Phi;    // n x n, columns are M-orthonormal mode shapes
  Vec Omega;  // n, decreasing
};

ModalData modal_transform(const Mat& M, const Mat& K);

// Critical damping of the undamped structure:
//   C_crit = 2 M Phi diag(Omega) Phi^T M.
// Internal damping in the benchmark family is alpha_c * C_crit.
Mat critical_damping(const Mat& M, const Mat& K);
Mat critical_damping(const Mat& M, const ModalData& modal);

// Residue weight of each undamped mode in the transfer function:
//   r_i = |H1 phi_i| |E2^T phi_i| / (2 omega_i).
Vec undamped_residue_norms(const VibrationalSystem& sys, const ModalData& modal);

// First-order estimate of the damped pole real part of mode i at gain g:
//   rho_i(g) = phi_i^T C(g) phi_i / 2, floored away from zero.
Vec real_part_estimates(const AffineClosedLoop& acl, const ModalData& modal,
                        const Vec& g);

struct DominanceEntry {
  Index mode = 0;       // index into ModalData columns
  double omega = 0.0;   // undamped frequency
  double residue = 0.0;
  double re_estimate = 0.0;
  double dominance = 0.0;  // residue / re_estimate
};

using DominanceTable = std::vector<DominanceEntry>;  // sorted by dominance, decreasing

struct InitialFrequencies {
  std::vector<double> omega;      // candidate peak frequencies, most dominant first
  bool unbounded_dominance = false;  // some selected mode is effectively undamped at g
};

// Precomputed modal quantities so per-gain dominance ranking costs O(n p).
class DominanceModel {
 public:
  DominanceModel(const AffineClosedLoop& acl, const ModalData& modal);

  const ModalData& modal() const { return modal_; }
  DominanceTable table(const Vec& g) const;
  InitialFrequencies initial_frequencies(const Vec& g, Index count) const;

 private:
  ModalData modal_;
  Vec residues_;
  Vec cint_quad_;  // phi_i^T C_int phi_i
  Mat phi_t_b2_;   // n x p
};

DominanceTable dominance_table(const AffineClosedLoop& acl, const ModalData& modal,
                               const Vec& g);

// The count most dominant modal frequencies at gain g, for seeding frequency
// searches.  Dominance floors at 1e-30 on the real-part estimate; when a
// selected mode sits at the floor the flag is set (pole nearly on the axis).
InitialFrequencies initial_frequencies(const AffineClosedLoop& acl,
                                       const ModalData& modal, const Vec& g,
                                       Index count);

}  // namespace dampopt
