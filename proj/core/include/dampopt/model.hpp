#pragma once

#include <vector>

#include <Eigen/LU>

#include "dampopt/types.hpp"

namespace dampopt {

// Second-order model  M q'' + (C_int + B2 diag(g) B2^T) q' + K q = E2 w,
// observed through  z = H1 q.  M, K symmetric positive definite; C_int
// symmetric positive semidefinite; columns of B2 are damper geometry vectors.
struct VibrationalSystem {
  Mat M;
  Mat K;
  Mat C_int;
  Mat B2;  // n x p, one column per damper
  Mat E2;  // n x m, disturbance input map
  Mat H1;  // l x n, performance output map

  Index n() const { return M.rows(); }
  Index p() const { return B2.cols(); }
  Index m() const { return E2.cols(); }
  Index l() const { return H1.rows(); }
};

// Shape and symmetry checks plus a positive-definiteness probe on M and K.
// Throws ValidationError with the offending matrix named.
void validate(const VibrationalSystem& sys);

// Closed-loop descriptor realization with affine parameter dependence:
//   E = blkdiag(I, M),  A(g) = A0 - sum_j g_j l_j l_j^T,
//   A0 = [0 I; -K -C_int],  l_j = [0; b_j],
//   B = [0; E2],  C = [H1 0].
// The 2n-by-2n blocks are never formed here; solves go through the n-by-n
// second-order factorization below.
class AffineClosedLoop {
 public:
  explicit AffineClosedLoop(VibrationalSystem sys);

  const VibrationalSystem& sys() const { return sys_; }
  Index n() const { return sys_.n(); }
  Index p() const { return sys_.p(); }
  Index m() const { return sys_.m(); }
  Index l() const { return sys_.l(); }

  // C(g) = C_int + B2 diag(g) B2^T
  Mat damping_matrix(const Vec& g) const;

  // Dense first-order blocks, for the L-inf sweep and for tests.
  Mat first_order_E() const;
  Mat first_order_A(const Vec& g) const;
  Mat first_order_B() const;
  Mat first_order_C() const;

 private:
  VibrationalSystem sys_;
};

AffineClosedLoop assemble_closed_loop(VibrationalSystem sys);

// One maximizer sample: value, frequency, and the top singular pair of F.
struct FrequencyResponseSample {
  Vec g;
  double omega = 0.0;
  CMat F;
  double sigma = 0.0;
  CVec u;  // right singular vector, F u = sigma v
  CVec v;  // left singular vector
};

// LU of the shifted second-order matrix S(g,s) = s^2 M + s C(g) + K at one
// complex shift.  One factorization serves both the transfer evaluation and
// the adjoint (left) solves: S is complex symmetric, so D(g,s)^-H applied to
// [H1 0]^H reduces to a conjugated solve with the same factors.
class ShiftedFactorization {
 public:
  ShiftedFactorization(const AffineClosedLoop& acl, const Vec& g, Complex s);

  Complex shift() const { return s_; }

  // X = S^-1 E2, cached after the first request.
  const CMat& X() const;

  // F(g,s) = H1 X
  CMat transfer() const;

  // First-order right solves: columns of D(g,s)^-1 [0; E2] dirs.
  // Returns a 2n-by-k matrix [Xd; s Xd] with Xd = X dirs.
  CMat solve_right(const CMat& dirs) const;

  // First-order adjoint solves: columns of D(g,s)^-H [H1 0]^H dirs.
  // Top block (s conj M + C(g)) y2, bottom block y2 = conj(S^-1 conj(H1^T dirs)).
  CMat solve_left(const CMat& dirs) const;

  // Evaluate F, its largest singular value, and the top singular pair.
  FrequencyResponseSample sample(const Vec& g_tag) const;

 private:
  const AffineClosedLoop* acl_;
  Vec g_;
  Complex s_;
  Mat damping_;  // C(g), kept for the adjoint top block
  Eigen::PartialPivLU<CMat> lu_;
  mutable CMat x_;
  mutable bool have_x_ = false;
};

// Convenience wrappers around a one-shot factorization at s = i omega.
CMat eval_transfer(const AffineClosedLoop& acl, const Vec& g, double omega);
double eval_sigma_max(const AffineClosedLoop& acl, const Vec& g, double omega);
FrequencyResponseSample eval_sample(const AffineClosedLoop& acl, const Vec& g,
                                    double omega);

}  // namespace dampopt
