#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "gridsleuth/errors.hpp"

namespace gridsleuth::numerics {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Throws InvalidArgumentError if M contains NaN or Inf entries.
void ensure_finite(const ComplexMatrix& M, const char* context);

// Column-pivoted Householder QR:  M * P = Q * R with column p of M * P being
// M.col(perm[p]).  |R(i,i)| is non-increasing, which is what rank detection
// relies on.
struct PivotedQR {
  ComplexMatrix Q;             // m x m unitary
  ComplexMatrix R;             // m x n upper triangular
  Eigen::VectorXi perm;        // n entries, source column per pivot position
  Eigen::VectorXd diag_magnitudes;  // |R(i,i)| for i < min(m, n)

  // Number of leading pivots with |R(i,i)| >= tau * |R(0,0)|.
  int rank(double tau) const;
};

PivotedQR qr_pivoted(const ComplexMatrix& M);

// Moore-Penrose pseudo-inverse via SVD.  Singular values <= rcond * s_max are
// treated as zero.
ComplexMatrix pinv(const ComplexMatrix& M, double rcond = 1e-12);

// Minimum-norm least-squares solution of A * X = B (column-wise).
ComplexMatrix lstsq(const ComplexMatrix& A, const ComplexMatrix& B);

// min sum_i |x_i|  subject to  A x = b          (epsilon == 0)
//                          or  ||W(A x - b)|| <= epsilon  (epsilon > 0,
//                              measured after row whitening, see docs)
//
// symmetry_map lists pairs of entries of x that must carry the same value;
// they are solved as one shared unknown, so the pairing holds exactly in the
// returned vector.  Rows of A that are linearly dependent on the others are
// detected and dropped; if their right-hand sides disagree the problem is
// reported infeasible.
struct BasisPursuitProblem {
  ComplexMatrix A;
  ComplexVector b;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> symmetry_map;
  double tolerance = 1e-8;  // absolute and relative ADMM stopping tolerance
  int max_iters = 50000;
  double rho = 1.0;         // initial ADMM penalty
  double epsilon = 0.0;     // residual ball radius; 0 keeps the equality form
  ComplexVector warm_start;  // optional initial iterate (may be empty)
};

struct BasisPursuitInfo {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double constraint_violation = 0.0;  // ||A x - b||_inf over all rows
  double objective = 0.0;             // sum of moduli of the returned vector
  bool polished = false;
};

// Non-convergence carries the last iterate so callers can inspect it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, ComplexVector last_iterate,
                   double primal_residual, double dual_residual)
      : Error(what),
        last_iterate_(std::move(last_iterate)),
        primal_residual_(primal_residual),
        dual_residual_(dual_residual) {}
  const ComplexVector& last_iterate() const { return last_iterate_; }
  double primal_residual() const { return primal_residual_; }
  double dual_residual() const { return dual_residual_; }

 private:
  ComplexVector last_iterate_;
  double primal_residual_;
  double dual_residual_;
};

ComplexVector basis_pursuit(const BasisPursuitProblem& problem,
                            BasisPursuitInfo* info = nullptr);

// Per-element relative error of Yest against Ytrue.  Entries whose true
// magnitude is below floor_rel * max|Ytrue| are measured against that floor
// instead, so structural zeros cannot divide by zero but solver dust on them
// is still bounded.
double max_relative_error(const ComplexMatrix& Ytrue, const ComplexMatrix& Yest,
                          double floor_rel = 1e-3);

}  // namespace gridsleuth::numerics
