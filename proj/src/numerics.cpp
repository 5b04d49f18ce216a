#include "gridsleuth/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridsleuth::numerics {

void ensure_finite(const ComplexMatrix& M, const char* context) {
  if (!M.allFinite()) {
    throw InvalidArgumentError(std::string(context) +
                               ": matrix has non-finite entries");
  }
}

int PivotedQR::rank(double tau) const {
  if (tau <= 0.0) throw InvalidArgumentError("rank: tau must be positive");
  if (diag_magnitudes.size() == 0 || diag_magnitudes(0) == 0.0) return 0;
  const double cut = tau * diag_magnitudes(0);
  int r = 0;
  while (r < diag_magnitudes.size() && diag_magnitudes(r) >= cut) ++r;
  return r;
}

PivotedQR qr_pivoted(const ComplexMatrix& M) {
  if (M.rows() == 0 || M.cols() == 0)
    throw InvalidArgumentError("qr_pivoted: empty matrix");
  ensure_finite(M, "qr_pivoted");

  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(M);
  PivotedQR out;
  out.Q = qr.householderQ();
  out.R = qr.matrixQR().template triangularView<Eigen::Upper>();
  out.perm = qr.colsPermutation().indices();
  const Eigen::Index k = std::min(M.rows(), M.cols());
  out.diag_magnitudes = out.R.diagonal().head(k).cwiseAbs();
  return out;
}

ComplexMatrix pinv(const ComplexMatrix& M, double rcond) {
  if (M.rows() == 0 || M.cols() == 0)
    throw InvalidArgumentError("pinv: empty matrix");
  if (!(rcond > 0.0) || rcond >= 1.0)
    throw InvalidArgumentError("pinv: rcond must lie in (0, 1)");
  ensure_finite(M, "pinv");

  Eigen::JacobiSVD<ComplexMatrix> svd(M,
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cut = s.size() > 0 ? rcond * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

ComplexMatrix lstsq(const ComplexMatrix& A, const ComplexMatrix& B) {
  if (A.rows() != B.rows())
    throw InvalidArgumentError("lstsq: row counts of A and B differ");
  if (A.rows() == 0 || A.cols() == 0)
    throw InvalidArgumentError("lstsq: empty system");
  ensure_finite(A, "lstsq");
  ensure_finite(B, "lstsq");
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(A);
  return cod.solve(B);  // minimum-norm least-squares solution
}

namespace {

// Shared-variable reduction induced by the symmetry map: every pair collapses
// to one unknown whose column is the sum of the member columns and whose
// weight in the l1 objective is the member count.
struct Fold {
  std::vector<Eigen::Index> rep;                // full index -> reduced index
  std::vector<std::vector<Eigen::Index>> members;  // reduced -> full indices
  Eigen::VectorXd weight;                       // reduced -> multiplicity
};

Fold build_fold(Eigen::Index n,
                const std::vector<std::pair<Eigen::Index, Eigen::Index>>& map) {
  std::vector<Eigen::Index> partner(n, -1);
  for (const auto& [i, j] : map) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw InvalidArgumentError("basis_pursuit: symmetry index out of range");
    if (i == j)
      throw InvalidArgumentError("basis_pursuit: symmetry pair maps an index to itself");
    if (partner[i] != -1 || partner[j] != -1)
      throw InvalidArgumentError("basis_pursuit: symmetry pairs must be disjoint");
    partner[i] = j;
    partner[j] = i;
  }
  Fold f;
  f.rep.assign(n, -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (f.rep[i] != -1) continue;
    const Eigen::Index r = static_cast<Eigen::Index>(f.members.size());
    f.rep[i] = r;
    std::vector<Eigen::Index> group{i};
    if (partner[i] != -1 && partner[i] > i) {
      f.rep[partner[i]] = r;
      group.push_back(partner[i]);
    }
    f.members.push_back(std::move(group));
  }
  f.weight.resize(static_cast<Eigen::Index>(f.members.size()));
  for (size_t r = 0; r < f.members.size(); ++r)
    f.weight(static_cast<Eigen::Index>(r)) =
        static_cast<double>(f.members[r].size());
  return f;
}

inline Complex shrink(Complex v, double kappa) {
  const double m = std::abs(v);
  if (m <= kappa) return Complex(0.0, 0.0);
  return v * ((m - kappa) / m);
}

}  // namespace

ComplexVector basis_pursuit(const BasisPursuitProblem& problem,
                            BasisPursuitInfo* info) {
  const ComplexMatrix& A = problem.A;
  const ComplexVector& b = problem.b;
  if (A.rows() == 0 || A.cols() == 0)
    throw InvalidArgumentError("basis_pursuit: empty system");
  if (A.rows() != b.size())
    throw InvalidArgumentError("basis_pursuit: A and b dimensions disagree");
  if (!(problem.tolerance > 0.0))
    throw InvalidArgumentError("basis_pursuit: tolerance must be positive");
  if (problem.max_iters <= 0)
    throw InvalidArgumentError("basis_pursuit: max_iters must be positive");
  if (problem.epsilon < 0.0)
    throw InvalidArgumentError("basis_pursuit: epsilon must be non-negative");
  if (!(problem.rho > 0.0))
    throw InvalidArgumentError("basis_pursuit: rho must be positive");
  ensure_finite(A, "basis_pursuit");
  ensure_finite(b, "basis_pursuit");

  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  const Fold fold = build_fold(n, problem.symmetry_map);
  const Eigen::Index nr = static_cast<Eigen::Index>(fold.members.size());

  ComplexMatrix Ared(m, nr);
  Ared.setZero();
  for (Eigen::Index r = 0; r < nr; ++r)
    for (Eigen::Index i : fold.members[static_cast<size_t>(r)])
      Ared.col(r) += A.col(i);

  auto unfold = [&](const ComplexVector& xr) {
    ComplexVector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = xr(fold.rep[i]);
    return x;
  };
  auto finish = [&](const ComplexVector& xr, int iters, double prim,
                    double dual, bool polished) {
    ComplexVector x = unfold(xr);
    if (info) {
      info->iterations = iters;
      info->primal_residual = prim;
      info->dual_residual = dual;
      info->constraint_violation = (A * x - b).cwiseAbs().maxCoeff();
      info->objective = x.cwiseAbs().sum();
      info->polished = polished;
    }
    return x;
  };

  const double bscale = b.cwiseAbs().maxCoeff();
  const double ftol = std::max(100.0 * problem.tolerance, 1e-8) *
                      std::max(1.0, bscale);

  // Select a maximal independent row set with a pivoted QR of Ared^H; the
  // same factorization whitens the kept rows (kept^H = Qthin * Rtop, so
  // Qthin^H has orthonormal rows).
  Eigen::ColPivHouseholderQR<ComplexMatrix> rqr(Ared.adjoint());
  const Eigen::MatrixXcd packed = rqr.matrixQR();
  const Eigen::Index kmax = std::min(nr, m);
  const double top = std::abs(packed(0, 0));
  if (top == 0.0) {
    // A is the zero matrix: feasible only for (near-)zero right-hand sides.
    if (bscale > ftol)
      throw InfeasibleError("basis_pursuit: zero matrix with nonzero rhs");
    return finish(ComplexVector::Zero(nr), 0, 0.0, 0.0, false);
  }
  Eigen::Index rk = 0;
  while (rk < kmax && std::abs(packed(rk, rk)) >= 1e-12 * top) ++rk;

  const Eigen::VectorXi rowperm = rqr.colsPermutation().indices();
  ComplexVector bk(rk);
  for (Eigen::Index j = 0; j < rk; ++j) bk(j) = b(rowperm(j));

  ComplexMatrix Qthin = rqr.householderQ() * ComplexMatrix::Identity(nr, rk);
  ComplexMatrix Rtop = packed.topLeftCorner(rk, rk)
                           .template triangularView<Eigen::Upper>();
  // Whitened system: At x = bt with At At^H = I.
  ComplexMatrix At = Qthin.adjoint();
  ComplexVector bt = Rtop.adjoint()
                         .template triangularView<Eigen::Lower>()
                         .solve(bk);

  // Any exact solution of the kept rows fixes the dropped rows too, so one
  // feasibility check on the least-norm solution settles consistency. With a
  // residual ball the dropped rows may sit anywhere inside it; the ball
  // itself is then enforced on the independent rows only.
  if (rk < m) {
    ComplexVector xln = unfold(At.adjoint() * bt);
    ComplexVector gap = A * xln - b;
    for (Eigen::Index i = rk; i < m; ++i) {
      if (std::abs(gap(rowperm(i))) > ftol + problem.epsilon)
        throw InfeasibleError(
            "basis_pursuit: dependent rows have inconsistent right-hand sides");
    }
  }

  const double beta = std::max(bt.cwiseAbs().maxCoeff(), 1e-300);
  const ComplexVector bs = bt / beta;
  const double eps_ball = problem.epsilon / beta;
  const bool zero_feasible = problem.epsilon > 0.0
                                 ? b.norm() <= problem.epsilon
                                 : bs.norm() == 0.0;
  if (zero_feasible)
    return finish(ComplexVector::Zero(nr), 0, 0.0, 0.0, false);

  // The ball constrains the residual of the original rows, which reads
  // ||R^H (At x - bs)|| through the whitening; project onto that ellipsoid
  // in the eigenbasis of R R^H.
  Eigen::VectorXd ball_sig2;
  ComplexMatrix ball_basis;
  if (eps_ball > 0.0) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> ges(Rtop * Rtop.adjoint());
    if (ges.info() != Eigen::Success)
      throw SolverError("basis_pursuit: residual ball factorization failed");
    ball_sig2 = ges.eigenvalues().cwiseMax(0.0);
    ball_basis = ges.eigenvectors();
  }
  auto clip_to_ball = [&](ComplexVector& s) {
    ComplexVector y = ball_basis.adjoint() * s;
    const Eigen::ArrayXd w2 = y.cwiseAbs2().array() * ball_sig2.array();
    const double eb2 = eps_ball * eps_ball;
    if (w2.sum() <= eb2) {
      s.setZero();
      return;
    }
    double lam = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Eigen::ArrayXd den = 1.0 + lam * ball_sig2.array();
      const double phi = (w2 / den.square()).sum() - eb2;
      if (phi <= eb2 * 1e-12) break;
      const double dphi =
          -2.0 * ((w2 * ball_sig2.array()) / den.cube()).sum();
      lam -= phi / dphi;
    }
    const Eigen::ArrayXd den = 1.0 + lam * ball_sig2.array();
    for (Eigen::Index r = 0; r < y.size(); ++r) y(r) /= den(r);
    s -= ball_basis * y;  // leave only the part outside the ellipsoid
  };

  double rho = problem.rho;
  ComplexVector z = ComplexVector::Zero(nr);
  ComplexVector u = ComplexVector::Zero(nr);
  if (problem.warm_start.size() != 0) {
    if (problem.warm_start.size() != n)
      throw InvalidArgumentError("basis_pursuit: warm start has wrong length");
    for (Eigen::Index i = 0; i < n; ++i)
      z(fold.rep[i]) = problem.warm_start(i) / beta;
  }

  const double tol = problem.tolerance;
  const double sqrtn = std::sqrt(static_cast<double>(nr));
  ComplexVector x(nr), zprev(nr), resid(rk);
  double prim = 0.0, dual = 0.0;
  bool converged = false;
  int it = 0;
  for (; it < problem.max_iters; ++it) {
    x = z - u;
    resid.noalias() = At * x;
    resid -= bs;
    if (eps_ball > 0.0) clip_to_ball(resid);
    x.noalias() -= At.adjoint() * resid;

    zprev = z;
    for (Eigen::Index r = 0; r < nr; ++r)
      z(r) = shrink(x(r) + u(r), fold.weight(r) / rho);
    u += x - z;

    prim = (x - z).norm();
    dual = rho * (z - zprev).norm();
    const double eps_pri = sqrtn * tol + tol * std::max(x.norm(), z.norm());
    const double eps_dua = sqrtn * tol + tol * (rho * u.norm());
    if (prim <= eps_pri && dual <= eps_dua) {
      converged = true;
      ++it;
      break;
    }
    if ((it + 1) % 10 == 0) {  // residual balancing, kept deterministic
      if (prim > 10.0 * dual && rho < 1e6 * problem.rho) {
        rho *= 2.0;
        u *= 0.5;
      } else if (dual > 10.0 * prim && rho > 1e-4 * problem.rho) {
        rho *= 0.5;
        u *= 2.0;
      }
    }
  }
  if (!converged) {
    throw ConvergenceError("basis_pursuit: ADMM did not converge in " +
                               std::to_string(problem.max_iters) + " iterations",
                           unfold(x * beta), prim, dual);
  }

  ComplexVector best = x;
  double best_obj = (fold.weight.array() * x.cwiseAbs().array()).sum();
  bool polished = false;
  if (eps_ball == 0.0) {
    // Refit on the support suggested by z; adopt only a feasible improvement.
    std::vector<Eigen::Index> sup;
    const double zmax = z.cwiseAbs().maxCoeff();
    const double cut = std::max(1e-10, 1e-7 * zmax);
    for (Eigen::Index r = 0; r < nr; ++r)
      if (std::abs(z(r)) > cut) sup.push_back(r);
    if (!sup.empty() && static_cast<Eigen::Index>(sup.size()) <= rk) {
      ComplexMatrix As(rk, static_cast<Eigen::Index>(sup.size()));
      for (size_t j = 0; j < sup.size(); ++j) As.col(j) = At.col(sup[j]);
      Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(As);
      ComplexVector xs = cod.solve(bs);
      if ((As * xs - bs).cwiseAbs().maxCoeff() <= 1e-10) {
        ComplexVector cand = ComplexVector::Zero(nr);
        double obj = 0.0;
        for (size_t j = 0; j < sup.size(); ++j) {
          cand(sup[j]) = xs(j);
          obj += fold.weight(sup[j]) * std::abs(xs(j));
        }
        if (obj <= best_obj * (1.0 + 1e-12)) {
          best = cand;
          best_obj = obj;
          polished = true;
        }
      }
    }
  }

  return finish(best * beta, it, prim, dual, polished);
}

double max_relative_error(const ComplexMatrix& Ytrue, const ComplexMatrix& Yest,
                          double floor_rel) {
  if (Ytrue.rows() != Yest.rows() || Ytrue.cols() != Yest.cols())
    throw InvalidArgumentError("max_relative_error: shape mismatch");
  if (Ytrue.size() == 0) return 0.0;
  const double amax = Ytrue.cwiseAbs().maxCoeff();
  if (amax == 0.0) return Yest.cwiseAbs().maxCoeff();
  const double floor = floor_rel * amax;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < Ytrue.cols(); ++j) {
    for (Eigen::Index i = 0; i < Ytrue.rows(); ++i) {
      const double denom = std::max(std::abs(Ytrue(i, j)), floor);
      worst = std::max(worst, std::abs(Yest(i, j) - Ytrue(i, j)) / denom);
    }
  }
  return worst;
}

}  // namespace gridsleuth::numerics
