#pragma once

#include <string>
#include <vector>

#include "gridsleuth/numerics.hpp"

namespace gridsleuth::ident {

using numerics::Complex;
using numerics::ComplexMatrix;
using numerics::ComplexVector;

// Pivot threshold used to split a voltage window's rows into an independent
// basis and the rows they explain.
inline constexpr double kDefaultRankTolerance = 1e-6;

// Row indices of a phasor window, split by linear dependence. Both lists are
// sorted ascending and together cover 0..D-1.
struct RowPartition {
  std::vector<int> dependent;
  std::vector<int> independent;

  int dimension() const {
    return static_cast<int>(dependent.size() + independent.size());
  }
  int rank() const { return static_cast<int>(independent.size()); }
};

// Picks a maximal independent set of voltage rows by column-pivoted QR of
// V^T; a row joins the basis while its pivot stays above tau * |R(0,0)|.
RowPartition select_basis(const ComplexMatrix& V,
                          double tau = kDefaultRankTolerance);

struct IdentDiagnostics {
  double dependency_residual = 0.0;   // max |V_dep - X V_ind| over the window
  double fit_residual = 0.0;          // max |I - Y V| of the returned model
  double constraint_violation = 0.0;  // coupling equation gap, infinity norm
  double objective = 0.0;             // recovery l1 objective; 0 at full rank
  int recovery_iterations = 0;
};

// Admittance blocks in the partition's row order: block 1 is the dependent
// rows, block 2 the independent ones. At full rank block 1 is empty and Y22
// holds the whole matrix.
struct IdentifiedModel {
  RowPartition partition;
  double tau = kDefaultRankTolerance;
  ComplexMatrix X;   // dependent voltage rows = X * independent rows
  ComplexMatrix YX;  // current rows mapped through the basis pseudo-inverse
  ComplexMatrix Y11;
  ComplexMatrix Y12;
  ComplexMatrix Y22;
  IdentDiagnostics diagnostics;
};

// Recovers a complex symmetric admittance matrix from a phasor window with
// I = Y V. Full-row-rank windows are solved directly by least squares; rank
// deficient ones pin the blocks the data determines and complete the rest
// with the sparsest symmetric choice. Throws InsufficientDataError when the
// window has as many independent rows as slots, so the detected rank is
// limited by the sample count rather than the network.
IdentifiedModel identify(const ComplexMatrix& V, const ComplexMatrix& I,
                         double tau = kDefaultRankTolerance);

// Reassembles the full D x D matrix in the window's original row order.
ComplexMatrix reconstruct_full(const IdentifiedModel& m);

std::string model_to_json(const IdentifiedModel& m);
IdentifiedModel model_from_json(const std::string& text);

}  // namespace gridsleuth::ident
