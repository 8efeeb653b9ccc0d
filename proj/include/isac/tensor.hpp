#pragma once

#include "isac/types.hpp"

#include <utility>
#include <vector>

namespace isac {

/// out[i,j,k] = sum_m Z[m,i,j] * D[m,k].
/// Contracts the leading axis of Z against the rows of D; no implicit
/// conjugation (pass the conjugated dictionary where required).
Tensor3c contract_first(const Tensor3c& z, const CMat& d);

/// Same contraction into a reusable output buffer with a pre-staged
/// row-major dictionary; the hot path of the detection loops.
void contract_first_into(const Tensor3c& z, const CMatRM& d, Tensor3c& out);

/// out[m,i,j] = a[m] * b[i] * c[j].
Tensor3c outer3(const CVec& a, const CVec& b, const CVec& c);

struct LstsqResult {
  CVec x;
  bool rank_deficient = false;
};

/// argmin_x ||b - A x|| via regularized normal equations
/// (A^H A + eps I)^-1 A^H b with eps = 1e-12 * trace(A^H A) / m.
/// Near-duplicate columns still yield a finite solution; the flag
/// reports ill conditioning.
LstsqResult lstsq(const CMat& a, const CVec& b);

struct EigResult {
  RVec eigenvalues;   // descending
  CMat eigenvectors;  // columns, orthonormal, matching order
};

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
/// Throws if M deviates from Hermitian by more than 1e-9 * ||M||.
EigResult hermitian_eig(const CMat& m);

/// Entrywise |T|.
Tensor3r magnitude(const Tensor3c& t);

/// Stacks tensors as columns of a (size x n) matrix.
CMat as_columns(const std::vector<Tensor3c>& atoms);

struct ProjectionResult {
  Tensor3c residual;   // z - M (M^H M)^-1 M^H z over span(atoms)
  CVec gains;          // least-squares coefficients
  bool rank_deficient = false;
};

/// Removes the span of the given atoms from z (orthogonal projection
/// residual). Empty atom set returns z unchanged.
ProjectionResult project_out(const Tensor3c& z, const std::vector<Tensor3c>& atoms);

}  // namespace isac
