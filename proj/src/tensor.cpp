#include "isac/tensor.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace isac {

Tensor3c contract_first(const Tensor3c& z, const CMat& d) {
  // staging the dictionary row-major keeps the product on the fast
  // same-layout kernel; the copy is small next to the gemm
  const CMatRM drm = d;
  Tensor3c out;
  contract_first_into(z, drm, out);
  return out;
}

void contract_first_into(const Tensor3c& z, const CMatRM& d, Tensor3c& out) {
  require(z.d0() == d.rows(),
          "contract_first: leading extent " + std::to_string(z.d0()) +
              " does not match dictionary rows " + std::to_string(d.rows()));
  const Eigen::Index rest = z.d1() * z.d2();
  const Eigen::Index n = d.cols();
  out.shape = {z.d1(), z.d2(), n};
  if (out.data.size() != rest * n) out.data.resize(rest * n);
  MapCRM(out.data.data(), rest, n).noalias() = z.lead_matrix().transpose() * d;
}

Tensor3c outer3(const CVec& a, const CVec& b, const CVec& c) {
  require(a.size() > 0 && b.size() > 0 && c.size() > 0, "outer3: empty factor");
  Tensor3c out = Tensor3c::uninitialized(a.size(), b.size(), c.size());
  Eigen::Index p = 0;
  for (Eigen::Index m = 0; m < a.size(); ++m)
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const cd ab = a[m] * b[i];
      for (Eigen::Index j = 0; j < c.size(); ++j) out.data[p++] = ab * c[j];
    }
  return out;
}

LstsqResult lstsq(const CMat& a, const CVec& b) {
  require(a.rows() >= a.cols(), "lstsq: system must have rows >= cols, got " +
                                    std::to_string(a.rows()) + " x " +
                                    std::to_string(a.cols()));
  require(a.rows() == b.size(), "lstsq: rhs length " + std::to_string(b.size()) +
                                    " does not match rows " + std::to_string(a.rows()));
  const Eigen::Index m = a.cols();
  CMat normal = a.adjoint() * a;
  const double eps = 1e-12 * normal.trace().real() / double(m);
  normal.diagonal().array() += cd(eps, 0.0);
  Eigen::LDLT<CMat> ldlt(normal);
  LstsqResult res;
  res.x = ldlt.solve(a.adjoint() * b);
  const RVec dv = ldlt.vectorD().real().cwiseAbs();
  const double dmax = dv.maxCoeff();
  res.rank_deficient = (dmax <= 0.0) || (dv.minCoeff() <= 1e-10 * dmax);
  return res;
}

EigResult hermitian_eig(const CMat& m) {
  require(m.rows() == m.cols(), "hermitian_eig: matrix must be square");
  const double scale = m.norm();
  if ((m - m.adjoint()).norm() > 1e-9 * std::max(scale, 1e-300))
    throw DimensionError("hermitian_eig: input is not Hermitian to tolerance");
  Eigen::SelfAdjointEigenSolver<CMat> solver((m + m.adjoint()) / 2.0);
  require(solver.info() == Eigen::Success, "hermitian_eig: solver failed");
  const Eigen::Index n = m.rows();
  EigResult out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues[i] = solver.eigenvalues()[n - 1 - i];
    out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

Tensor3r magnitude(const Tensor3c& t) {
  Tensor3r out = Tensor3r::uninitialized(t.shape[0], t.shape[1], t.shape[2]);
  out.data = t.data.cwiseAbs();
  return out;
}

CMat as_columns(const std::vector<Tensor3c>& atoms) {
  require(!atoms.empty(), "as_columns: empty atom set");
  CMat m(atoms[0].size(), Eigen::Index(atoms.size()));
  for (size_t i = 0; i < atoms.size(); ++i) {
    require(atoms[i].size() == m.rows(), "as_columns: atom size mismatch");
    m.col(Eigen::Index(i)) = atoms[i].data;
  }
  return m;
}

ProjectionResult project_out(const Tensor3c& z, const std::vector<Tensor3c>& atoms) {
  ProjectionResult res;
  res.residual = z;
  if (atoms.empty()) {
    res.gains = CVec();
    return res;
  }
  const CMat m = as_columns(atoms);
  LstsqResult ls = lstsq(m, z.data);
  res.gains = ls.x;
  res.rank_deficient = ls.rank_deficient;
  res.residual.data = z.data - m * ls.x;
  return res;
}

}  // namespace isac
