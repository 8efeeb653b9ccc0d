#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace isac {

using cd = std::complex<double>;

using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Row-major views used by the tensor contraction kernels.
using CMatRM = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapCRM = Eigen::Map<CMatRM>;
using MapConstCRM = Eigen::Map<const CMatRM>;

/// Dense rank-3 complex tensor, row-major (last extent fastest).
/// Rank-1/2 data is carried with trailing extents of 1.
struct Tensor3c {
  std::array<Eigen::Index, 3> shape{0, 0, 0};
  CVec data;

  Tensor3c() = default;
  Tensor3c(Eigen::Index d0, Eigen::Index d1, Eigen::Index d2)
      : shape{d0, d1, d2}, data(CVec::Zero(d0 * d1 * d2)) {}

  /// Allocation without the zero fill, for kernels that overwrite every entry.
  static Tensor3c uninitialized(Eigen::Index d0, Eigen::Index d1, Eigen::Index d2) {
    Tensor3c t;
    t.shape = {d0, d1, d2};
    t.data.resize(d0 * d1 * d2);
    return t;
  }

  Eigen::Index size() const { return data.size(); }
  Eigen::Index d0() const { return shape[0]; }
  Eigen::Index d1() const { return shape[1]; }
  Eigen::Index d2() const { return shape[2]; }

  cd& at(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  cd at(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  // Leading axis as rows, remaining axes flattened as columns.
  MapConstCRM lead_matrix() const {
    return MapConstCRM(data.data(), shape[0], shape[1] * shape[2]);
  }
  MapCRM lead_matrix() {
    return MapCRM(data.data(), shape[0], shape[1] * shape[2]);
  }

  double norm() const { return data.norm(); }
  double squaredNorm() const { return data.squaredNorm(); }
};

/// Dense rank-3 real tensor with the same indexing convention.
struct Tensor3r {
  std::array<Eigen::Index, 3> shape{0, 0, 0};
  RVec data;

  Tensor3r() = default;
  Tensor3r(Eigen::Index d0, Eigen::Index d1, Eigen::Index d2)
      : shape{d0, d1, d2}, data(RVec::Zero(d0 * d1 * d2)) {}

  static Tensor3r uninitialized(Eigen::Index d0, Eigen::Index d1, Eigen::Index d2) {
    Tensor3r t;
    t.shape = {d0, d1, d2};
    t.data.resize(d0 * d1 * d2);
    return t;
  }

  Eigen::Index size() const { return data.size(); }

  double& at(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

inline constexpr double kSpeedOfLight = 299792458.0;

}  // namespace isac
