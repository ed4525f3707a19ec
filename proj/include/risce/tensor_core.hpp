#pragma once

//! @file tensor_core.hpp
//! Dense complex matrix and 4-way tensor kernels: Kronecker and Khatri-Rao
//! products, vectorization, the column-repetition selection matrices, n-mode
//! unfolding/folding, CP synthesis, pseudoinverse least squares and SVD.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "risce/errors.hpp"

namespace risce {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

//! a (x) b. Block (i,j) of the result is a(i,j) * b.
inline ComplexMatrix kronecker(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

//! Column-wise Kronecker product. Column m of the result is a[:,m] (x) b[:,m].
inline ComplexMatrix khatri_rao(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.cols())
    throw ConfigError("khatri_rao: column count mismatch (" +
                      std::to_string(a.cols()) + " vs " +
                      std::to_string(b.cols()) + ")");
  ComplexMatrix out(a.rows() * b.rows(), a.cols());
  for (Index m = 0; m < a.cols(); ++m)
    for (Index i = 0; i < a.rows(); ++i)
      out.col(m).segment(i * b.rows(), b.rows()) = a(i, m) * b.col(m);
  return out;
}

//! Column-major stacking into a single column.
inline ComplexVector vec(const ComplexMatrix& a) {
  return Eigen::Map<const ComplexVector>(a.data(), a.size());
}

//! Inverse of vec for a known shape.
inline ComplexMatrix unvec(const ComplexVector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw ConfigError("unvec: size mismatch");
  return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

inline ComplexMatrix diag(const ComplexVector& v) { return v.asDiagonal(); }

//! Omega_T = I_{l_t} (x) 1^T_{l_r} and Omega_R = 1^T_{l_t} (x) I_{l_r}.
//! A * omega_t repeats every column of A l_r times consecutively;
//! B * omega_r tiles the columns of B l_t times.
struct SelectionMatrices {
  ComplexMatrix omega_t;
  ComplexMatrix omega_r;
};

inline SelectionMatrices selection_matrices(Index l_t, Index l_r) {
  if (l_t < 1 || l_r < 1) throw ConfigError("selection_matrices: path counts must be >= 1");
  const ComplexMatrix ones_t = ComplexMatrix::Ones(1, l_t);
  const ComplexMatrix ones_r = ComplexMatrix::Ones(1, l_r);
  return {kronecker(ComplexMatrix::Identity(l_t, l_t), ones_r),
          kronecker(ones_t, ComplexMatrix::Identity(l_r, l_r))};
}

//! a * omega_t without forming the selection matrix.
inline ComplexMatrix repeat_columns(const ComplexMatrix& a, Index times) {
  ComplexMatrix out(a.rows(), a.cols() * times);
  for (Index l = 0; l < a.cols(); ++l)
    for (Index k = 0; k < times; ++k) out.col(l * times + k) = a.col(l);
  return out;
}

//! b * omega_r without forming the selection matrix.
inline ComplexMatrix tile_columns(const ComplexMatrix& b, Index times) {
  ComplexMatrix out(b.rows(), b.cols() * times);
  for (Index l = 0; l < times; ++l) out.middleCols(l * b.cols(), b.cols()) = b;
  return out;
}

// ---------------------------------------------------------------------------
// 4-way tensor
// ---------------------------------------------------------------------------

//! Dense 4-way complex array. Storage is column-major (first index fastest),
//! so data() equals vec([T]_(4)^T).
class Tensor4 {
 public:
  using Dims = std::array<Index, 4>;

  Tensor4() : dims_{0, 0, 0, 0} {}

  explicit Tensor4(const Dims& dims) : dims_(dims) {
    check_dims();
    data_ = ComplexVector::Zero(count());
  }

  Tensor4(const Dims& dims, ComplexVector data) : dims_(dims), data_(std::move(data)) {
    check_dims();
    if (data_.size() != count()) throw ConfigError("Tensor4: data size does not match dims");
  }

  const Dims& dims() const noexcept { return dims_; }

  //! Extent of `mode` (1-based).
  Index dim(int mode) const { return dims_.at(static_cast<std::size_t>(check_mode(mode) - 1)); }

  Index size() const noexcept { return data_.size(); }

  cplx& operator()(Index i1, Index i2, Index i3, Index i4) { return data_[offset(i1, i2, i3, i4)]; }
  const cplx& operator()(Index i1, Index i2, Index i3, Index i4) const {
    return data_[offset(i1, i2, i3, i4)];
  }

  const ComplexVector& data() const noexcept { return data_; }
  ComplexVector& data() noexcept { return data_; }

  double norm() const { return data_.norm(); }

  static int check_mode(int mode) {
    if (mode < 1 || mode > 4)
      throw ConfigError("invalid mode index " + std::to_string(mode) + " (expected 1..4)");
    return mode;
  }

 private:
  Index count() const { return dims_[0] * dims_[1] * dims_[2] * dims_[3]; }

  void check_dims() const {
    for (Index d : dims_)
      if (d < 0) throw ConfigError("Tensor4: negative dimension");
  }

  Index offset(Index i1, Index i2, Index i3, Index i4) const {
    return i1 + dims_[0] * (i2 + dims_[1] * (i3 + dims_[2] * i4));
  }

  Dims dims_;
  ComplexVector data_;
};

namespace detail {

// Column strides of the mode-n unfolding: the remaining modes in increasing
// order, lowest mode varying fastest. With this ordering a CP tensor with
// factors A1..A4 unfolds as [T]_(1) = A1 (A4 kr A3 kr A2)^T and so on.
inline std::array<Index, 4> unfolding_strides(const Tensor4::Dims& dims, int mode) {
  std::array<Index, 4> stride{0, 0, 0, 0};
  Index s = 1;
  for (int m = 0; m < 4; ++m) {
    if (m == mode - 1) continue;
    stride[static_cast<std::size_t>(m)] = s;
    s *= dims[static_cast<std::size_t>(m)];
  }
  return stride;
}

}  // namespace detail

inline ComplexMatrix mode_n_unfold(const Tensor4& t, int mode) {
  Tensor4::check_mode(mode);
  const auto& d = t.dims();
  const Index rows = d[static_cast<std::size_t>(mode - 1)];
  const Index cols = rows == 0 ? 0 : t.size() / rows;
  const auto stride = detail::unfolding_strides(d, mode);
  ComplexMatrix out(rows, cols);
  Index lin = 0;
  std::array<Index, 4> i{0, 0, 0, 0};
  for (i[3] = 0; i[3] < d[3]; ++i[3])
    for (i[2] = 0; i[2] < d[2]; ++i[2])
      for (i[1] = 0; i[1] < d[1]; ++i[1])
        for (i[0] = 0; i[0] < d[0]; ++i[0], ++lin) {
          const Index c = i[0] * stride[0] + i[1] * stride[1] + i[2] * stride[2] + i[3] * stride[3];
          out(i[static_cast<std::size_t>(mode - 1)], c) = t.data()[lin];
        }
  return out;
}

inline Tensor4 mode_n_fold(const ComplexMatrix& m, int mode, const Tensor4::Dims& dims) {
  Tensor4::check_mode(mode);
  Tensor4 t(dims);
  const Index rows = dims[static_cast<std::size_t>(mode - 1)];
  if (m.rows() != rows || m.size() != t.size())
    throw ConfigError("mode_n_fold: matrix shape does not match tensor dims");
  const auto stride = detail::unfolding_strides(dims, mode);
  Index lin = 0;
  std::array<Index, 4> i{0, 0, 0, 0};
  for (i[3] = 0; i[3] < dims[3]; ++i[3])
    for (i[2] = 0; i[2] < dims[2]; ++i[2])
      for (i[1] = 0; i[1] < dims[1]; ++i[1])
        for (i[0] = 0; i[0] < dims[0]; ++i[0], ++lin) {
          const Index c = i[0] * stride[0] + i[1] * stride[1] + i[2] * stride[2] + i[3] * stride[3];
          t.data()[lin] = m(i[static_cast<std::size_t>(mode - 1)], c);
        }
  return t;
}

//! T[i1,i2,i3,i4] = sum_l A1[i1,l] A2[i2,l] A3[i3,l] A4[i4,l].
inline Tensor4 cp_build(const ComplexMatrix& a1, const ComplexMatrix& a2,
                        const ComplexMatrix& a3, const ComplexMatrix& a4) {
  const Index rank = a1.cols();
  if (a2.cols() != rank || a3.cols() != rank || a4.cols() != rank)
    throw ConfigError("cp_build: factors must share the same column count");
  const Tensor4::Dims dims{a1.rows(), a2.rows(), a3.rows(), a4.rows()};
  // vec([T]_(4)^T) = (A4 kr A3 kr A2 kr A1) * 1
  const ComplexMatrix kr = khatri_rao(a4, khatri_rao(a3, khatri_rao(a2, a1)));
  return Tensor4(dims, kr.rowwise().sum());
}

// ---------------------------------------------------------------------------
// SVD and least squares
// ---------------------------------------------------------------------------

//! Thin SVD with singular values in decreasing order. Each right singular
//! vector is phase-normalized so that its largest-magnitude entry is real
//! and positive (the left vector absorbs the same phase).
struct SvdResult {
  ComplexMatrix u;
  RealVector s;
  ComplexMatrix v;
};

namespace detail {

inline SvdResult svd_square(const ComplexMatrix& a) {
  if (a.cols() <= 16) {
    Eigen::JacobiSVD<ComplexMatrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) throw NumericalError("svd: decomposition did not converge");
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
  }
  Eigen::BDCSVD<ComplexMatrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw NumericalError("svd: decomposition did not converge");
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

inline SvdResult svd_raw(const ComplexMatrix& a) {
  // Tall: QR first, then the SVD of the square triangular factor.
  if (a.rows() >= 2 * a.cols()) {
    Eigen::HouseholderQR<ComplexMatrix> qr(a);
    const ComplexMatrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    SvdResult small = svd_square(r);
    const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(a.rows(), a.cols());
    return {q * small.u, std::move(small.s), std::move(small.v)};
  }
  return svd_square(a);
}

}  // namespace detail

inline SvdResult svd(const ComplexMatrix& a) {
  if (a.size() == 0) throw ConfigError("svd: empty matrix");
  if (!a.allFinite()) throw NumericalError("svd: non-finite input");
  SvdResult out;
  if (a.cols() >= 2 * a.rows()) {
    SvdResult t = detail::svd_raw(a.adjoint());
    out = {std::move(t.v), std::move(t.s), std::move(t.u)};
  } else {
    out = detail::svd_raw(a);
  }
  for (Index j = 0; j < out.v.cols(); ++j) {
    Index imax = 0;
    out.v.col(j).cwiseAbs2().maxCoeff(&imax);
    const cplx pivot = out.v(imax, j);
    const double mag = std::abs(pivot);
    if (mag == 0.0) continue;
    const cplx phase = std::conj(pivot) / mag;
    out.v.col(j) *= phase;
    out.u.col(j) *= phase;
  }
  return out;
}

//! Dominant singular triplet from the eigendecomposition of the smaller
//! Gram matrix. Intended for matrices with a clear spectral gap.
struct SingularTriplet {
  double sigma = 0.0;
  ComplexVector u;
  ComplexVector v;
};

inline SingularTriplet top_singular_triplet(const ComplexMatrix& a) {
  if (a.size() == 0) throw ConfigError("top_singular_triplet: empty matrix");
  SingularTriplet t;
  if (a.rows() <= a.cols()) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(a * a.adjoint());
    if (eig.info() != Eigen::Success) throw NumericalError("top_singular_triplet: eigensolver failed");
    t.u = eig.eigenvectors().col(a.rows() - 1);
    const ComplexVector w = a.adjoint() * t.u;
    t.sigma = w.norm();
    t.v = t.sigma > 0 ? ComplexVector(w / t.sigma) : ComplexVector::Zero(a.cols());
  } else {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(a.adjoint() * a);
    if (eig.info() != Eigen::Success) throw NumericalError("top_singular_triplet: eigensolver failed");
    t.v = eig.eigenvectors().col(a.cols() - 1);
    const ComplexVector w = a * t.v;
    t.sigma = w.norm();
    t.u = t.sigma > 0 ? ComplexVector(w / t.sigma) : ComplexVector::Zero(a.rows());
  }
  return t;
}

//! Singular values below max(rows, cols) * eps * sigma_max count as zero.
inline double rank_cutoff(const SvdResult& s, Index rows, Index cols) {
  const double smax = s.s.size() > 0 ? s.s[0] : 0.0;
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * smax;
}

inline Index numerical_rank(const SvdResult& s, double cutoff) {
  Index r = 0;
  for (Index i = 0; i < s.s.size(); ++i)
    if (s.s[i] > cutoff) ++r;
  return r;
}

inline Index numerical_rank(const ComplexMatrix& a, double relative_tol = -1.0) {
  if (a.size() == 0) return 0;
  const SvdResult s = svd(a);
  const double cutoff = relative_tol < 0 ? rank_cutoff(s, a.rows(), a.cols())
                                         : relative_tol * (s.s.size() ? s.s[0] : 0.0);
  return numerical_rank(s, cutoff);
}

inline ComplexMatrix pseudo_inverse(const ComplexMatrix& a, Index* rank = nullptr) {
  const SvdResult s = svd(a);
  const double cutoff = rank_cutoff(s, a.rows(), a.cols());
  RealVector inv = RealVector::Zero(s.s.size());
  Index r = 0;
  for (Index i = 0; i < s.s.size(); ++i)
    if (s.s[i] > cutoff) {
      inv[i] = 1.0 / s.s[i];
      ++r;
    }
  if (rank) *rank = r;
  return s.v * inv.asDiagonal() * s.u.adjoint();
}

//! Minimum-norm minimizer of ||Y - A X||_F together with the effective rank
//! of A used by the pseudoinverse.
struct LsSolution {
  ComplexMatrix x;
  Index rank = 0;
};

inline LsSolution ls_solve(const ComplexMatrix& a, const ComplexMatrix& y) {
  if (a.size() == 0) throw ConfigError("ls_solve: empty design matrix");
  if (a.rows() != y.rows()) throw ConfigError("ls_solve: row count mismatch");
  LsSolution out;
  out.x = pseudo_inverse(a, &out.rank) * y;
  return out;
}

//! ||a - b||_F / ||b||_F (absolute difference when b is zero).
inline double relative_error(const ComplexMatrix& a, const ComplexMatrix& b) {
  const double nb = b.norm();
  const double d = (a - b).norm();
  return nb > 0 ? d / nb : d;
}

}  // namespace risce
