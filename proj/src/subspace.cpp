#include "loraks/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loraks/errors.hpp"

namespace loraks {

namespace {

template <typename Matrix>
double penalty_impl(const Matrix& x, int r) {
  if (r < 0) throw ParamError("rank parameter must be >= 0");
  if (x.rows() == 0 || x.cols() == 0) throw ShapeError("empty matrix");
  if (r == 0) return x.squaredNorm();
  const long small = std::min(x.rows(), x.cols());
  if (r >= small) return 0.0;
  Eigen::BDCSVD<Matrix> svd(x);
  const auto& s = svd.singularValues();
  double acc = 0.0;
  for (long i = r; i < small; ++i) acc += s[i] * s[i];
  return acc;
}

// Make the largest-magnitude entry of each column real and positive; ties
// resolved by the lowest row index.  Removes the per-vector phase ambiguity.
template <typename Matrix>
void canonicalize_columns(Matrix& v) {
  using Scalar = typename Matrix::Scalar;
  for (long j = 0; j < v.cols(); ++j) {
    long imax = 0;
    double best = -1.0;
    for (long i = 0; i < v.rows(); ++i) {
      const double a = std::abs(v(i, j));
      if (a > best) {
        best = a;
        imax = i;
      }
    }
    if (best <= 0.0) continue;
    const Scalar pivot = v(imax, j);
    v.col(j) *= Scalar(std::abs(pivot)) / pivot;
  }
}

template <typename Matrix>
Matrix nullspace_impl(const Matrix& x, int p) {
  if (x.rows() == 0 || x.cols() == 0) throw ShapeError("empty matrix");
  if (p < 1 || p > x.cols())
    throw ParamError("nullspace dimension " + std::to_string(p) +
                     " outside [1, " + std::to_string(x.cols()) + "]");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeFullV);
  // Columns of V come ordered by descending singular value; the trailing p
  // columns span the annihilating subspace.  Columns past rank(X) of a wide
  // matrix are still well-defined as an orthonormal completion.
  Matrix n = svd.matrixV().rightCols(p);
  canonicalize_columns(n);
  return n;
}

template <typename Matrix>
Matrix gram_eigvecs(const Matrix& gram, int count, bool trailing) {
  if (gram.rows() != gram.cols()) throw ShapeError("Gram matrix must be square");
  if (count < 1 || count > gram.cols())
    throw ParamError("subspace dimension outside [1, n]");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed");
  // Eigenvalues come in ascending order.
  Matrix v;
  if (trailing)
    v = eig.eigenvectors().leftCols(count);
  else
    v = eig.eigenvectors().rightCols(count).rowwise().reverse();
  canonicalize_columns(v);
  return v;
}

template <typename Matrix>
std::vector<double> sv_impl(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw ShapeError("empty matrix");
  Eigen::BDCSVD<Matrix> svd(x);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

template <typename Matrix>
std::vector<double> sv_gram_impl(const Matrix& gram) {
  if (gram.rows() != gram.cols()) throw ShapeError("Gram matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed");
  std::vector<double> out(size_t(gram.cols()));
  for (long i = 0; i < gram.cols(); ++i) {
    const double ev = eig.eigenvalues()[gram.cols() - 1 - i];
    out[size_t(i)] = ev > 0.0 ? std::sqrt(ev) : 0.0;
  }
  return out;
}

} // namespace

double penalty_jr(const Eigen::MatrixXd& x, int r) { return penalty_impl(x, r); }
double penalty_jr(const Eigen::MatrixXcd& x, int r) { return penalty_impl(x, r); }

Eigen::MatrixXd nullspace_basis(const Eigen::MatrixXd& x, int p) {
  return nullspace_impl(x, p);
}
Eigen::MatrixXcd nullspace_basis(const Eigen::MatrixXcd& x, int p) {
  return nullspace_impl(x, p);
}

Eigen::MatrixXcd nullspace_from_gram(const Eigen::MatrixXcd& gram, int p) {
  return gram_eigvecs(gram, p, true);
}
Eigen::MatrixXd nullspace_from_gram(const Eigen::MatrixXd& gram, int p) {
  return gram_eigvecs(gram, p, true);
}
Eigen::MatrixXd leading_from_gram(const Eigen::MatrixXd& gram, int r) {
  return gram_eigvecs(gram, r, false);
}

std::vector<double> singular_values(const Eigen::MatrixXd& x) { return sv_impl(x); }
std::vector<double> singular_values(const Eigen::MatrixXcd& x) { return sv_impl(x); }
std::vector<double> singular_values_from_gram(const Eigen::MatrixXcd& gram) {
  return sv_gram_impl(gram);
}
std::vector<double> singular_values_from_gram(const Eigen::MatrixXd& gram) {
  return sv_gram_impl(gram);
}

double max_principal_angle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("principal angles need equally sized bases");
  if (a.cols() < 1) throw ShapeError("empty basis");
  // Singular values of A^H B are the cosines of the principal angles.
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(Eigen::MatrixXcd(a.adjoint() * b));
  const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(c);
}

RankSuggestion suggest_rank(const std::vector<double>& s, RankKind) {
  if (s.empty()) throw ParamError("empty singular-value curve");
  for (double v : s)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ParamError("singular values must be finite and non-negative");
  for (size_t i = 1; i < s.size(); ++i)
    if (s[i] > s[i - 1] * (1.0 + 1e-12) + 1e-300)
      throw ParamError("singular values must be sorted in descending order");

  const int n = int(s.size());
  const double tau_flat = 0.05;
  const double flat_ratio = 0.9 - 1e-12; // tolerant of r == 0.9 exactly
  if (s[0] > 0.0) {
    for (int i = 1; i < n; ++i) {
      if (s[size_t(i)] / s[0] >= tau_flat) continue;
      // Treat an exhausted or identically-zero tail as flat.
      const bool flat = (i + 1 >= n) || (s[size_t(i)] == 0.0) ||
                        (s[size_t(i) + 1] / s[size_t(i)] > flat_ratio);
      if (flat) return RankSuggestion{i, false};
    }
  }
  const int fallback = std::clamp((3 * n) / 4, 1, std::max(1, n - 1));
  return RankSuggestion{fallback, true};
}

} // namespace loraks
