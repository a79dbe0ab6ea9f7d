#pragma once

#include <Eigen/Dense>
#include <vector>

namespace loraks {

// Rank-r residual penalty: the squared Frobenius distance from X to the
// closest matrix of rank <= r, i.e. the sum of its squared singular values
// past the r-th.  r = 0 gives the full squared norm, r >= min(rows, cols)
// gives exactly 0; negative r is rejected.
double penalty_jr(const Eigen::MatrixXd& x, int r);
double penalty_jr(const Eigen::MatrixXcd& x, int r);

// Orthonormal basis of the trailing right-singular subspace of X: the p
// right singular vectors attached to the smallest singular values, returned
// as columns.  Each column's phase is canonicalized (its largest-magnitude
// entry is made real and positive) so results are reproducible up to the
// usual subspace ambiguity.
Eigen::MatrixXd nullspace_basis(const Eigen::MatrixXd& x, int p);
Eigen::MatrixXcd nullspace_basis(const Eigen::MatrixXcd& x, int p);

// Same subspace computed from the Gram matrix G = X^H X (n x n Hermitian):
// the p eigenvectors with the smallest eigenvalues.  The solver uses this
// route; tests pin it against nullspace_basis through principal angles.
Eigen::MatrixXcd nullspace_from_gram(const Eigen::MatrixXcd& gram, int p);
Eigen::MatrixXd nullspace_from_gram(const Eigen::MatrixXd& gram, int p);
// Leading r eigenvectors (largest eigenvalues) of a Gram matrix; spans the
// top right-singular subspace of the lifted matrix.
Eigen::MatrixXd leading_from_gram(const Eigen::MatrixXd& gram, int r);

// Singular values in descending order.
std::vector<double> singular_values(const Eigen::MatrixXd& x);
std::vector<double> singular_values(const Eigen::MatrixXcd& x);
// Descending singular values recovered from a Gram matrix (sqrt of its
// eigenvalues, clamped at zero).
std::vector<double> singular_values_from_gram(const Eigen::MatrixXcd& gram);
std::vector<double> singular_values_from_gram(const Eigen::MatrixXd& gram);

// Largest principal angle (radians) between the column spans of two
// orthonormal bases of equal dimension.
double max_principal_angle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

enum class RankKind { c_side, s_side };

struct RankSuggestion {
  int rank = 0;
  bool low_confidence = false;
};

// Heuristic elbow detector for a descending singular-value curve: the first
// index i (1-based counting of retained values) where the curve has dropped
// below tau_flat * s[0] and stays flat afterwards (next ratio > 0.9).  When
// no clear elbow exists it falls back to 3/4 of the curve length and flags
// low confidence.  Both matrix kinds currently share the thresholds.
RankSuggestion suggest_rank(const std::vector<double>& descending, RankKind kind);

} // namespace loraks
