#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "loraks/kspace.hpp"

namespace loraks {

// Offset (dy, dx) inside a neighborhood; Center is an absolute (ky, kx).
using Offset = std::pair<int, int>;
using Center = std::pair<int, int>;

// Set of k-space offsets swept around each matrix-building center.
// ball(radius) enumerates {(dy,dx) : dy^2 + dx^2 <= radius^2} in
// lexicographic (dy, dx) order; radius 1 has 5 offsets, radius 2 has 13.
struct Neighborhood {
  int radius = 0;
  std::vector<Offset> offsets;

  static Neighborhood ball(int radius);
  Neighborhood(int radius, std::vector<Offset> offsets);
  int size() const { return int(offsets.size()); }
};

// Records which lifting produced a matrix so the adjoint can rebuild a grid
// of the right shape.
struct Provenance {
  char op = 'C'; // 'C' or 'S'
  int n_ch = 0;
  int ny = 0;
  int nx = 0;
  int radius = 0;
  bool operator==(const Provenance&) const = default;
};

struct CMatrix {
  Eigen::MatrixXcd m;
  Provenance prov;
  std::vector<Offset> offsets; // neighborhood that built the matrix
};

struct SMatrix {
  Eigen::MatrixXd m;
  Provenance prov;
  std::vector<Offset> offsets;
};

// Centers whose whole neighborhood stays on the grid (limited support).
std::vector<Center> valid_centers_c(int ny, int nx, int radius);
// Centers additionally requiring the mirrored neighborhood around
// (2*dc_y - ky, 2*dc_x - kx) to stay on the grid (conjugate symmetry).
std::vector<Center> valid_centers_s(int ny, int nx, int radius);

// C lifting: rows sweep valid centers p, columns sweep (channel, offset m);
// the entry is k_c(p - m).  Complex-linear in the grid.
CMatrix build_c(const KSpaceGrid& g, const Neighborhood& nb);

// S lifting: per center two real rows coupling each sample a = k_c(p - m)
// with its conjugate-symmetric partner b = k_c(2*dc - p + m):
//   row 2t:   [ Re a - Re b | Im a + Im b ]
//   row 2t+1: [ Im a - Im b | -Re a - Re b ]
// Columns are (channel, half, offset) with half 0 holding the first block.
// Real-linear in the grid.
SMatrix build_s(const KSpaceGrid& g, const Neighborhood& nb);

// Adjoints with respect to the real inner products
//   <X, Y>_grid = sum Re(conj(x_i) y_i),   <A, B>_mat = sum Re(conj(a_ij) b_ij)
// so that <build(x), M> == <x, adjoint(M)> for every grid x and matrix M.
// For the C lifting this is an unweighted scatter-add; S also carries the
// sign structure above.
KSpaceGrid adjoint_c(const CMatrix& m, Polarity pol = Polarity::none);
KSpaceGrid adjoint_s(const SMatrix& m, Polarity pol = Polarity::none);

namespace detail {

// Precomputed gather tables for one (ny, nx, neighborhood) combination;
// lets the solver lift raw buffers without re-deriving indices.
struct LiftPlan {
  int ny = 0, nx = 0;
  Neighborhood nb;
  std::vector<Center> centers_c, centers_s;
  // plane-flat index of (p - m), row-major [center][offset]
  std::vector<std::int32_t> gather_c;
  std::vector<std::int32_t> gather_s1; // (p - m)
  std::vector<std::int32_t> gather_s2; // mirror: (2*dc - p + m)

  LiftPlan(int ny, int nx, Neighborhood nb);
  int rows_c() const { return int(centers_c.size()); }
  int rows_s() const { return 2 * int(centers_s.size()); }
  int cols_c(int n_ch) const { return n_ch * nb.size(); }
  int cols_s(int n_ch) const { return 2 * n_ch * nb.size(); }

  void lift_c(const cplx* grid, int n_ch, Eigen::Ref<Eigen::MatrixXcd> out) const;
  void lift_s(const cplx* grid, int n_ch, Eigen::Ref<Eigen::MatrixXd> out) const;
  // Scatter-add the adjoints into `grid` (not zeroed first).
  void adjoint_c_accum(const Eigen::Ref<const Eigen::MatrixXcd>& m, int n_ch,
                       cplx* grid) const;
  void adjoint_s_accum(const Eigen::Ref<const Eigen::MatrixXd>& m, int n_ch,
                       cplx* grid) const;
};

} // namespace detail

} // namespace loraks
