#include "loraks/operators.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace loraks {

Neighborhood Neighborhood::ball(int radius) {
  if (radius < 1)
    throw ParamError("neighborhood radius must be >= 1, got " +
                     std::to_string(radius));
  std::vector<Offset> offsets;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) offsets.emplace_back(dy, dx);
  return Neighborhood(radius, std::move(offsets));
}

Neighborhood::Neighborhood(int radius_, std::vector<Offset> offsets_)
    : radius(radius_), offsets(std::move(offsets_)) {
  if (radius < 1)
    throw ParamError("neighborhood radius must be >= 1");
  if (offsets.empty()) throw ParamError("neighborhood must contain offsets");
  std::set<Offset> seen;
  for (const auto& [dy, dx] : offsets) {
    if (dy * dy + dx * dx > radius * radius)
      throw ParamError("offset (" + std::to_string(dy) + "," +
                       std::to_string(dx) + ") lies outside radius " +
                       std::to_string(radius));
    if (!seen.insert({dy, dx}).second)
      throw ParamError("duplicate neighborhood offset (" + std::to_string(dy) +
                       "," + std::to_string(dx) + ")");
  }
}

std::vector<Center> valid_centers_c(int ny, int nx, int radius) {
  if (ny < 2 * radius + 1 || nx < 2 * radius + 1)
    throw ShapeError("grid " + std::to_string(ny) + "x" + std::to_string(nx) +
                     " too small for neighborhood radius " +
                     std::to_string(radius));
  std::vector<Center> centers;
  for (int y = radius; y <= ny - 1 - radius; ++y)
    for (int x = radius; x <= nx - 1 - radius; ++x) centers.emplace_back(y, x);
  return centers;
}

std::vector<Center> valid_centers_s(int ny, int nx, int radius) {
  // The mirror of center p about dc covers indices 2*dc - p +/- offsets, so
  // a center is valid iff both its own and its mirrored neighborhood fit.
  // For even extents this trims one line at the low end (the mirror of line
  // `radius` would be 2*(n/2) - radius = n - radius, whose neighborhood
  // sticks out); odd extents keep the full C range.
  std::vector<Center> centers = valid_centers_c(ny, nx, radius);
  const int dcy = ny / 2, dcx = nx / 2;
  std::vector<Center> out;
  for (const auto& [y, x] : centers) {
    const int my = 2 * dcy - y, mx = 2 * dcx - x;
    if (my - radius < 0 || my + radius > ny - 1) continue;
    if (mx - radius < 0 || mx + radius > nx - 1) continue;
    out.emplace_back(y, x);
  }
  if (out.empty())
    throw ShapeError("grid " + std::to_string(ny) + "x" + std::to_string(nx) +
                     " has no valid mirrored centers for radius " +
                     std::to_string(radius));
  return out;
}

namespace detail {

LiftPlan::LiftPlan(int ny_, int nx_, Neighborhood nb_)
    : ny(ny_), nx(nx_), nb(std::move(nb_)) {
  centers_c = valid_centers_c(ny, nx, nb.radius);
  centers_s = valid_centers_s(ny, nx, nb.radius);
  const int K = nb.size();
  gather_c.resize(centers_c.size() * size_t(K));
  for (size_t t = 0; t < centers_c.size(); ++t) {
    const auto [py, px] = centers_c[t];
    for (int j = 0; j < K; ++j) {
      const auto [dy, dx] = nb.offsets[size_t(j)];
      gather_c[t * size_t(K) + size_t(j)] =
          std::int32_t((py - dy) * nx + (px - dx));
    }
  }
  const int dcy = ny / 2, dcx = nx / 2;
  gather_s1.resize(centers_s.size() * size_t(K));
  gather_s2.resize(centers_s.size() * size_t(K));
  for (size_t t = 0; t < centers_s.size(); ++t) {
    const auto [py, px] = centers_s[t];
    for (int j = 0; j < K; ++j) {
      const auto [dy, dx] = nb.offsets[size_t(j)];
      gather_s1[t * size_t(K) + size_t(j)] =
          std::int32_t((py - dy) * nx + (px - dx));
      gather_s2[t * size_t(K) + size_t(j)] =
          std::int32_t((2 * dcy - py + dy) * nx + (2 * dcx - px + dx));
    }
  }
}

void LiftPlan::lift_c(const cplx* grid, int n_ch,
                      Eigen::Ref<Eigen::MatrixXcd> out) const {
  const int K = nb.size();
  const int rows = rows_c();
  if (out.rows() != rows || out.cols() != cols_c(n_ch))
    throw ShapeError("lift_c output has wrong shape");
  const size_t plane = size_t(ny) * nx;
  for (int c = 0; c < n_ch; ++c) {
    const cplx* src = grid + size_t(c) * plane;
    for (int j = 0; j < K; ++j) {
      cplx* col = out.col(c * K + j).data();
      const std::int32_t* idx = gather_c.data() + j;
      for (int t = 0; t < rows; ++t) col[t] = src[idx[size_t(t) * K]];
    }
  }
}

void LiftPlan::lift_s(const cplx* grid, int n_ch,
                      Eigen::Ref<Eigen::MatrixXd> out) const {
  const int K = nb.size();
  const int nt = int(centers_s.size());
  if (out.rows() != 2 * nt || out.cols() != cols_s(n_ch))
    throw ShapeError("lift_s output has wrong shape");
  const size_t plane = size_t(ny) * nx;
  for (int c = 0; c < n_ch; ++c) {
    const cplx* src = grid + size_t(c) * plane;
    for (int j = 0; j < K; ++j) {
      double* col0 = out.col(c * 2 * K + j).data();       // half 0
      double* col1 = out.col(c * 2 * K + K + j).data();   // half 1
      const std::int32_t* i1 = gather_s1.data() + j;
      const std::int32_t* i2 = gather_s2.data() + j;
      for (int t = 0; t < nt; ++t) {
        const cplx a = src[i1[size_t(t) * K]];
        const cplx b = src[i2[size_t(t) * K]];
        col0[2 * t] = a.real() - b.real();
        col0[2 * t + 1] = a.imag() - b.imag();
        col1[2 * t] = a.imag() + b.imag();
        col1[2 * t + 1] = -a.real() - b.real();
      }
    }
  }
}

void LiftPlan::adjoint_c_accum(const Eigen::Ref<const Eigen::MatrixXcd>& m,
                               int n_ch, cplx* grid) const {
  const int K = nb.size();
  const int rows = rows_c();
  if (m.rows() != rows || m.cols() != cols_c(n_ch))
    throw ShapeError("adjoint_c input has wrong shape");
  const size_t plane = size_t(ny) * nx;
  for (int c = 0; c < n_ch; ++c) {
    cplx* dst = grid + size_t(c) * plane;
    for (int j = 0; j < K; ++j) {
      const cplx* col = m.col(c * K + j).data();
      const std::int32_t* idx = gather_c.data() + j;
      for (int t = 0; t < rows; ++t) dst[idx[size_t(t) * K]] += col[t];
    }
  }
}

void LiftPlan::adjoint_s_accum(const Eigen::Ref<const Eigen::MatrixXd>& m,
                               int n_ch, cplx* grid) const {
  const int K = nb.size();
  const int nt = int(centers_s.size());
  if (m.rows() != 2 * nt || m.cols() != cols_s(n_ch))
    throw ShapeError("adjoint_s input has wrong shape");
  const size_t plane = size_t(ny) * nx;
  for (int c = 0; c < n_ch; ++c) {
    cplx* dst = grid + size_t(c) * plane;
    for (int j = 0; j < K; ++j) {
      const double* col0 = m.col(c * 2 * K + j).data();
      const double* col1 = m.col(c * 2 * K + K + j).data();
      const std::int32_t* i1 = gather_s1.data() + j;
      const std::int32_t* i2 = gather_s2.data() + j;
      for (int t = 0; t < nt; ++t) {
        const double m1a = col0[2 * t];     // row 2t,   half 0
        const double m1b = col1[2 * t];     // row 2t,   half 1
        const double m2a = col0[2 * t + 1]; // row 2t+1, half 0
        const double m2b = col1[2 * t + 1]; // row 2t+1, half 1
        // Gradients of <build_s(x), M> w.r.t. the two samples feeding this
        // (center, channel, offset) cell:
        //   d/dRe(a) = m1a - m2b     d/dIm(a) = m1b + m2a
        //   d/dRe(b) = -m1a - m2b    d/dIm(b) = m1b - m2a
        dst[i1[size_t(t) * K]] += cplx(m1a - m2b, m1b + m2a);
        dst[i2[size_t(t) * K]] += cplx(-m1a - m2b, m1b - m2a);
      }
    }
  }
}

} // namespace detail

CMatrix build_c(const KSpaceGrid& g, const Neighborhood& nb) {
  detail::LiftPlan plan(g.ny, g.nx, nb);
  CMatrix out;
  out.prov = Provenance{'C', g.n_ch, g.ny, g.nx, nb.radius};
  out.offsets = nb.offsets;
  out.m.resize(plan.rows_c(), plan.cols_c(g.n_ch));
  plan.lift_c(g.data.data(), g.n_ch, out.m);
  return out;
}

SMatrix build_s(const KSpaceGrid& g, const Neighborhood& nb) {
  detail::LiftPlan plan(g.ny, g.nx, nb);
  SMatrix out;
  out.prov = Provenance{'S', g.n_ch, g.ny, g.nx, nb.radius};
  out.offsets = nb.offsets;
  out.m.resize(plan.rows_s(), plan.cols_s(g.n_ch));
  plan.lift_s(g.data.data(), g.n_ch, out.m);
  return out;
}

KSpaceGrid adjoint_c(const CMatrix& m, Polarity pol) {
  if (m.prov.op != 'C')
    throw ShapeError("adjoint_c applied to a matrix built by the S lifting");
  detail::LiftPlan plan(m.prov.ny, m.prov.nx,
                        Neighborhood(m.prov.radius, m.offsets));
  if (m.m.rows() != plan.rows_c() || m.m.cols() != plan.cols_c(m.prov.n_ch))
    throw ShapeError("matrix shape does not match its provenance");
  KSpaceGrid g(m.prov.n_ch, m.prov.ny, m.prov.nx, pol);
  plan.adjoint_c_accum(m.m, m.prov.n_ch, g.data.data());
  return g;
}

KSpaceGrid adjoint_s(const SMatrix& m, Polarity pol) {
  if (m.prov.op != 'S')
    throw ShapeError("adjoint_s applied to a matrix built by the C lifting");
  detail::LiftPlan plan(m.prov.ny, m.prov.nx,
                        Neighborhood(m.prov.radius, m.offsets));
  if (m.m.rows() != plan.rows_s() || m.m.cols() != plan.cols_s(m.prov.n_ch))
    throw ShapeError("matrix shape does not match its provenance");
  KSpaceGrid g(m.prov.n_ch, m.prov.ny, m.prov.nx, pol);
  plan.adjoint_s_accum(m.m, m.prov.n_ch, g.data.data());
  return g;
}

} // namespace loraks
