#include "loraks/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace loraks {

namespace {

// FFTW planning is not thread-safe; plan creation/destruction is locked.
std::mutex planner_mutex;

// out[y][x] = in[(y + sy) % ny][(x + sx) % nx]
void rotate2(int ny, int nx, int sy, int sx, const cplx* in, cplx* out) {
  for (int y = 0; y < ny; ++y) {
    const int ys = (y + sy) % ny;
    for (int x = 0; x < nx; ++x) out[y * nx + x] = in[ys * nx + (x + sx) % nx];
  }
}

void transform(int ny, int nx, int sign, const cplx* in, cplx* out) {
  if (ny < 1 || nx < 1) throw ShapeError("transform needs positive dimensions");
  const size_t n = size_t(ny) * nx;
  fftw_complex* buf = fftw_alloc_complex(n);
  if (!buf) throw NumericError("fftw_alloc_complex failed");
  // ifftshift: move the centered origin to index 0.
  rotate2(ny, nx, ny / 2, nx / 2, in, reinterpret_cast<cplx*>(buf));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    plan = fftw_plan_dft_2d(ny, nx, buf, buf, sign, FFTW_ESTIMATE);
  }
  if (!plan) {
    fftw_free(buf);
    throw NumericError("fftw_plan_dft_2d failed");
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(plan);
  }
  // fftshift back to the centered convention and apply the unitary scale.
  rotate2(ny, nx, ny - ny / 2, nx - nx / 2, reinterpret_cast<cplx*>(buf), out);
  const double scale = 1.0 / std::sqrt(double(ny) * double(nx));
  for (size_t i = 0; i < n; ++i) out[i] *= scale;
  fftw_free(buf);
}

} // namespace

void kspace_from_image(int ny, int nx, const cplx* image, cplx* kspace) {
  transform(ny, nx, FFTW_FORWARD, image, kspace);
}

void image_from_kspace(int ny, int nx, const cplx* kspace, cplx* image) {
  transform(ny, nx, FFTW_BACKWARD, kspace, image);
}

KSpaceGrid grid_from_channel_images(const std::vector<std::vector<cplx>>& imgs,
                                    int ny, int nx, Polarity pol) {
  if (imgs.empty()) throw ShapeError("need at least one channel image");
  KSpaceGrid g(int(imgs.size()), ny, nx, pol);
  for (size_t c = 0; c < imgs.size(); ++c) {
    if (imgs[c].size() != size_t(ny) * nx)
      throw ShapeError("channel image size mismatch");
    kspace_from_image(ny, nx, imgs[c].data(), &g.data[c * size_t(ny) * nx]);
  }
  g.check_finite("transformed grid");
  return g;
}

std::vector<std::vector<cplx>> channel_images_from_grid(const KSpaceGrid& g) {
  std::vector<std::vector<cplx>> imgs(size_t(g.n_ch));
  for (int c = 0; c < g.n_ch; ++c) {
    imgs[size_t(c)].resize(size_t(g.ny) * g.nx);
    image_from_kspace(g.ny, g.nx, &g.data[size_t(c) * g.ny * g.nx],
                      imgs[size_t(c)].data());
  }
  return imgs;
}

} // namespace loraks
