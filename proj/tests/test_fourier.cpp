#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "loraks/fourier.hpp"

using namespace loraks;

namespace {

std::vector<cplx> random_image(int ny, int nx, unsigned seed, bool real_only) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<cplx> img(size_t(ny) * nx);
  for (auto& v : img) v = real_only ? cplx(dist(rng), 0.0) : cplx(dist(rng), dist(rng));
  return img;
}

double energy(const std::vector<cplx>& v) {
  double e = 0;
  for (const auto& z : v) e += std::norm(z);
  return e;
}

} // namespace

TEST_CASE("impulse at the image center transforms to a flat spectrum") {
  for (int ny : {8, 9})
    for (int nx : {8, 7}) {
      std::vector<cplx> img(size_t(ny) * nx, cplx(0, 0));
      img[size_t(ny / 2) * nx + nx / 2] = cplx(1, 0);
      std::vector<cplx> k(img.size());
      kspace_from_image(ny, nx, img.data(), k.data());
      const double want = 1.0 / std::sqrt(double(ny) * nx);
      for (const auto& v : k) {
        CHECK(v.real() == doctest::Approx(want).epsilon(1e-12));
        CHECK(std::abs(v.imag()) < 1e-12);
      }
    }
}

TEST_CASE("single-frequency exponential lands on one k-space sample") {
  const int ny = 16, nx = 16;
  const int fy = 3, fx = -2; // cycles per FOV
  std::vector<cplx> img(size_t(ny) * nx);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const double ph = 2 * std::numbers::pi *
                        (double(fy) * (y - ny / 2) / ny + double(fx) * (x - nx / 2) / nx);
      img[size_t(y) * nx + x] = std::polar(1.0, ph);
    }
  std::vector<cplx> k(img.size());
  kspace_from_image(ny, nx, img.data(), k.data());
  // Pin the convention: a exp(+2*pi*i*f*u/N) image concentrates its energy
  // at index dc + f.
  int peak = 0;
  for (size_t i = 1; i < k.size(); ++i)
    if (std::abs(k[i]) > std::abs(k[size_t(peak)])) peak = int(i);
  const int py = peak / nx, px = peak % nx;
  CHECK(py == ny / 2 + fy);
  CHECK(px == nx / 2 + fx);
  CHECK(std::abs(k[size_t(peak)]) ==
        doctest::Approx(std::sqrt(double(ny) * nx)).epsilon(1e-12));
}

TEST_CASE("transform is unitary and invertible") {
  for (auto [ny, nx] : {std::pair{12, 12}, {15, 10}, {9, 9}}) {
    const auto img = random_image(ny, nx, 77, false);
    std::vector<cplx> k(img.size()), back(img.size());
    kspace_from_image(ny, nx, img.data(), k.data());
    CHECK(energy(k) == doctest::Approx(energy(img)).epsilon(1e-12));
    image_from_kspace(ny, nx, k.data(), back.data());
    for (size_t i = 0; i < img.size(); ++i)
      CHECK(std::abs(back[i] - img[i]) < 1e-12);
  }
}

TEST_CASE("real images give conjugate-symmetric k-space about the dc index") {
  for (auto [ny, nx] : {std::pair{8, 8}, {9, 7}}) {
    const auto img = random_image(ny, nx, 5, true);
    std::vector<cplx> k(img.size());
    kspace_from_image(ny, nx, img.data(), k.data());
    const int dcy = ny / 2, dcx = nx / 2;
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const int my = 2 * dcy - y, mx = 2 * dcx - x;
        if (my < 0 || my >= ny || mx < 0 || mx >= nx) continue;
        const cplx a = k[size_t(y) * nx + x];
        const cplx b = std::conj(k[size_t(my) * nx + mx]);
        CHECK(std::abs(a - b) < 1e-12);
      }
  }
}
