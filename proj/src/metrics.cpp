#include "loraks/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "loraks/errors.hpp"
#include "loraks/fourier.hpp"

namespace loraks {

namespace {

void check_pair(const GridPair& estimate, const GridPair& gold) {
  if (!estimate.pos.same_shape(gold.pos) || !estimate.neg.same_shape(gold.neg))
    throw ShapeError("estimate and reference grids differ in shape");
  if (!estimate.pos.same_shape(estimate.neg))
    throw ShapeError("polarity frames differ in shape");
  estimate.pos.check_finite("estimate (positive)");
  estimate.neg.check_finite("estimate (negative)");
  gold.pos.check_finite("reference (positive)");
  gold.neg.check_finite("reference (negative)");
}

} // namespace

double nrmse(const GridPair& estimate, const GridPair& gold) {
  check_pair(estimate, gold);
  double err = 0, ref = 0;
  for (auto [e, g] : {std::pair{&estimate.pos, &gold.pos},
                      std::pair{&estimate.neg, &gold.neg}}) {
    for (size_t i = 0; i < g->data.size(); ++i) {
      err += std::norm(e->data[i] - g->data[i]);
      ref += std::norm(g->data[i]);
    }
  }
  if (ref == 0.0)
    throw NumericError("reference has zero energy; the error metric is undefined");
  return std::sqrt(err) / std::sqrt(ref);
}

EspCurve esp(const GridPair& estimate, const GridPair& gold, int n_bins) {
  check_pair(estimate, gold);
  if (n_bins < 1) throw ParamError("need at least one spectrum bin");
  const int ny = gold.pos.ny, nx = gold.pos.nx;
  const int dcy = gold.pos.dc_y(), dcx = gold.pos.dc_x();
  double r_max = 0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x)
      r_max = std::max(r_max, std::hypot(double(y - dcy), double(x - dcx)));
  if (r_max == 0.0) r_max = 1.0; // single-sample grid: everything in bin 0

  EspCurve c;
  c.radius.resize(size_t(n_bins));
  c.value.assign(size_t(n_bins), 0.0);
  c.count.assign(size_t(n_bins), 0);
  c.error_energy.assign(size_t(n_bins), 0.0);
  c.gold_energy.assign(size_t(n_bins), 0.0);
  c.present.assign(size_t(n_bins), false);
  for (int b = 0; b < n_bins; ++b)
    c.radius[size_t(b)] = (b + 0.5) * r_max / n_bins;

  for (auto [e, g] : {std::pair{&estimate.pos, &gold.pos},
                      std::pair{&estimate.neg, &gold.neg}}) {
    for (int ch = 0; ch < g->n_ch; ++ch)
      for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
          const double r = std::hypot(double(y - dcy), double(x - dcx));
          int b = int(r / r_max * n_bins);
          b = std::min(b, n_bins - 1);
          c.error_energy[size_t(b)] += std::norm(e->at(ch, y, x) - g->at(ch, y, x));
          c.gold_energy[size_t(b)] += std::norm(g->at(ch, y, x));
          ++c.count[size_t(b)];
        }
  }
  for (int b = 0; b < n_bins; ++b) {
    if (c.gold_energy[size_t(b)] > 0.0) {
      c.present[size_t(b)] = true;
      c.value[size_t(b)] =
          std::sqrt(c.error_energy[size_t(b)] / c.gold_energy[size_t(b)]);
    }
  }
  return c;
}

RealImage ssos(const std::vector<const KSpaceGrid*>& grids) {
  if (grids.empty()) throw ParamError("no grids to combine");
  const int ny = grids[0]->ny, nx = grids[0]->nx;
  RealImage img;
  img.ny = ny;
  img.nx = nx;
  img.pixel.assign(size_t(ny) * nx, 0.0);
  std::vector<cplx> chan(size_t(ny) * nx);
  for (const KSpaceGrid* g : grids) {
    if (g->ny != ny || g->nx != nx)
      throw ShapeError("grids differ in shape");
    g->check_finite("combine input");
    for (int ch = 0; ch < g->n_ch; ++ch) {
      image_from_kspace(ny, nx, &g->at(ch, 0, 0), chan.data());
      for (size_t i = 0; i < chan.size(); ++i)
        img.pixel[i] += std::norm(chan[i]);
    }
  }
  for (double& p : img.pixel) p = std::sqrt(p);
  return img;
}

RealImage ssos(const GridPair& pair) {
  return ssos({&pair.pos, &pair.neg});
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_pgm16(const std::string& path, const RealImage& img) {
  if (img.ny < 1 || img.nx < 1 ||
      img.pixel.size() != size_t(img.ny) * size_t(img.nx))
    throw ShapeError("image dimensions do not match the pixel buffer");
  double peak = 0;
  for (double p : img.pixel) {
    if (!std::isfinite(p) || p < 0)
      throw NumericError("image pixels must be finite and non-negative");
    peak = std::max(peak, p);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "P5\n" << img.nx << " " << img.ny << "\n65535\n";
  for (double p : img.pixel) {
    const unsigned v =
        peak > 0 ? unsigned(std::lround(p / peak * 65535.0)) : 0u;
    const unsigned char hi = (unsigned char)(v >> 8), lo = (unsigned char)(v & 0xff);
    f.put(char(hi));
    f.put(char(lo));
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

void write_esp_csv(const std::string& path, const EspCurve& curve) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "radius,value,count,error_energy,gold_energy\n";
  for (size_t b = 0; b < curve.radius.size(); ++b) {
    f << format_g17(curve.radius[b]) << ",";
    if (curve.present[b])
      f << format_g17(curve.value[b]);
    else
      f << "nan";
    f << "," << curve.count[b] << "," << format_g17(curve.error_energy[b])
      << "," << format_g17(curve.gold_energy[b]) << "\n";
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

void write_nrmse(const std::string& path, double value) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << format_g17(value) << "\n";
  if (!f) throw IoError("short write to '" + path + "'");
}

} // namespace loraks
