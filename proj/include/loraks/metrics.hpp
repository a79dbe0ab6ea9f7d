#pragma once

#include <string>
#include <vector>

#include "loraks/kspace.hpp"

namespace loraks {

// Joint dual-polarity normalized root mean-squared error:
//   sqrt(||e+ - g+||^2 + ||e- - g-||^2) / sqrt(||g+||^2 + ||g-||^2).
double nrmse(const GridPair& estimate, const GridPair& gold);

// Error spectrum over annular k-space bins.  Radius is measured from the
// DC index in cycles/FOV (i.e. index distance); bins are uniform over
// [0, max radius].  A bin's value is sqrt(error energy / gold energy) over
// both polarities and all channels; bins with zero gold energy are marked
// absent.  Bin energies are kept so the curve can be aggregated back into
// the overall NRMSE exactly.
struct EspCurve {
  std::vector<double> radius;       // bin centers
  std::vector<double> value;        // sqrt(err/gold) where present
  std::vector<long> count;          // samples per bin
  std::vector<double> error_energy; // sum |e - g|^2
  std::vector<double> gold_energy;  // sum |g|^2
  std::vector<bool> present;        // gold energy > 0
};

EspCurve esp(const GridPair& estimate, const GridPair& gold, int n_bins = 32);

// Root of the summed squared channel magnitudes of the inverse transforms;
// the usual way to collapse channels and polarities into one image.
struct RealImage {
  int ny = 0, nx = 0;
  std::vector<double> pixel; // row-major
};

RealImage ssos(const std::vector<const KSpaceGrid*>& grids);
RealImage ssos(const GridPair& pair);

// 16-bit binary PGM, max-normalized; deterministic bytes.
void write_pgm16(const std::string& path, const RealImage& img);

// value,count CSV with radius column; 17 significant digits.
void write_esp_csv(const std::string& path, const EspCurve& curve);

// One number, 17 significant digits, trailing newline.
void write_nrmse(const std::string& path, double value);

// Shared formatting helper (17 significant digits round-trip).
std::string format_g17(double v);

} // namespace loraks
