#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loraks/errors.hpp"

namespace loraks {

using cplx = std::complex<double>;

// Readout polarity of an EPI frame.  `none` marks grids that are not split
// by polarity (raw interleaved data, gold references loaded standalone).
enum class Polarity : std::uint8_t { none = 0, positive = 1, negative = 2 };

std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

// Multi-channel Cartesian k-space frame.  Storage is row-major over
// (channel, ky, kx); ky indexes phase-encoding lines.  All values must be
// finite.  The DC sample sits at (ny/2, nx/2) (integer division).
struct KSpaceGrid {
  int n_ch = 0;
  int ny = 0;
  int nx = 0;
  Polarity polarity = Polarity::none;
  std::vector<cplx> data;

  KSpaceGrid() = default;
  KSpaceGrid(int n_ch, int ny, int nx, Polarity pol);
  KSpaceGrid(int n_ch, int ny, int nx, Polarity pol, std::vector<cplx> values);

  cplx& at(int c, int y, int x) { return data[size_t((c * ny + y) * nx + x)]; }
  const cplx& at(int c, int y, int x) const {
    return data[size_t((c * ny + y) * nx + x)];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const KSpaceGrid& o) const {
    return n_ch == o.n_ch && ny == o.ny && nx == o.nx;
  }
  // DC line/column indices under the centered convention.
  int dc_y() const { return ny / 2; }
  int dc_x() const { return nx / 2; }

  void check_finite(const std::string& what) const;
};

// Bit-level equality of the payloads (distinguishes -0.0 from +0.0).
bool bitwise_equal(const KSpaceGrid& a, const KSpaceGrid& b);

// Partial-Fourier fraction.  Only 1, 7/8, 6/8 and 5/8 are supported.
struct PartialFourier {
  int num = 1;
  int den = 1;
  PartialFourier() = default;
  PartialFourier(int num, int den);
  bool full() const { return num == den; }
  double value() const { return double(num) / double(den); }
};

PartialFourier parse_partial_fourier(const std::string& text);

// Per-line acquisition state: 0 = not acquired, 1 = acquired with positive
// readout polarity, 2 = acquired with negative polarity.
enum : std::uint8_t { line_skipped = 0, line_positive = 1, line_negative = 2 };

// Interleaved dual-polarity EPI sampling along ky.  With acceleration R and
// line offset o, positive-polarity lines satisfy l === o (mod 2R) and
// negative-polarity lines l === o+R (mod 2R); a partial-Fourier fraction
// keeps only lines l >= floor((1-pf)*ny).  Each polarity is hit every 2R
// lines, so the per-polarity acceleration is 2R.
struct SamplingPattern {
  int ny = 0;
  int R = 1;
  PartialFourier pf;
  int offset = 0;
  std::vector<std::uint8_t> line_state; // derived; size ny

  static SamplingPattern interleaved(int ny, int R, PartialFourier pf, int offset);
  // All lines acquired (R=1, pf=1, offset=0); used for fully sampled data.
  static SamplingPattern full(int ny);

  bool acquired(int line) const;
  // Polarity of an acquired line; Polarity::none if skipped.
  Polarity polarity_of(int line) const;
  std::vector<int> lines_with(Polarity pol) const;
  int first_window_line() const; // floor((1-pf)*ny)
  int n_acquired() const;

  bool operator==(const SamplingPattern& o) const;
};

struct GridPair {
  KSpaceGrid pos;
  KSpaceGrid neg;
};

// Scatter the acquired lines of a raw interleaved frame into per-polarity
// grids of the same shape (zeros on the lines each polarity does not own).
GridPair split_interleaved(const KSpaceGrid& raw, const SamplingPattern& pattern);

// Zero every line of `g` that `pattern` does not assign to `keep`; for ACS
// grids (keep == none) every acquired line is kept regardless of label.
KSpaceGrid mask_to_pattern(const KSpaceGrid& g, const SamplingPattern& pattern,
                           Polarity keep);

// One reconstruction problem: undersampled dual-polarity EPI frames, an
// autocalibration pair with its own sampling, and (for simulated data) the
// fully sampled reference the estimate is scored against.
struct Dataset {
  GridPair epi;
  SamplingPattern pattern;
  GridPair acs;
  SamplingPattern acs_pattern;
  std::optional<GridPair> gold;

  // Throws ShapeError / ParamError / NumericError on inconsistency:
  // shape or channel mismatches, data on unacquired lines, wrong polarity
  // tags, non-finite values.
  void validate() const;
};

} // namespace loraks
