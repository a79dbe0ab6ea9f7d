#include "loraks/kspace.hpp"

#include <cmath>
#include <cstring>

namespace loraks {

std::string to_string(Polarity p) {
  switch (p) {
    case Polarity::positive: return "pos";
    case Polarity::negative: return "neg";
    default: return "none";
  }
}

Polarity polarity_from_string(const std::string& s) {
  if (s == "pos") return Polarity::positive;
  if (s == "neg") return Polarity::negative;
  if (s == "none") return Polarity::none;
  throw ParamError("unknown polarity '" + s + "' (expected pos, neg or none)");
}

KSpaceGrid::KSpaceGrid(int n_ch_, int ny_, int nx_, Polarity pol)
    : n_ch(n_ch_), ny(ny_), nx(nx_), polarity(pol) {
  if (n_ch < 1 || ny < 1 || nx < 1)
    throw ShapeError("k-space grid dimensions must be positive (got nch=" +
                     std::to_string(n_ch) + ", ny=" + std::to_string(ny) +
                     ", nx=" + std::to_string(nx) + ")");
  data.assign(size_t(n_ch) * ny * nx, cplx(0.0, 0.0));
}

KSpaceGrid::KSpaceGrid(int n_ch_, int ny_, int nx_, Polarity pol,
                       std::vector<cplx> values)
    : KSpaceGrid(n_ch_, ny_, nx_, pol) {
  if (values.size() != data.size())
    throw ShapeError("k-space payload size " + std::to_string(values.size()) +
                     " does not match nch*ny*nx = " + std::to_string(data.size()));
  data = std::move(values);
  check_finite("k-space grid");
}

void KSpaceGrid::check_finite(const std::string& what) const {
  for (const cplx& v : data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericError(what + " contains non-finite values");
}

bool bitwise_equal(const KSpaceGrid& a, const KSpaceGrid& b) {
  if (!a.same_shape(b) || a.polarity != b.polarity) return false;
  return std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(cplx)) == 0;
}

PartialFourier::PartialFourier(int num_, int den_) : num(num_), den(den_) {
  const bool ok = (num == 1 && den == 1) ||
                  (den == 8 && (num == 7 || num == 6 || num == 5));
  if (!ok)
    throw ParamError("unsupported partial-Fourier fraction " +
                     std::to_string(num) + "/" + std::to_string(den) +
                     " (supported: 1, 7/8, 6/8, 5/8)");
}

PartialFourier parse_partial_fourier(const std::string& text) {
  if (text == "1") return PartialFourier(1, 1);
  const auto slash = text.find('/');
  if (slash == std::string::npos)
    throw ParamError("partial-Fourier fraction must be '1' or 'num/den', got '" +
                     text + "'");
  try {
    const int num = std::stoi(text.substr(0, slash));
    const int den = std::stoi(text.substr(slash + 1));
    return PartialFourier(num, den);
  } catch (const ParamError&) {
    throw;
  } catch (const std::exception&) {
    throw ParamError("cannot parse partial-Fourier fraction '" + text + "'");
  }
}

SamplingPattern SamplingPattern::interleaved(int ny, int R, PartialFourier pf,
                                             int offset) {
  if (ny < 1) throw ShapeError("sampling pattern needs ny >= 1");
  if (R < 1) throw ParamError("acceleration factor must be >= 1, got " +
                              std::to_string(R));
  if (offset < 0 || offset >= 2 * R)
    throw ParamError("line offset must lie in [0, 2R), got " +
                     std::to_string(offset));
  SamplingPattern p;
  p.ny = ny;
  p.R = R;
  p.pf = pf;
  p.offset = offset;
  p.line_state.assign(size_t(ny), line_skipped);
  const int window = p.first_window_line();
  for (int l = window; l < ny; ++l) {
    const int phase = ((l - offset) % (2 * R) + 2 * R) % (2 * R);
    if (phase == 0)
      p.line_state[size_t(l)] = line_positive;
    else if (phase == R)
      p.line_state[size_t(l)] = line_negative;
  }
  return p;
}

SamplingPattern SamplingPattern::full(int ny) {
  return interleaved(ny, 1, PartialFourier(1, 1), 0);
}

int SamplingPattern::first_window_line() const {
  // floor((1 - pf) * ny) computed in exact integer arithmetic.
  return ((pf.den - pf.num) * ny) / pf.den;
}

bool SamplingPattern::acquired(int line) const {
  if (line < 0 || line >= ny)
    throw ShapeError("line index " + std::to_string(line) + " outside [0, " +
                     std::to_string(ny) + ")");
  return line_state[size_t(line)] != line_skipped;
}

Polarity SamplingPattern::polarity_of(int line) const {
  if (line < 0 || line >= ny)
    throw ShapeError("line index " + std::to_string(line) + " outside [0, " +
                     std::to_string(ny) + ")");
  return static_cast<Polarity>(line_state[size_t(line)]);
}

std::vector<int> SamplingPattern::lines_with(Polarity pol) const {
  std::vector<int> out;
  for (int l = 0; l < ny; ++l)
    if (line_state[size_t(l)] == static_cast<std::uint8_t>(pol)) out.push_back(l);
  return out;
}

int SamplingPattern::n_acquired() const {
  int n = 0;
  for (auto s : line_state)
    if (s != line_skipped) ++n;
  return n;
}

bool SamplingPattern::operator==(const SamplingPattern& o) const {
  return ny == o.ny && R == o.R && pf.num == o.pf.num && pf.den == o.pf.den &&
         offset == o.offset && line_state == o.line_state;
}

GridPair split_interleaved(const KSpaceGrid& raw, const SamplingPattern& pattern) {
  if (raw.ny != pattern.ny)
    throw ShapeError("raw grid has ny=" + std::to_string(raw.ny) +
                     " but the sampling pattern covers ny=" +
                     std::to_string(pattern.ny));
  GridPair out{KSpaceGrid(raw.n_ch, raw.ny, raw.nx, Polarity::positive),
               KSpaceGrid(raw.n_ch, raw.ny, raw.nx, Polarity::negative)};
  for (int c = 0; c < raw.n_ch; ++c)
    for (int y = 0; y < raw.ny; ++y) {
      const Polarity pol = pattern.polarity_of(y);
      if (pol == Polarity::none) continue;
      KSpaceGrid& dst = (pol == Polarity::positive) ? out.pos : out.neg;
      for (int x = 0; x < raw.nx; ++x) dst.at(c, y, x) = raw.at(c, y, x);
    }
  return out;
}

KSpaceGrid mask_to_pattern(const KSpaceGrid& g, const SamplingPattern& pattern,
                           Polarity keep) {
  if (g.ny != pattern.ny)
    throw ShapeError("grid/pattern ny mismatch in mask_to_pattern");
  KSpaceGrid out(g.n_ch, g.ny, g.nx, g.polarity);
  for (int c = 0; c < g.n_ch; ++c)
    for (int y = 0; y < g.ny; ++y) {
      const Polarity pol = pattern.polarity_of(y);
      const bool keep_line =
          (keep == Polarity::none) ? pol != Polarity::none : pol == keep;
      if (!keep_line) continue;
      for (int x = 0; x < g.nx; ++x) out.at(c, y, x) = g.at(c, y, x);
    }
  return out;
}

namespace {

void check_masked(const KSpaceGrid& g, const SamplingPattern& pattern,
                  Polarity keep, const std::string& name) {
  for (int c = 0; c < g.n_ch; ++c)
    for (int y = 0; y < g.ny; ++y) {
      const Polarity pol = pattern.polarity_of(y);
      const bool owned =
          (keep == Polarity::none) ? pol != Polarity::none : pol == keep;
      if (owned) continue;
      for (int x = 0; x < g.nx; ++x)
        if (g.at(c, y, x) != cplx(0.0, 0.0))
          throw ParamError(name + " holds data on line " + std::to_string(y) +
                           " which its sampling pattern does not acquire");
    }
}

} // namespace

void Dataset::validate() const {
  if (!epi.pos.same_shape(epi.neg))
    throw ShapeError("positive and negative EPI frames differ in shape");
  if (epi.pos.polarity != Polarity::positive ||
      epi.neg.polarity != Polarity::negative)
    throw ParamError("EPI frames carry wrong polarity tags");
  if (pattern.ny != epi.pos.ny)
    throw ShapeError("EPI sampling pattern ny does not match the frames");
  if (!acs.pos.same_shape(acs.neg))
    throw ShapeError("positive and negative ACS frames differ in shape");
  if (acs.pos.n_ch != epi.pos.n_ch)
    throw ShapeError("ACS channel count differs from the EPI data");
  if (acs_pattern.ny != acs.pos.ny)
    throw ShapeError("ACS sampling pattern ny does not match the ACS frames");
  epi.pos.check_finite("positive EPI frame");
  epi.neg.check_finite("negative EPI frame");
  acs.pos.check_finite("positive ACS frame");
  acs.neg.check_finite("negative ACS frame");
  check_masked(epi.pos, pattern, Polarity::positive, "positive EPI frame");
  check_masked(epi.neg, pattern, Polarity::negative, "negative EPI frame");
  // ACS frames are measured wherever the ACS pattern acquires a line,
  // regardless of the polarity label on that line.
  check_masked(acs.pos, acs_pattern, Polarity::none, "positive ACS frame");
  check_masked(acs.neg, acs_pattern, Polarity::none, "negative ACS frame");
  if (gold) {
    if (!gold->pos.same_shape(epi.pos) || !gold->neg.same_shape(epi.neg))
      throw ShapeError("gold reference shape differs from the EPI frames");
    gold->pos.check_finite("positive gold reference");
    gold->neg.check_finite("negative gold reference");
  }
}

} // namespace loraks
