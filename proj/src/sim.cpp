#include "loraks/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "loraks/fourier.hpp"

namespace loraks {

namespace {

constexpr double pi = std::numbers::pi;

// Normalized centered coordinates in [-1, 1] (approximately; exact at the
// index extremes for even dims).
inline double norm_y(int y, int ny) { return (y - ny / 2) / (ny / 2.0); }
inline double norm_x(int x, int nx) { return (x - nx / 2) / (nx / 2.0); }

// Smooth compactly supported bump: exp(1 - 1/(1 - t)) for t < 1, else 0.
inline double bump(double t) {
  return t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
}

} // namespace

Simulator::Simulator(const PhantomSpec& spec) : spec_(spec) {
  if (spec.ny < 8 || spec.nx < 8)
    throw ShapeError("phantom grid must be at least 8x8");
  if (spec.n_ch < 1) throw ParamError("phantom needs at least one channel");
  if (!(spec.support_fraction > 0.0) || spec.support_fraction > 1.0)
    throw ParamError("support_fraction must lie in (0, 1]");
  if (spec.phase_poly_degree < 0 || spec.phase_poly_degree > 6)
    throw ParamError("phase_poly_degree must lie in [0, 6]");

  const int ny = spec.ny, nx = spec.nx;
  const size_t n = size_t(ny) * nx;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // --- magnitude: 3..8 smooth-edged ellipses inside the support box ---
  const double s = spec.support_fraction;
  const int n_ell = 3 + int(rng() % 6);
  struct Ellipse {
    double cy, cx, ay, ax, cs, sn, amp;
  };
  std::vector<Ellipse> ells;
  for (int i = 0; i < n_ell; ++i) {
    Ellipse e;
    e.cy = (unif(rng) * 2 - 1) * 0.55 * s;
    e.cx = (unif(rng) * 2 - 1) * 0.55 * s;
    e.ay = (0.12 + 0.30 * unif(rng)) * s;
    e.ax = (0.12 + 0.30 * unif(rng)) * s;
    const double th = unif(rng) * pi;
    e.cs = std::cos(th);
    e.sn = std::sin(th);
    e.amp = 0.4 + 0.6 * unif(rng);
    ells.push_back(e);
  }
  magnitude_.assign(n, 0.0);
  support_.assign(n, 0);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const double u = norm_y(y, ny), v = norm_x(x, nx);
      double m = 0;
      for (const auto& e : ells) {
        const double du = u - e.cy, dv = v - e.cx;
        const double ru = (e.cs * du + e.sn * dv) / e.ay;
        const double rv = (-e.sn * du + e.cs * dv) / e.ax;
        m += e.amp * bump(ru * ru + rv * rv);
      }
      magnitude_[size_t(y) * nx + x] = m;
      support_[size_t(y) * nx + x] = m > 0.0 ? 1 : 0;
    }

  // --- smooth image phase: random polynomial scaled to 0.6 rad peak ---
  const int deg = spec.phase_poly_degree;
  std::vector<double> coef;
  for (int j = 0; j <= deg; ++j)
    for (int k = 0; j + k <= deg; ++k) coef.push_back(unif(rng) * 2 - 1);
  phase_.assign(n, 0.0);
  double peak = 0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const double u = norm_y(y, ny), v = norm_x(x, nx);
      double ph = 0;
      size_t ci = 0;
      for (int j = 0; j <= deg; ++j)
        for (int k = 0; j + k <= deg; ++k)
          ph += coef[ci++] * std::pow(u, j) * std::pow(v, k);
      phase_[size_t(y) * nx + x] = ph;
      peak = std::max(peak, std::abs(ph));
    }
  if (peak > 0)
    for (auto& ph : phase_) ph *= 0.6 / peak;

  // --- coil maps: Gaussian lobes on a ring, first-order complex ramps ---
  coils_.resize(size_t(spec.n_ch));
  for (int c = 0; c < spec.n_ch; ++c) {
    const double ang = 2 * pi * c / spec.n_ch + (unif(rng) - 0.5) * 0.4;
    const double ringy = 0.55 * std::sin(ang), ringx = 0.55 * std::cos(ang);
    const double sigma = 0.5 + 0.3 * unif(rng);
    const cplx alpha = std::polar(1.0, (unif(rng) * 2 - 1) * pi);
    const cplx beta = std::polar(0.4 * unif(rng), (unif(rng) * 2 - 1) * pi);
    const cplx gamma = std::polar(0.4 * unif(rng), (unif(rng) * 2 - 1) * pi);
    auto& coil = coils_[size_t(c)];
    coil.resize(n);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const double u = norm_y(y, ny), v = norm_x(x, nx);
        const double d2 = (u - ringy) * (u - ringy) + (v - ringx) * (v - ringx);
        const double mag = std::exp(-d2 / (2 * sigma * sigma));
        coil[size_t(y) * nx + x] = mag * (alpha + beta * u + gamma * v);
      }
  }
}

GridPair Simulator::gold(const PolarityModel& pol) const {
  const int ny = spec_.ny, nx = spec_.nx;
  const size_t n = size_t(ny) * nx;
  if (!(pol.scale > 0.0))
    throw ParamError("interpolarity magnitude scale must be positive");

  // Interpolarity phase map: constant + linear + pinned quadratic shape
  // normalized so its own peak equals nonlinear_amp.
  std::vector<double> delta(n);
  double qpeak = 0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const double u = norm_y(y, ny), v = norm_x(x, nx);
      const double q = 0.9 * u * u + 0.7 * u * v - 1.1 * v * v;
      delta[size_t(y) * nx + x] = q;
      qpeak = std::max(qpeak, std::abs(q));
    }
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double& d = delta[size_t(y) * nx + x];
      d = qpeak > 0 ? d / qpeak * pol.nonlinear_amp : 0.0;
      d += pol.phi0 + pol.g_y * (y - ny / 2) + pol.g_x * (x - nx / 2);
    }

  std::vector<std::vector<cplx>> imgs_pos(size_t(spec_.n_ch)),
      imgs_neg(size_t(spec_.n_ch));
  for (int c = 0; c < spec_.n_ch; ++c) {
    imgs_pos[size_t(c)].resize(n);
    imgs_neg[size_t(c)].resize(n);
    for (size_t i = 0; i < n; ++i) {
      const cplx base = magnitude_[i] * std::polar(1.0, phase_[i]) * coils_[size_t(c)][i];
      imgs_pos[size_t(c)][i] = base * std::polar(1.0, -delta[i] / 2);
      imgs_neg[size_t(c)][i] = pol.scale * base * std::polar(1.0, delta[i] / 2);
    }
  }
  return GridPair{
      grid_from_channel_images(imgs_pos, ny, nx, Polarity::positive),
      grid_from_channel_images(imgs_neg, ny, nx, Polarity::negative)};
}

Simulator Simulator::with_hyperintensity(const CorruptionSpec& c) const {
  if (!(c.blob_width > 0.0) || c.blob_width > 0.5)
    throw ParamError("hyperintensity width must lie in (0, 0.5] of the FOV");
  if (c.blob_cy < 0 || c.blob_cy > 1 || c.blob_cx < 0 || c.blob_cx > 1)
    throw ParamError("hyperintensity center must lie inside the FOV");
  Simulator out(*this);
  const int ny = spec_.ny, nx = spec_.nx;
  double peak = 0;
  for (double m : magnitude_) peak = std::max(peak, m);
  const double amp = c.blob_amplitude * (peak > 0 ? peak : 1.0);
  const double by = c.blob_cy * (ny - 1), bx = c.blob_cx * (nx - 1);
  const double w = c.blob_width * std::min(ny, nx);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const double d2 = (y - by) * (y - by) + (x - bx) * (x - bx);
      const double b = amp * std::exp(-d2 / (2 * w * w));
      out.magnitude_[size_t(y) * nx + x] += b;
      if (b > 1e-3 * amp) out.support_[size_t(y) * nx + x] = 1;
    }
  return out;
}

Simulator Simulator::with_inverted_contrast(const CorruptionSpec& c,
                                            double* max_used) const {
  double m = 0;
  if (c.fixed_max) {
    m = *c.fixed_max;
    if (!(m > 0)) throw ParamError("fixed inversion maximum must be positive");
  } else {
    for (size_t i = 0; i < magnitude_.size(); ++i)
      if (support_[i]) m = std::max(m, magnitude_[i]);
  }
  Simulator out(*this);
  for (size_t i = 0; i < magnitude_.size(); ++i)
    if (support_[i]) out.magnitude_[i] = m - magnitude_[i];
  if (max_used) *max_used = m;
  return out;
}

GridPair apply_shot_ghost(const GridPair& g, double ghost_phase) {
  GridPair out = g;
  const cplx f = std::polar(1.0, ghost_phase);
  for (KSpaceGrid* grid : {&out.pos, &out.neg})
    for (int c = 0; c < grid->n_ch; ++c)
      for (int y = 1; y < grid->ny; y += 2)
        for (int x = 0; x < grid->nx; ++x) grid->at(c, y, x) *= f;
  return out;
}

KSpaceGrid to_single_channel(const KSpaceGrid& g, const std::vector<cplx>& w) {
  if (int(w.size()) != g.n_ch)
    throw ShapeError("weight vector length " + std::to_string(w.size()) +
                     " does not match channel count " + std::to_string(g.n_ch));
  double wnorm = 0;
  for (const cplx& v : w) wnorm += std::norm(v);
  if (wnorm == 0.0) throw ParamError("channel weights are all zero");
  KSpaceGrid out(1, g.ny, g.nx, g.polarity);
  for (int c = 0; c < g.n_ch; ++c)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) out.at(0, y, x) += w[size_t(c)] * g.at(c, y, x);
  return out;
}

GridPair to_single_channel(const GridPair& g, const std::vector<cplx>& w) {
  return GridPair{to_single_channel(g.pos, w), to_single_channel(g.neg, w)};
}

SampledEpi sample_epi(const GridPair& gold, int R, PartialFourier pf, int offset) {
  if (!gold.pos.same_shape(gold.neg))
    throw ShapeError("polarity frames differ in shape");
  const auto pattern =
      SamplingPattern::interleaved(gold.pos.ny, R, pf, offset);
  GridPair measured{mask_to_pattern(gold.pos, pattern, Polarity::positive),
                    mask_to_pattern(gold.neg, pattern, Polarity::negative)};
  measured.pos.polarity = Polarity::positive;
  measured.neg.polarity = Polarity::negative;
  return SampledEpi{std::move(measured), pattern};
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "matched") return Scenario::matched;
  if (s == "hyperintensity") return Scenario::hyperintensity;
  if (s == "hyperintensity-acs") return Scenario::hyperintensity_acs;
  if (s == "inverted-contrast") return Scenario::inverted_contrast;
  if (s == "shot-ghost-acs") return Scenario::shot_ghost_acs;
  if (s == "single-channel") return Scenario::single_channel;
  throw ParamError("unknown scenario '" + s +
                   "' (matched, hyperintensity, hyperintensity-acs, "
                   "inverted-contrast, shot-ghost-acs, single-channel)");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::matched: return "matched";
    case Scenario::hyperintensity: return "hyperintensity";
    case Scenario::hyperintensity_acs: return "hyperintensity-acs";
    case Scenario::inverted_contrast: return "inverted-contrast";
    case Scenario::shot_ghost_acs: return "shot-ghost-acs";
    default: return "single-channel";
  }
}

Dataset make_scenario(const ScenarioConfig& cfg) {
  const PhantomSpec spec{cfg.ny, cfg.nx, cfg.n_ch, 0.55, cfg.seed, 2};
  const Simulator base(spec);
  const PolarityModel pol; // pinned defaults
  const GridPair gold_clean = base.gold(pol);

  CorruptionSpec blob;
  blob.kind = CorruptionKind::hyperintensity;

  GridPair epi_src, acs_src;
  switch (cfg.scenario) {
    case Scenario::matched:
      epi_src = gold_clean;
      acs_src = gold_clean;
      break;
    case Scenario::hyperintensity: {
      blob.where = CorruptionTarget::epi;
      epi_src = base.with_hyperintensity(blob).gold(pol);
      acs_src = gold_clean;
      break;
    }
    case Scenario::hyperintensity_acs: {
      blob.where = CorruptionTarget::acs;
      epi_src = gold_clean;
      acs_src = base.with_hyperintensity(blob).gold(pol);
      break;
    }
    case Scenario::inverted_contrast: {
      epi_src = gold_clean;
      acs_src = base.with_inverted_contrast(CorruptionSpec{}).gold(pol);
      break;
    }
    case Scenario::shot_ghost_acs: {
      epi_src = gold_clean;
      acs_src = apply_shot_ghost(gold_clean, CorruptionSpec{}.ghost_phase);
      break;
    }
    case Scenario::single_channel: {
      // Channel-combined data with mismatched, shot-corrupted calibration.
      blob.where = CorruptionTarget::epi;
      const GridPair epi_mc = base.with_hyperintensity(blob).gold(pol);
      const GridPair acs_mc =
          apply_shot_ghost(gold_clean, CorruptionSpec{}.ghost_phase);
      std::mt19937_64 wrng(cfg.seed ^ 0x5eedc011ULL);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::vector<cplx> w(size_t(cfg.n_ch));
      for (auto& v : w)
        v = std::polar(0.6 + 0.4 * unif(wrng), (unif(wrng) * 2 - 1) * pi);
      epi_src = to_single_channel(epi_mc, w);
      acs_src = to_single_channel(acs_mc, w);
      break;
    }
  }

  auto sampled = sample_epi(epi_src, cfg.R, cfg.pf, cfg.offset);
  const auto acs_pattern =
      SamplingPattern::interleaved(cfg.ny, 1, cfg.acs_pf, 0);

  Dataset ds;
  ds.epi = std::move(sampled.measured);
  ds.pattern = std::move(sampled.pattern);
  ds.acs_pattern = acs_pattern;
  ds.acs = GridPair{mask_to_pattern(acs_src.pos, acs_pattern, Polarity::none),
                    mask_to_pattern(acs_src.neg, acs_pattern, Polarity::none)};
  ds.acs.pos.polarity = Polarity::positive;
  ds.acs.neg.polarity = Polarity::negative;
  // The reference is always the (possibly corrupted) truth underlying the
  // EPI acquisition, never the ACS corruption.
  ds.gold = epi_src;
  ds.validate();
  return ds;
}

} // namespace loraks
