#pragma once

#include <optional>
#include <string>
#include <vector>

#include "loraks/kspace.hpp"

namespace loraks {

// Deterministic synthetic phantom: a handful of smooth-edged ellipses with
// random intensities, a smooth polynomial image phase, and per-channel
// complex coil profiles.  The seed fully determines every map.
struct PhantomSpec {
  int ny = 32;
  int nx = 32;
  int n_ch = 8;
  double support_fraction = 0.55; // widest extent of the ellipse cluster
  unsigned long long seed = 1;
  int phase_poly_degree = 2;
};

// Interpolarity phase/magnitude model.  The phase map is
//   delta(y, x) = phi0 + g_y*(y - cy) + g_x*(x - cx) + nonlinear(y, x)
// in radians with the nonlinear part a fixed degree-2 polynomial shaped so
// max |nonlinear| = nonlinear_amp.  The positive/negative images are
// modulated by exp(-/+ i*delta/2); `scale` multiplies the negative image.
struct PolarityModel {
  double phi0 = 0.25;
  double g_y = 0.015; // radians per pixel
  double g_x = 0.02;
  double nonlinear_amp = 0.9;
  double scale = 1.0;
};

enum class CorruptionKind { none, hyperintensity, inverted_contrast, shot_ghost };
enum class CorruptionTarget { epi, acs };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::none;
  CorruptionTarget where = CorruptionTarget::acs;
  // hyperintensity blob, in fractional FOV units
  double blob_cy = 0.62;
  double blob_cx = 0.58;
  double blob_width = 0.09;
  double blob_amplitude = 0.5; // relative to the phantom's peak magnitude
  // shot_ghost
  double ghost_phase = 0.5; // radians on alternate lines
  // inverted_contrast: reuse this maximum instead of recomputing (set by a
  // first application, makes the operation an involution)
  std::optional<double> fixed_max;
};

// Generates image-domain maps once and turns them into k-space frames.
class Simulator {
 public:
  explicit Simulator(const PhantomSpec& spec);

  const PhantomSpec& spec() const { return spec_; }
  const std::vector<double>& magnitude() const { return magnitude_; }
  const std::vector<double>& phase() const { return phase_; }
  const std::vector<cplx>& coil(int c) const { return coils_[size_t(c)]; }
  const std::vector<std::uint8_t>& support() const { return support_; }

  // Fully sampled dual-polarity frames of the current maps.
  GridPair gold(const PolarityModel& pol) const;

  // Image-domain corruptions returning a modified copy of the simulator.
  // The hyperintensity blob is added to the magnitude map, so it follows
  // the coil maps and the local phase exactly like real anatomy.
  Simulator with_hyperintensity(const CorruptionSpec& c) const;
  // Replaces magnitude by (max - magnitude) inside the support; echoes the
  // max used through `max_used` so a second application can undo it.
  Simulator with_inverted_contrast(const CorruptionSpec& c,
                                   double* max_used = nullptr) const;

 private:
  PhantomSpec spec_;
  std::vector<double> magnitude_;      // ny*nx
  std::vector<double> phase_;          // radians
  std::vector<std::uint8_t> support_;  // 1 inside the phantom
  std::vector<std::vector<cplx>> coils_;

  Simulator() = default;
};

// k-space corruption: multiplies alternate (odd) phase-encode lines of both
// grids by exp(i*ghost_phase).
GridPair apply_shot_ghost(const GridPair& g, double ghost_phase);

// Collapse the channel dimension by a fixed complex linear combination.
KSpaceGrid to_single_channel(const KSpaceGrid& g, const std::vector<cplx>& w);
GridPair to_single_channel(const GridPair& g, const std::vector<cplx>& w);

// Apply the interleaved dual-polarity pattern to fully sampled frames.
struct SampledEpi {
  GridPair measured;
  SamplingPattern pattern;
};
SampledEpi sample_epi(const GridPair& gold, int R, PartialFourier pf, int offset);

// Named end-to-end scenarios for experiments and the CLI.
enum class Scenario {
  matched,            // pristine ACS identical in contrast to the EPI data
  hyperintensity,     // additive blob in the EPI data only
  hyperintensity_acs, // additive blob in the ACS data only
  inverted_contrast,  // ACS magnitude inverted
  shot_ghost_acs,     // ACS with alternating-line phase error
  single_channel      // channel-combined data, blob in EPI + ghosted ACS
};

Scenario scenario_from_string(const std::string& s);
std::string to_string(Scenario s);

struct ScenarioConfig {
  Scenario scenario = Scenario::matched;
  int ny = 32, nx = 32, n_ch = 8;
  int R = 2;
  PartialFourier pf;
  int offset = 0;
  PartialFourier acs_pf; // partial-Fourier window on the ACS prescan
  unsigned long long seed = 1;
};

// Simulate a full dataset: gold frames, interleaved EPI measurements, fully
// sampled (optionally windowed) ACS, and the evaluation reference.  The
// gold pair always matches the EPI contrast, so ACS-side corruption
// scenarios score reconstructions against the uncorrupted truth.
Dataset make_scenario(const ScenarioConfig& cfg);

} // namespace loraks
