#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "loraks/kspace.hpp"

namespace loraks {

enum class Method { rac, ac, zerofill };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// r: rank of the low-rank S-side penalty; p: dimension of the C-side
// nullspace.  Zero means "choose from the ACS singular-value curves".
struct RankPlan {
  int r = 0;
  int p = 0;
};

struct ReconConfig {
  double lambda = 1e-3; // S-penalty weight, relative to data scale
  double eta = 1e-3;    // ACS-trust weight inside the C stack
  RankPlan ranks;
  int radius = 2;       // lifting neighborhood radius
  int max_outer = 100;
  double tol = 1e-6;    // relative objective-change stop threshold
  int cg_max = 250;
  double cg_tol = 1e-8; // relative residual for the inner data step
  bool optimize_acs = false;
};

// A ReconConfig with every data-dependent quantity materialized: the
// effective S weight, the rank plan actually used, and the method.
struct ResolvedConfig {
  ReconConfig base;
  Method method = Method::rac;
  double lambda_eff = 0.0;
  int r = 0, p = 0;
  bool r_auto = false, p_auto = false;
};

struct ReconResult {
  GridPair k;
  std::optional<GridPair> acs; // populated when optimize_acs
  std::vector<double> objective_trace;
  int iterations_used = 0;
  bool converged = false;
  ResolvedConfig config;
  // Per-outer-iteration diagnostics of the C-side subspace.
  std::vector<double> nullspace_defect; // ||N^H N - I||_F
  std::vector<Eigen::MatrixXcd> nullspace_history;
};

// Materialize lambda_eff and auto ranks for a dataset.  The effective S
// weight is base.lambda * E_C / E_S where E_C (E_S) sums the squared
// Frobenius norms of the unweighted C (S) liftings of the method's grids
// at the zero-filled starting point; this keeps one lambda meaningful
// across phantom sizes.  Auto ranks come from suggest_rank on the ACS
// lifting spectra.
ResolvedConfig resolve_config(const Dataset& ds, const ReconConfig& cfg,
                              Method method);

// The full objective the iterates are scored with: the tail spectrum energy
// of the row-stacked [C(k+); C(k-); sqrt(eta) C(a+); sqrt(eta) C(a-)] past
// rank (cols - p), plus lambda_eff times the tail energy of the
// column-concatenated [S(k+) S(k-) S(a+) S(a-)] past rank r.
double joint_objective(const KSpaceGrid& kp, const KSpaceGrid& kn,
                     const KSpaceGrid& ap, const KSpaceGrid& an,
                     const ResolvedConfig& cfg);

// Joint dual-polarity reconstruction with rank-regularized autocalibration:
// alternates trailing-subspace updates for both liftings with a conjugate-
// gradient data step over the unmeasured entries (and the unmeasured ACS
// entries when optimize_acs is set).  Measured samples are copied through
// bit-exactly.
ReconResult rac_loraks(const Dataset& ds, const ReconConfig& cfg,
                       const GridPair* init = nullptr);

// Baseline with the C-side nullspace fixed from the (fully sampled) ACS
// pair and the S penalty over the EPI pair only.
ReconResult ac_loraks(const Dataset& ds, const ReconConfig& cfg,
                      const GridPair* init = nullptr);

// Measured data with zeros elsewhere.
ReconResult zero_fill(const Dataset& ds);

// Ghost-ignorant starting point for the joint solver: each polarity grid
// keeps its own measured lines and borrows the other polarity's measured
// lines for its missing ones; lines acquired by neither stay zero.  At R=1
// this interleaves both polarities into one full grid per side, which
// avoids the all-zero-line degeneracy a zero-fill start hands the first
// subspace estimate.
GridPair shared_line_init(const Dataset& ds);

} // namespace loraks
