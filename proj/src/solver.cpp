#include "loraks/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "loraks/errors.hpp"
#include "loraks/operators.hpp"
#include "loraks/subspace.hpp"

namespace loraks {

std::string to_string(Method m) {
  switch (m) {
    case Method::rac: return "rac-loraks";
    case Method::ac: return "ac-loraks";
    default: return "zero-fill";
  }
}

Method method_from_string(const std::string& s) {
  if (s == "rac-loraks") return Method::rac;
  if (s == "ac-loraks") return Method::ac;
  if (s == "zero-fill") return Method::zerofill;
  throw ParamError("unknown method '" + s +
                   "' (rac-loraks, ac-loraks, zero-fill)");
}

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using detail::LiftPlan;

// Slot order throughout: 0 = k+, 1 = k-, 2 = a+, 3 = a-.
constexpr int kSlots = 4;

void check_params(const ReconConfig& cfg) {
  if (cfg.lambda < 0) throw ParamError("lambda must be non-negative");
  if (!(cfg.eta > 0)) throw ParamError("eta must be positive");
  if (cfg.radius < 1) throw ParamError("neighborhood radius must be >= 1");
  if (cfg.max_outer < 1) throw ParamError("max_outer must be >= 1");
  if (cfg.tol < 0) throw ParamError("tol must be non-negative");
  if (cfg.cg_max < 1) throw ParamError("cg_max must be >= 1");
  if (!(cfg.cg_tol > 0)) throw ParamError("cg_tol must be positive");
  if (cfg.ranks.r < 0 || cfg.ranks.p < 0)
    throw ParamError("ranks must be non-negative (0 selects them automatically)");
}

// Sum of the q smallest eigenvalues (ascending input), clamped at zero so
// roundoff-negative Gram eigenvalues cannot produce a negative energy.
double tail_sum(const VectorXd& ascending, int q) {
  double s = 0;
  for (int i = 0; i < q && i < ascending.size(); ++i)
    s += std::max(ascending[i], 0.0);
  return s;
}

struct Slot {
  const KSpaceGrid* grid = nullptr;  // measured data
  double c_weight = 1.0;             // weight of this block in the C stack
  std::vector<std::uint8_t> free_line; // per-ky line: 1 = unknown, optimized
  bool any_free = false;
};

// Buffers for one four-slot iterate/direction: raw per-slot planes.
using SlotData = std::array<std::vector<cplx>, kSlots>;

struct System {
  Method method = Method::rac;
  int n_ch = 0, ny = 0, nx = 0;
  std::vector<int> active; // slots participating in the objective
  std::array<Slot, kSlots> slot;
  std::unique_ptr<LiftPlan> plan; // shared: all active grids have equal dims
  double lambda_eff = 0;
  int r = 0, p = 0;

  int cols_c() const { return plan->cols_c(n_ch); }
  int cols_s() const { return plan->cols_s(n_ch); }
  int rows_c() const { return plan->rows_c(); }
  int rows_s() const { return plan->rows_s(); }
  size_t plane() const { return size_t(ny) * nx; }
  size_t total() const { return size_t(n_ch) * plane(); }
};

void zero_fixed_lines(const System& sys, int g, std::vector<cplx>& buf) {
  const auto& fl = sys.slot[size_t(g)].free_line;
  for (int c = 0; c < sys.n_ch; ++c)
    for (int y = 0; y < sys.ny; ++y) {
      if (fl[size_t(y)]) continue;
      cplx* row = buf.data() + (size_t(c) * sys.ny + y) * sys.nx;
      std::fill(row, row + sys.nx, cplx(0.0, 0.0));
    }
}

double dot_real(const SlotData& a, const SlotData& b, const System& sys) {
  double s = 0;
  for (int g : sys.active) {
    const auto& ag = a[size_t(g)];
    const auto& bg = b[size_t(g)];
    for (size_t i = 0; i < ag.size(); ++i)
      s += ag[i].real() * bg[i].real() + ag[i].imag() * bg[i].imag();
  }
  return s;
}

// Scratch matrices reused across conjugate-gradient iterations.  The
// iterate's own liftings (c_lift / s_stack) are kept separate from the
// perturbation's (c_pert / s_pert) so the right-hand side can reuse the
// Gram-stage lifts; s_pert blocks of slots without free lines stay zero.
struct Scratch {
  std::array<MatrixXcd, kSlots> c_lift, c_pert;
  MatrixXd s_stack;  // rows_s x (n_active * cols_s), slot blocks in order
  MatrixXd s_pert;
  MatrixXd w;        // rows_s x r
  MatrixXd s_term;   // rows_s x cols_s
  MatrixXcd c_term;  // rows_c x cols_c

  void init(const System& sys) {
    for (int g : sys.active) {
      c_lift[size_t(g)].resize(sys.rows_c(), sys.cols_c());
      if (sys.slot[size_t(g)].any_free)
        c_pert[size_t(g)].resize(sys.rows_c(), sys.cols_c());
    }
    s_stack.resize(sys.rows_s(), int(sys.active.size()) * sys.cols_s());
    s_pert = MatrixXd::Zero(sys.rows_s(), int(sys.active.size()) * sys.cols_s());
    s_term.resize(sys.rows_s(), sys.cols_s());
    c_term.resize(sys.rows_c(), sys.cols_c());
  }
};

// One application of the surrogate's (half-)Hessian to a free-supported
// perturbation `d`, restricted back to the free entries:
//   out_g = P_g [ w_g Ac*( C(d_g) N N^H )
//                 + lambda As*( S(d_g) - (sum_h S(d_h) V_h) V_g^T ) ].
// The S part combines the Frobenius term and the cross-slot coupling into a
// single adjoint so the operator is self-adjoint to machine precision.
// Slots without free lines carry no perturbation: their liftings are
// skipped and their `out` entries are left untouched (callers keep them at
// zero).
void apply_hessian(const System& sys, const MatrixXcd& gram_n,
                   const MatrixXd& v, const SlotData& d, SlotData& out,
                   Scratch& sc) {
  const int cs = sys.cols_s();
  const bool with_s = sys.lambda_eff > 0;
  for (size_t a = 0; a < sys.active.size(); ++a) {
    const int g = sys.active[a];
    if (!sys.slot[size_t(g)].any_free) continue;
    sys.plan->lift_c(d[size_t(g)].data(), sys.n_ch, sc.c_pert[size_t(g)]);
    if (with_s) {
      auto block = sc.s_pert.middleCols(int(a) * cs, cs);
      sys.plan->lift_s(d[size_t(g)].data(), sys.n_ch, block);
    }
  }
  if (with_s) {
    // W = sum over free slots of S(d_g) V_g; fixed-slot blocks of s_pert are
    // structurally zero, so they contribute nothing and are skipped.
    sc.w.setZero();
    for (size_t a = 0; a < sys.active.size(); ++a) {
      const int g = sys.active[a];
      if (!sys.slot[size_t(g)].any_free) continue;
      sc.w.noalias() += sc.s_pert.middleCols(int(a) * cs, cs) *
                        v.middleRows(int(a) * cs, cs);
    }
  }
  for (size_t a = 0; a < sys.active.size(); ++a) {
    const int g = sys.active[a];
    if (!sys.slot[size_t(g)].any_free) continue;
    auto& og = out[size_t(g)];
    std::fill(og.begin(), og.end(), cplx(0.0, 0.0));
    sc.c_term.noalias() = sc.c_pert[size_t(g)] * gram_n;
    sc.c_term *= sys.slot[size_t(g)].c_weight;
    sys.plan->adjoint_c_accum(sc.c_term, sys.n_ch, og.data());
    if (with_s) {
      sc.s_term.noalias() =
          sc.w * v.middleRows(int(a) * cs, cs).transpose();
      sc.s_term = sys.lambda_eff * (sc.s_pert.middleCols(int(a) * cs, cs) - sc.s_term);
      sys.plan->adjoint_s_accum(sc.s_term, sys.n_ch, og.data());
    }
    zero_fixed_lines(sys, g, og);
  }
}

// Minimizes the surrogate over the free entries by conjugate gradients on
// the normal equations, warm-started at the current iterate (delta = 0), so
// every inner step can only lower the surrogate.
void data_step(const System& sys, const MatrixXcd& gram_n, const MatrixXd& v,
               const SlotData& b, SlotData& x, Scratch& sc, int cg_max,
               double cg_tol) {
  SlotData delta, res, dir, hdir;
  for (int g : sys.active) {
    delta[size_t(g)].assign(sys.total(), cplx(0.0, 0.0));
    res[size_t(g)] = b[size_t(g)];
    dir[size_t(g)] = b[size_t(g)];
    hdir[size_t(g)].assign(sys.total(), cplx(0.0, 0.0));
  }
  double rs = dot_real(res, res, sys);
  const double rs_stop = rs * cg_tol * cg_tol;
  if (!(rs > 0)) return;
  for (int it = 0; it < cg_max; ++it) {
    apply_hessian(sys, gram_n, v, dir, hdir, sc);
    const double den = dot_real(dir, hdir, sys);
    if (!std::isfinite(den))
      throw NumericError("conjugate-gradient step diverged at inner iteration " +
                         std::to_string(it));
    if (den <= 0) break; // flat direction: nothing further to gain
    const double alpha = rs / den;
    for (int g : sys.active) {
      auto& dg = delta[size_t(g)];
      const auto& pg = dir[size_t(g)];
      const auto& hg = hdir[size_t(g)];
      auto& rg = res[size_t(g)];
      for (size_t i = 0; i < dg.size(); ++i) {
        dg[i] += alpha * pg[i];
        rg[i] -= alpha * hg[i];
      }
    }
    const double rs_new = dot_real(res, res, sys);
    if (!std::isfinite(rs_new))
      throw NumericError("conjugate-gradient residual diverged at inner iteration " +
                         std::to_string(it));
    if (rs_new <= rs_stop) break;
    const double beta = rs_new / rs;
    for (int g : sys.active) {
      auto& pg = dir[size_t(g)];
      const auto& rg = res[size_t(g)];
      for (size_t i = 0; i < pg.size(); ++i) pg[i] = rg[i] + beta * pg[i];
    }
    rs = rs_new;
  }
  // Commit only the free lines; measured samples keep their exact bits.
  for (int g : sys.active) {
    const auto& fl = sys.slot[size_t(g)].free_line;
    auto& xg = x[size_t(g)];
    const auto& dg = delta[size_t(g)];
    for (int c = 0; c < sys.n_ch; ++c)
      for (int y = 0; y < sys.ny; ++y) {
        if (!fl[size_t(y)]) continue;
        const size_t off = (size_t(c) * sys.ny + y) * sys.nx;
        for (int xx = 0; xx < sys.nx; ++xx) xg[off + xx] += dg[off + xx];
      }
  }
}

std::vector<std::uint8_t> epi_free_lines(const SamplingPattern& pat,
                                         std::uint8_t own_state) {
  std::vector<std::uint8_t> free_line(size_t(pat.ny), 1);
  for (int y = 0; y < pat.ny; ++y)
    if (pat.line_state[size_t(y)] == own_state) free_line[size_t(y)] = 0;
  return free_line;
}

std::vector<std::uint8_t> acs_free_lines(const SamplingPattern& pat,
                                         bool optimize) {
  std::vector<std::uint8_t> free_line(size_t(pat.ny), 0);
  if (optimize)
    for (int y = 0; y < pat.ny; ++y)
      if (!pat.acquired(y)) free_line[size_t(y)] = 1;
  return free_line;
}

bool acs_fully_sampled(const SamplingPattern& pat) {
  for (int y = 0; y < pat.ny; ++y)
    if (!pat.acquired(y)) return false;
  return true;
}

// Unweighted squared Frobenius energies of the C and S liftings of the
// grids a method sees at its zero-filled start.
void lifting_energies(const std::vector<const KSpaceGrid*>& grids, int radius,
                      double* e_c, double* e_s) {
  *e_c = 0;
  *e_s = 0;
  const Neighborhood nb = Neighborhood::ball(radius);
  for (const KSpaceGrid* g : grids) {
    LiftPlan plan(g->ny, g->nx, nb);
    MatrixXcd c(plan.rows_c(), plan.cols_c(g->n_ch));
    c.setZero();
    plan.lift_c(g->data.data(), g->n_ch, c);
    *e_c += c.squaredNorm();
    MatrixXd s(plan.rows_s(), plan.cols_s(g->n_ch));
    s.setZero();
    plan.lift_s(g->data.data(), g->n_ch, s);
    *e_s += s.squaredNorm();
  }
}

// Gram matrix of the row-stacked C liftings of the ACS pair (used both for
// the fixed baseline nullspace and for the automatic rank choices).
MatrixXcd acs_c_gram(const Dataset& ds, int radius) {
  const Neighborhood nb = Neighborhood::ball(radius);
  LiftPlan plan(ds.acs.pos.ny, ds.acs.pos.nx, nb);
  const int n_ch = ds.acs.pos.n_ch;
  MatrixXcd c(plan.rows_c(), plan.cols_c(n_ch));
  MatrixXcd gram = MatrixXcd::Zero(plan.cols_c(n_ch), plan.cols_c(n_ch));
  for (const KSpaceGrid* g : {&ds.acs.pos, &ds.acs.neg}) {
    c.setZero();
    plan.lift_c(g->data.data(), n_ch, c);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(c.adjoint(), 1.0);
  }
  return MatrixXcd(gram.selfadjointView<Eigen::Lower>());
}

MatrixXd acs_s_gram(const Dataset& ds, int radius) {
  const Neighborhood nb = Neighborhood::ball(radius);
  LiftPlan plan(ds.acs.pos.ny, ds.acs.pos.nx, nb);
  const int n_ch = ds.acs.pos.n_ch;
  const int cs = plan.cols_s(n_ch);
  MatrixXd s(plan.rows_s(), 2 * cs);
  s.setZero();
  plan.lift_s(ds.acs.pos.data.data(), n_ch, s.middleCols(0, cs));
  plan.lift_s(ds.acs.neg.data.data(), n_ch, s.middleCols(cs, cs));
  MatrixXd gram = MatrixXd::Zero(2 * cs, 2 * cs);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(s.transpose(), 1.0);
  return MatrixXd(gram.selfadjointView<Eigen::Lower>());
}

System make_system(const Dataset& ds, const ResolvedConfig& rc) {
  System sys;
  sys.method = rc.method;
  sys.n_ch = ds.epi.pos.n_ch;
  sys.ny = ds.epi.pos.ny;
  sys.nx = ds.epi.pos.nx;
  sys.lambda_eff = rc.lambda_eff;
  sys.r = rc.r;
  sys.p = rc.p;
  sys.plan = std::make_unique<LiftPlan>(sys.ny, sys.nx,
                                        Neighborhood::ball(rc.base.radius));
  sys.slot[0] = Slot{&ds.epi.pos, 1.0,
                     epi_free_lines(ds.pattern, line_positive), false};
  sys.slot[1] = Slot{&ds.epi.neg, 1.0,
                     epi_free_lines(ds.pattern, line_negative), false};
  const bool opt_acs = rc.method == Method::rac && rc.base.optimize_acs;
  sys.slot[2] = Slot{&ds.acs.pos, rc.base.eta,
                     acs_free_lines(ds.acs_pattern, opt_acs), false};
  sys.slot[3] = Slot{&ds.acs.neg, rc.base.eta,
                     acs_free_lines(ds.acs_pattern, opt_acs), false};
  sys.active = rc.method == Method::rac ? std::vector<int>{0, 1, 2, 3}
                                        : std::vector<int>{0, 1};
  for (auto& sl : sys.slot)
    for (auto f : sl.free_line)
      if (f) sl.any_free = true;
  return sys;
}

ReconResult run_mm(const Dataset& ds, const ReconConfig& cfg, Method method,
                   const GridPair* init) {
  ds.validate();
  const ResolvedConfig rc = resolve_config(ds, cfg, method);
  System sys = make_system(ds, rc);

  // Fixed calibration nullspace for the baseline method.
  MatrixXcd n_fixed;
  if (method == Method::ac)
    n_fixed = nullspace_from_gram(acs_c_gram(ds, cfg.radius), rc.p);

  if (init) {
    if (!init->pos.same_shape(ds.epi.pos) || !init->neg.same_shape(ds.epi.neg))
      throw ShapeError("initializer shape does not match the data");
    init->pos.check_finite("initializer (positive)");
    init->neg.check_finite("initializer (negative)");
  }

  // Iterate state: measured samples verbatim; free lines from the
  // initializer when given, zero otherwise.
  SlotData x;
  for (int g = 0; g < kSlots; ++g) x[size_t(g)] = sys.slot[size_t(g)].grid->data;
  if (init) {
    for (int g : {0, 1}) {
      const auto& src = (g == 0 ? init->pos : init->neg).data;
      const auto& fl = sys.slot[size_t(g)].free_line;
      for (int c = 0; c < sys.n_ch; ++c)
        for (int y = 0; y < sys.ny; ++y) {
          if (!fl[size_t(y)]) continue;
          const size_t off = (size_t(c) * sys.ny + y) * sys.nx;
          for (int xx = 0; xx < sys.nx; ++xx) x[size_t(g)][off + xx] = src[off + xx];
        }
    }
  }

  ReconResult out;
  out.config = rc;

  Scratch sc;
  sc.init(sys);
  const int cc = sys.cols_c();
  const int cs = sys.cols_s();
  const int s_total = int(sys.active.size()) * cs;
  const bool with_s = sys.lambda_eff > 0;

  MatrixXcd gram_c(cc, cc), gram_n(cc, cc), nullsp;
  MatrixXd gram_s, v;
  if (with_s) gram_s.resize(s_total, s_total);

  double j_prev = 0, j_first = 0;
  SlotData b;
  for (int g : sys.active) b[size_t(g)].assign(sys.total(), cplx(0.0, 0.0));

  for (int t = 0;; ++t) {
    // Lift the current iterate and form both Gram matrices.
    gram_c.setZero();
    for (size_t a = 0; a < sys.active.size(); ++a) {
      const int g = sys.active[a];
      sys.plan->lift_c(x[size_t(g)].data(), sys.n_ch, sc.c_lift[size_t(g)]);
      gram_c.selfadjointView<Eigen::Lower>().rankUpdate(
          sc.c_lift[size_t(g)].adjoint(), sys.slot[size_t(g)].c_weight);
      if (with_s) {
        auto block = sc.s_stack.middleCols(int(a) * cs, cs);
        sys.plan->lift_s(x[size_t(g)].data(), sys.n_ch, block);
      }
    }
    gram_c = MatrixXcd(gram_c.selfadjointView<Eigen::Lower>());

    // Subspaces and the exact objective value at this iterate.  Column
    // phases are irrelevant downstream: the bases enter only as projectors.
    double j_c;
    if (method == Method::rac) {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> eig_c(gram_c);
      if (eig_c.info() != Eigen::Success)
        throw NumericError("eigendecomposition of the C Gram matrix failed");
      nullsp = eig_c.eigenvectors().leftCols(rc.p);
      j_c = tail_sum(eig_c.eigenvalues(), rc.p);
    } else {
      nullsp = n_fixed;
      j_c = (nullsp.adjoint() * gram_c * nullsp).trace().real();
      j_c = std::max(j_c, 0.0);
    }
    double j = j_c;
    if (with_s) {
      gram_s.setZero();
      gram_s.selfadjointView<Eigen::Lower>().rankUpdate(sc.s_stack.transpose(),
                                                        1.0);
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig_s(
          MatrixXd(gram_s.selfadjointView<Eigen::Lower>()));
      if (eig_s.info() != Eigen::Success)
        throw NumericError("eigendecomposition of the S Gram matrix failed");
      v = eig_s.eigenvectors().rightCols(rc.r);
      j += sys.lambda_eff * tail_sum(eig_s.eigenvalues(), s_total - rc.r);
    }

    out.objective_trace.push_back(j);
    out.nullspace_defect.push_back(
        (nullsp.adjoint() * nullsp - MatrixXcd::Identity(rc.p, rc.p)).norm());
    out.nullspace_history.push_back(nullsp);

    if (t == 0) {
      j_first = j;
    } else if (std::abs(j_prev - j) <= cfg.tol * std::max(j_first, 1e-30)) {
      out.converged = true;
      break;
    }
    if (t == cfg.max_outer) break;
    j_prev = j;

    // Majorize-minimize data step at the current subspaces.
    gram_n.noalias() = nullsp * nullsp.adjoint();
    if (with_s) sc.w.noalias() = sc.s_stack * v;
    for (size_t a = 0; a < sys.active.size(); ++a) {
      const int g = sys.active[a];
      auto& bg = b[size_t(g)];
      std::fill(bg.begin(), bg.end(), cplx(0.0, 0.0));
      if (!sys.slot[size_t(g)].any_free) continue;
      sc.c_term.noalias() = sc.c_lift[size_t(g)] * gram_n;
      sc.c_term *= sys.slot[size_t(g)].c_weight;
      sys.plan->adjoint_c_accum(sc.c_term, sys.n_ch, bg.data());
      if (with_s) {
        sc.s_term.noalias() = sc.w * v.middleRows(int(a) * cs, cs).transpose();
        sc.s_term =
            sys.lambda_eff * (sc.s_stack.middleCols(int(a) * cs, cs) - sc.s_term);
        sys.plan->adjoint_s_accum(sc.s_term, sys.n_ch, bg.data());
      }
      zero_fixed_lines(sys, g, bg);
      for (auto& val : bg) val = -val;
    }
    data_step(sys, gram_n, v, b, x, sc, cfg.cg_max, cfg.cg_tol);
    out.iterations_used = t + 1;
  }

  out.k.pos = KSpaceGrid(sys.n_ch, sys.ny, sys.nx, Polarity::positive,
                         std::move(x[0]));
  out.k.neg = KSpaceGrid(sys.n_ch, sys.ny, sys.nx, Polarity::negative,
                         std::move(x[1]));
  out.k.pos.check_finite("reconstruction (positive)");
  out.k.neg.check_finite("reconstruction (negative)");
  if (method == Method::rac && cfg.optimize_acs) {
    GridPair acs;
    acs.pos = KSpaceGrid(sys.n_ch, sys.ny, sys.nx, Polarity::positive,
                         std::move(x[2]));
    acs.neg = KSpaceGrid(sys.n_ch, sys.ny, sys.nx, Polarity::negative,
                         std::move(x[3]));
    out.acs = std::move(acs);
  }
  return out;
}

} // namespace

ResolvedConfig resolve_config(const Dataset& ds, const ReconConfig& cfg,
                              Method method) {
  ds.validate();
  ResolvedConfig rc;
  rc.base = cfg;
  rc.method = method;
  if (method == Method::zerofill) return rc;
  check_params(cfg);

  const auto& epi = ds.epi.pos;
  if (method == Method::rac) {
    if (!ds.acs.pos.same_shape(epi))
      throw ShapeError(
          "joint estimation requires calibration grids with the same "
          "channel count and matrix size as the EPI data");
  } else {
    if (ds.acs.pos.n_ch != epi.n_ch)
      throw ShapeError("calibration channel count does not match the data");
    if (!acs_fully_sampled(ds.acs_pattern))
      throw ParamError(
          "the fixed-calibration baseline needs fully sampled "
          "autocalibration data");
  }

  // Lifting geometry must fit both grids (throws ShapeError otherwise).
  const Neighborhood nb = Neighborhood::ball(cfg.radius);
  LiftPlan epi_plan(epi.ny, epi.nx, nb);
  LiftPlan acs_plan(ds.acs.pos.ny, ds.acs.pos.nx, nb);
  const int cc = epi_plan.cols_c(epi.n_ch);
  const int cs = epi_plan.cols_s(epi.n_ch);
  const int s_total = (method == Method::rac ? 4 : 2) * cs;

  // Scale-free S weight: lambda is measured against the ratio of the two
  // lifting energies at the method's zero-filled starting point.
  std::vector<const KSpaceGrid*> grids{&ds.epi.pos, &ds.epi.neg};
  if (method == Method::rac) {
    grids.push_back(&ds.acs.pos);
    grids.push_back(&ds.acs.neg);
  }
  double e_c = 0, e_s = 0;
  lifting_energies(grids, cfg.radius, &e_c, &e_s);
  rc.lambda_eff = e_s > 0 ? cfg.lambda * e_c / e_s : 0.0;

  // Rank plan: explicit values win; zeros are read off the calibration
  // spectra.
  if (cfg.ranks.p > 0) {
    if (cfg.ranks.p > cc)
      throw ParamError("nullspace dimension " + std::to_string(cfg.ranks.p) +
                       " exceeds the C column count " + std::to_string(cc));
    rc.p = cfg.ranks.p;
  } else {
    rc.p_auto = true;
    const auto sig = singular_values_from_gram(acs_c_gram(ds, cfg.radius));
    const RankSuggestion sug = suggest_rank(sig, RankKind::c_side);
    rc.p = std::clamp(cc - sug.rank, 1, cc - 1);
  }
  if (cfg.ranks.r > 0) {
    if (cfg.ranks.r >= s_total)
      throw ParamError("S rank " + std::to_string(cfg.ranks.r) +
                       " must stay below the concatenated column count " +
                       std::to_string(s_total));
    rc.r = cfg.ranks.r;
  } else {
    rc.r_auto = true;
    const auto sig = singular_values_from_gram(acs_s_gram(ds, cfg.radius));
    const RankSuggestion sug = suggest_rank(sig, RankKind::s_side);
    // Four concatenated blocks hold roughly twice the calibration pair's
    // row space, so the joint method doubles the suggestion.
    const int base = method == Method::rac ? 2 * sug.rank : sug.rank;
    rc.r = std::clamp(base, 1, s_total - 1);
  }
  return rc;
}

double joint_objective(const KSpaceGrid& kp, const KSpaceGrid& kn,
                     const KSpaceGrid& ap, const KSpaceGrid& an,
                     const ResolvedConfig& cfg) {
  for (const KSpaceGrid* g : {&kn, &ap, &an})
    if (!g->same_shape(kp))
      throw ShapeError("all four grids must share channel count and size");
  kp.check_finite("k+ grid");
  kn.check_finite("k- grid");
  ap.check_finite("a+ grid");
  an.check_finite("a- grid");
  if (!(cfg.base.eta > 0)) throw ParamError("eta must be positive");

  const Neighborhood nb = Neighborhood::ball(cfg.base.radius);
  LiftPlan plan(kp.ny, kp.nx, nb);
  const int n_ch = kp.n_ch;
  const int cc = plan.cols_c(n_ch);
  const int cs = plan.cols_s(n_ch);
  if (cfg.p < 0 || cfg.p > cc)
    throw ParamError("nullspace dimension out of range");
  if (cfg.r < 0 || cfg.r > 4 * cs) throw ParamError("S rank out of range");

  const std::array<const KSpaceGrid*, 4> grids{&kp, &kn, &ap, &an};
  const std::array<double, 4> w{1.0, 1.0, cfg.base.eta, cfg.base.eta};
  MatrixXcd c(plan.rows_c(), cc);
  MatrixXcd gram_c = MatrixXcd::Zero(cc, cc);
  MatrixXd s_stack = MatrixXd::Zero(plan.rows_s(), 4 * cs);
  for (int g = 0; g < 4; ++g) {
    c.setZero();
    plan.lift_c(grids[size_t(g)]->data.data(), n_ch, c);
    gram_c.selfadjointView<Eigen::Lower>().rankUpdate(c.adjoint(), w[size_t(g)]);
    auto block = s_stack.middleCols(g * cs, cs);
    plan.lift_s(grids[size_t(g)]->data.data(), n_ch, block);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig_c(
      MatrixXcd(gram_c.selfadjointView<Eigen::Lower>()));
  if (eig_c.info() != Eigen::Success)
    throw NumericError("eigendecomposition of the C Gram matrix failed");
  double j = tail_sum(eig_c.eigenvalues(), cfg.p);
  if (cfg.lambda_eff > 0) {
    MatrixXd gram_s = MatrixXd::Zero(4 * cs, 4 * cs);
    gram_s.selfadjointView<Eigen::Lower>().rankUpdate(s_stack.transpose(), 1.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig_s(
        MatrixXd(gram_s.selfadjointView<Eigen::Lower>()));
    if (eig_s.info() != Eigen::Success)
      throw NumericError("eigendecomposition of the S Gram matrix failed");
    j += cfg.lambda_eff * tail_sum(eig_s.eigenvalues(), 4 * cs - cfg.r);
  }
  return j;
}

ReconResult rac_loraks(const Dataset& ds, const ReconConfig& cfg,
                       const GridPair* init) {
  return run_mm(ds, cfg, Method::rac, init);
}

ReconResult ac_loraks(const Dataset& ds, const ReconConfig& cfg,
                      const GridPair* init) {
  return run_mm(ds, cfg, Method::ac, init);
}

ReconResult zero_fill(const Dataset& ds) {
  ds.validate();
  ReconResult out;
  out.k = ds.epi;
  out.objective_trace = {0.0};
  out.iterations_used = 1;
  out.converged = true;
  out.config.method = Method::zerofill;
  return out;
}

GridPair shared_line_init(const Dataset& ds) {
  ds.validate();
  GridPair init = ds.epi;
  const int n_ch = ds.epi.pos.n_ch;
  const int nx = ds.epi.pos.nx;
  for (int y = 0; y < ds.pattern.ny; ++y) {
    const Polarity pol = ds.pattern.polarity_of(y);
    if (pol == Polarity::none) continue;
    // Copy the measured line into the grid that lacks it.
    const KSpaceGrid& src = pol == Polarity::positive ? ds.epi.pos : ds.epi.neg;
    KSpaceGrid& dst = pol == Polarity::positive ? init.neg : init.pos;
    for (int c = 0; c < n_ch; ++c) {
      const size_t off = (size_t(c) * size_t(dst.ny) + size_t(y)) * size_t(nx);
      for (int x = 0; x < nx; ++x) dst.data[off + size_t(x)] = src.data[off + size_t(x)];
    }
  }
  return init;
}

} // namespace loraks
