// epighost: command-line front end for dual-polarity EPI ghost correction.
//
// Subcommands:
//   simulate   synthesize a dataset directory (.kspc grids + manifest)
//   recon      reconstruct a dataset with rac-loraks / ac-loraks / zero-fill
//   eval       score an estimate against a reference (NRMSE, ESP, ssos)
//   svplot     dump the calibration singular-value curves and suggested ranks
//
// Every command writes a manifest.json next to its outputs recording the
// command line, the fully materialized configuration, input/output paths and
// the wall-clock duration, so a run can be reproduced exactly.  All flags
// are long-form only; numeric text outputs carry 17 significant digits.
//
// Exit codes: 0 success, 2 usage/parameter error, 3 I/O error, 4 numerical
// failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "loraks/container.hpp"
#include "loraks/errors.hpp"
#include "loraks/kspace.hpp"
#include "loraks/metrics.hpp"
#include "loraks/operators.hpp"
#include "loraks/sim.hpp"
#include "loraks/solver.hpp"
#include "loraks/subspace.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace loraks;

namespace {

constexpr const char* kArtifactVersion = "1.0.0";

// ---------------------------------------------------------------------------
// small shared helpers

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f.write(text.data(), std::streamsize(text.size()));
    if (!f) throw IoError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_manifest(const fs::path& out_dir, const ordered_json& manifest) {
  write_text_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

ordered_json argv_json(int argc, char** argv) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < argc; ++i) a.push_back(std::string(argv[i]));
  return a;
}

ordered_json manifest_skeleton(const std::string& command, int argc,
                               char** argv) {
  ordered_json m;
  m["command"] = command;
  m["argv"] = argv_json(argc, argv);
  m["artifact_version"] = kArtifactVersion;
  m["seed"] = nullptr; // overwritten by commands that consume a seed
  return m;
}

ordered_json pf_json(const PartialFourier& pf) {
  return ordered_json{{"num", pf.num}, {"den", pf.den}};
}

// The corruption(s) a scenario applies, echoed into the manifest.
ordered_json corruption_json(Scenario s) {
  auto one = [](const char* kind, const char* where) {
    return ordered_json{{"kind", kind}, {"where", where}};
  };
  ordered_json list = ordered_json::array();
  switch (s) {
    case Scenario::matched: break;
    case Scenario::hyperintensity: list.push_back(one("hyperintensity", "epi")); break;
    case Scenario::hyperintensity_acs: list.push_back(one("hyperintensity", "acs")); break;
    case Scenario::inverted_contrast: list.push_back(one("inverted_contrast", "acs")); break;
    case Scenario::shot_ghost_acs: list.push_back(one("shot_ghost", "acs")); break;
    case Scenario::single_channel:
      list.push_back(one("hyperintensity", "epi"));
      list.push_back(one("shot_ghost", "acs"));
      break;
  }
  return list;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string out;
  std::string scenario = "matched";
  int ny = 32, nx = 32, nch = 8;
  int R = 2;
  std::string pf = "1";
  std::string acs_pf = "1";
  int offset = 0;
  unsigned long long seed = 1;
};

int run_simulate(const SimulateArgs& a, int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();

  ScenarioConfig cfg;
  cfg.scenario = scenario_from_string(a.scenario);
  cfg.ny = a.ny;
  cfg.nx = a.nx;
  cfg.n_ch = a.nch;
  cfg.R = a.R;
  cfg.pf = parse_partial_fourier(a.pf);
  cfg.acs_pf = parse_partial_fourier(a.acs_pf);
  cfg.offset = a.offset;
  cfg.seed = a.seed;

  const Dataset ds = make_scenario(cfg);
  const fs::path out(a.out);
  save_dataset(out.string(), ds);

  ordered_json m = manifest_skeleton("simulate", argc, argv);
  m["seed"] = a.seed;
  ordered_json c;
  c["scenario"] = to_string(cfg.scenario);
  c["corruptions"] = corruption_json(cfg.scenario);
  c["ny"] = cfg.ny;
  c["nx"] = cfg.nx;
  c["nch"] = ds.epi.pos.n_ch; // single-channel scenarios collapse nch to 1
  c["nch_requested"] = cfg.n_ch;
  c["R"] = cfg.R;
  c["pf"] = pf_json(cfg.pf);
  c["acs_pf"] = pf_json(cfg.acs_pf);
  c["offset"] = cfg.offset;
  m["config"] = c;
  m["inputs"] = ordered_json::object();
  ordered_json outs;
  for (const char* name : {"epi_pos.kspc", "epi_neg.kspc", "acs_pos.kspc",
                           "acs_neg.kspc", "gold_pos.kspc", "gold_neg.kspc"})
    outs[std::string(name).substr(0, std::string(name).find('.'))] =
        (out / name).string();
  m["outputs"] = outs;
  m["duration_seconds"] = seconds_since(t0);
  write_manifest(out, m);
  return 0;
}

// ---------------------------------------------------------------------------
// recon

struct ReconArgs {
  std::string data;
  std::string out;
  std::string method;
  std::string init = "zero-fill";
  double lambda = 1e-3;
  double eta = 1e-3;
  int rank_s = 0;
  int nullspace_p = 0;
  int radius = 2;
  int max_outer = 100;
  double tol = 1e-6;
  int cg_max = 250;
  double cg_tol = 1e-8;
  bool optimize_acs = false;
};

std::string trace_csv(const std::vector<double>& trace) {
  std::ostringstream out;
  out << "iter,objective\n";
  for (size_t i = 0; i < trace.size(); ++i)
    out << i << ',' << format_g17(trace[i]) << '\n';
  return out.str();
}

int run_recon(const ReconArgs& a, int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();

  const Method method = method_from_string(a.method);
  if (a.init != "zero-fill" && a.init != "shared" && a.init != "acs-fixed")
    throw ParamError("--init must be zero-fill, shared or acs-fixed, got '" +
                     a.init + "'");
  if (a.init != "zero-fill" && method != Method::rac)
    throw ParamError("--init " + a.init + " applies to rac-loraks only");

  const Dataset ds = load_dataset(a.data);

  ReconConfig cfg;
  cfg.lambda = a.lambda;
  cfg.eta = a.eta;
  cfg.ranks.r = a.rank_s;
  cfg.ranks.p = a.nullspace_p;
  cfg.radius = a.radius;
  cfg.max_outer = a.max_outer;
  cfg.tol = a.tol;
  cfg.cg_max = a.cg_max;
  cfg.cg_tol = a.cg_tol;
  cfg.optimize_acs = a.optimize_acs;

  ReconResult res;
  switch (method) {
    case Method::zerofill:
      res = zero_fill(ds);
      break;
    case Method::ac:
      res = ac_loraks(ds, cfg);
      break;
    case Method::rac:
      if (a.init == "shared") {
        const GridPair start = shared_line_init(ds);
        res = rac_loraks(ds, cfg, &start);
      } else if (a.init == "acs-fixed") {
        const ReconResult pre = ac_loraks(ds, cfg);
        res = rac_loraks(ds, cfg, &pre.k);
      } else {
        res = rac_loraks(ds, cfg);
      }
      break;
  }

  const fs::path out(a.out);
  const SamplingPattern full = SamplingPattern::full(res.k.pos.ny);
  save_grid((out / "recon_pos.kspc").string(), res.k.pos, full, GridRole::gold);
  save_grid((out / "recon_neg.kspc").string(), res.k.neg, full, GridRole::gold);
  write_text_atomic(out / "trace.csv", trace_csv(res.objective_trace));
  if (res.acs) {
    const SamplingPattern acs_full = SamplingPattern::full(res.acs->pos.ny);
    save_grid((out / "recon_acs_pos.kspc").string(), res.acs->pos, acs_full,
              GridRole::acs);
    save_grid((out / "recon_acs_neg.kspc").string(), res.acs->neg, acs_full,
              GridRole::acs);
  }

  ordered_json m = manifest_skeleton("recon", argc, argv);
  ordered_json c;
  c["method"] = to_string(res.config.method);
  c["init"] = a.init;
  c["lambda"] = res.config.base.lambda;
  c["lambda_eff"] = res.config.lambda_eff;
  c["eta"] = res.config.base.eta;
  c["rank_s"] = res.config.r;
  c["rank_s_auto"] = res.config.r_auto;
  c["nullspace_p"] = res.config.p;
  c["nullspace_p_auto"] = res.config.p_auto;
  c["radius"] = res.config.base.radius;
  c["max_outer"] = res.config.base.max_outer;
  c["tol"] = res.config.base.tol;
  c["cg_max"] = res.config.base.cg_max;
  c["cg_tol"] = res.config.base.cg_tol;
  c["optimize_acs"] = res.config.base.optimize_acs;
  m["config"] = c;
  ordered_json r;
  r["iterations"] = res.iterations_used;
  r["converged"] = res.converged;
  r["objective_first"] = res.objective_trace.front();
  r["objective_final"] = res.objective_trace.back();
  m["result"] = r;
  m["inputs"] = ordered_json{{"data", a.data}};
  ordered_json outs;
  outs["recon_pos"] = (out / "recon_pos.kspc").string();
  outs["recon_neg"] = (out / "recon_neg.kspc").string();
  outs["trace"] = (out / "trace.csv").string();
  if (res.acs) {
    outs["recon_acs_pos"] = (out / "recon_acs_pos.kspc").string();
    outs["recon_acs_neg"] = (out / "recon_acs_neg.kspc").string();
  }
  m["outputs"] = outs;
  m["duration_seconds"] = seconds_since(t0);
  write_manifest(out, m);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string out;
  std::string data; // convenience: reference = <data>/gold_{pos,neg}.kspc
  std::string est_pos, est_neg;
  std::string ref_pos, ref_neg;
  int bins = 32;
};

int run_eval(const EvalArgs& a, int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();

  std::string ref_pos = a.ref_pos, ref_neg = a.ref_neg;
  if (ref_pos.empty() && ref_neg.empty() && !a.data.empty()) {
    ref_pos = (fs::path(a.data) / "gold_pos.kspc").string();
    ref_neg = (fs::path(a.data) / "gold_neg.kspc").string();
  }
  if (ref_pos.empty() || ref_neg.empty())
    throw ParamError("eval needs either --data or both --ref-pos and --ref-neg");

  const GridPair est{load_grid(a.est_pos).grid, load_grid(a.est_neg).grid};
  const GridPair ref{load_grid(ref_pos).grid, load_grid(ref_neg).grid};

  const double err = nrmse(est, ref);
  const EspCurve curve = esp(est, ref, a.bins);
  const RealImage img = ssos(est);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_nrmse((out / "nrmse.txt").string(), err);
  write_esp_csv((out / "esp.csv").string(), curve);
  write_pgm16((out / "ssos.pgm").string(), img);

  ordered_json m = manifest_skeleton("eval", argc, argv);
  m["config"] = ordered_json{{"bins", a.bins}};
  ordered_json ins;
  ins["est_pos"] = a.est_pos;
  ins["est_neg"] = a.est_neg;
  ins["ref_pos"] = ref_pos;
  ins["ref_neg"] = ref_neg;
  m["inputs"] = ins;
  ordered_json outs;
  outs["nrmse"] = (out / "nrmse.txt").string();
  outs["esp"] = (out / "esp.csv").string();
  outs["ssos"] = (out / "ssos.pgm").string();
  m["outputs"] = outs;
  m["result"] = ordered_json{{"nrmse", err}};
  m["duration_seconds"] = seconds_since(t0);
  write_manifest(out, m);

  std::cout << "nrmse " << format_g17(err) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// svplot

struct SvplotArgs {
  std::string data;
  std::string out;
  int radius = 2;
};

int run_svplot(const SvplotArgs& a, int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();

  const Dataset ds = load_dataset(a.data);
  const Neighborhood nb = Neighborhood::ball(a.radius);

  const CMatrix cp = build_c(ds.acs.pos, nb);
  const CMatrix cn = build_c(ds.acs.neg, nb);
  Eigen::MatrixXcd c_stack(cp.m.rows() + cn.m.rows(), cp.m.cols());
  c_stack << cp.m, cn.m;

  const SMatrix sp = build_s(ds.acs.pos, nb);
  const SMatrix sn = build_s(ds.acs.neg, nb);
  Eigen::MatrixXd s_stack(sp.m.rows(), sp.m.cols() + sn.m.cols());
  s_stack << sp.m, sn.m;

  const std::vector<double> sv_c = singular_values(c_stack);
  const std::vector<double> sv_s = singular_values(s_stack);
  const RankSuggestion sug_c = suggest_rank(sv_c, RankKind::c_side);
  const RankSuggestion sug_s = suggest_rank(sv_s, RankKind::s_side);
  const int cols_c = int(c_stack.cols());
  const int p = std::clamp(cols_c - sug_c.rank, 1, cols_c - 1);

  std::ostringstream sv;
  sv << "matrix,index,sigma\n";
  for (size_t i = 0; i < sv_c.size(); ++i)
    sv << "C," << i << ',' << format_g17(sv_c[i]) << '\n';
  for (size_t i = 0; i < sv_s.size(); ++i)
    sv << "S," << i << ',' << format_g17(sv_s[i]) << '\n';

  std::ostringstream sug;
  sug << "name,value\n"
      << "c_suggested_rank," << sug_c.rank << '\n'
      << "c_low_confidence," << (sug_c.low_confidence ? 1 : 0) << '\n'
      << "c_nullspace_p," << p << '\n'
      << "s_suggested_rank," << sug_s.rank << '\n'
      << "s_low_confidence," << (sug_s.low_confidence ? 1 : 0) << '\n';

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text_atomic(out / "singular_values.csv", sv.str());
  write_text_atomic(out / "suggestions.csv", sug.str());

  ordered_json m = manifest_skeleton("svplot", argc, argv);
  m["config"] = ordered_json{{"radius", a.radius}};
  m["inputs"] = ordered_json{{"data", a.data}};
  ordered_json outs;
  outs["singular_values"] = (out / "singular_values.csv").string();
  outs["suggestions"] = (out / "suggestions.csv").string();
  m["outputs"] = outs;
  m["duration_seconds"] = seconds_since(t0);
  write_manifest(out, m);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-polarity EPI ghost correction toolbox"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "synthesize a dataset");
  c_sim->add_option("--out", sim.out, "output directory")->required();
  c_sim->add_option("--scenario", sim.scenario,
                    "matched | hyperintensity | hyperintensity-acs | "
                    "inverted-contrast | shot-ghost-acs | single-channel");
  c_sim->add_option("--ny", sim.ny, "phase-encode lines");
  c_sim->add_option("--nx", sim.nx, "readout samples");
  c_sim->add_option("--nch", sim.nch, "coil channels");
  c_sim->add_option("--R", sim.R, "acceleration factor");
  c_sim->add_option("--pf", sim.pf, "EPI partial-Fourier fraction (1, 7/8, 6/8, 5/8)");
  c_sim->add_option("--acs-pf", sim.acs_pf, "calibration partial-Fourier fraction");
  c_sim->add_option("--offset", sim.offset, "sampling line offset");
  c_sim->add_option("--seed", sim.seed, "random seed");

  ReconArgs rec;
  CLI::App* c_rec = app.add_subcommand("recon", "reconstruct a dataset");
  c_rec->add_option("--data", rec.data, "dataset directory")->required();
  c_rec->add_option("--out", rec.out, "output directory")->required();
  c_rec->add_option("--method", rec.method,
                    "rac-loraks | ac-loraks | zero-fill")->required();
  c_rec->add_option("--init", rec.init,
                    "starting point for rac-loraks: zero-fill | shared | acs-fixed");
  c_rec->add_option("--lambda", rec.lambda, "low-rank penalty weight");
  c_rec->add_option("--eta", rec.eta, "calibration trust weight");
  c_rec->add_option("--rank-s", rec.rank_s, "low-rank penalty rank (0 = auto)");
  c_rec->add_option("--nullspace-p", rec.nullspace_p,
                    "nullspace dimension (0 = auto)");
  c_rec->add_option("--radius", rec.radius, "lifting neighborhood radius");
  c_rec->add_option("--max-outer", rec.max_outer, "outer iteration cap");
  c_rec->add_option("--tol", rec.tol, "relative objective-change stop threshold");
  c_rec->add_option("--cg-max", rec.cg_max, "inner CG iteration cap");
  c_rec->add_option("--cg-tol", rec.cg_tol, "inner CG relative residual");
  c_rec->add_flag("--optimize-acs", rec.optimize_acs,
                  "also fill unmeasured calibration lines");

  EvalArgs ev;
  CLI::App* c_ev = app.add_subcommand("eval", "score an estimate");
  c_ev->add_option("--out", ev.out, "output directory")->required();
  c_ev->add_option("--est-pos", ev.est_pos, "estimate, positive polarity")->required();
  c_ev->add_option("--est-neg", ev.est_neg, "estimate, negative polarity")->required();
  c_ev->add_option("--data", ev.data,
                   "dataset directory holding the gold reference");
  c_ev->add_option("--ref-pos", ev.ref_pos, "reference, positive polarity");
  c_ev->add_option("--ref-neg", ev.ref_neg, "reference, negative polarity");
  c_ev->add_option("--bins", ev.bins, "error-spectrum bin count");

  SvplotArgs svp;
  CLI::App* c_svp = app.add_subcommand("svplot",
                                       "calibration singular-value curves");
  c_svp->add_option("--data", svp.data, "dataset directory")->required();
  c_svp->add_option("--out", svp.out, "output directory")->required();
  c_svp->add_option("--radius", svp.radius, "lifting neighborhood radius");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_sim) return run_simulate(sim, argc, argv);
    if (*c_rec) return run_recon(rec, argc, argv);
    if (*c_ev) return run_eval(ev, argc, argv);
    return run_svplot(svp, argc, argv);
  } catch (const ParamError& e) {
    std::cerr << "epighost: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "epighost: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "epighost: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "epighost: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "epighost: " << e.what() << "\n";
    return 4;
  }
}
