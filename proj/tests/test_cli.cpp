// End-to-end checks of the epighost executable: pipelines, manifest echoes,
// determinism and exit codes.  The binary path comes in via EPIGHOST_BIN.
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loraks/container.hpp"
#include "loraks/kspace.hpp"
#include "loraks/metrics.hpp"

using namespace loraks;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runs the CLI with the given argument string; returns the process exit code.
int run(const std::string& args) {
  const std::string cmd =
      std::string(EPIGHOST_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE_MESSAGE(bool(f), "cannot open " << p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json manifest_of(const fs::path& dir) {
  return json::parse(slurp(dir / "manifest.json"));
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string sim_args(const fs::path& out, const std::string& extra) {
  return "simulate --out " + out.string() + " --ny 16 --nx 16 --nch 2 " + extra;
}

// Parsed rows of singular_values.csv for one matrix label.
std::vector<double> csv_curve(const fs::path& file, const std::string& label) {
  std::ifstream f(file);
  REQUIRE(bool(f));
  std::string line;
  std::getline(f, line);
  REQUIRE(line == "matrix,index,sigma");
  std::vector<double> out;
  while (std::getline(f, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (line.substr(0, c1) == label)
      out.push_back(std::stod(line.substr(c2 + 1)));
  }
  return out;
}

} // namespace

TEST_CASE("simulate writes six grids plus a manifest and is seed-deterministic") {
  const fs::path dir = scratch("sim_det");
  REQUIRE(run(sim_args(dir / "a", "--scenario hyperintensity --R 3 --seed 7")) == 0);

  const std::vector<std::string> grids = {"epi_pos.kspc",  "epi_neg.kspc",
                                          "acs_pos.kspc",  "acs_neg.kspc",
                                          "gold_pos.kspc", "gold_neg.kspc"};
  for (const auto& g : grids) CHECK(fs::exists(dir / "a" / g));
  CHECK(fs::exists(dir / "a" / "manifest.json"));

  const json m = manifest_of(dir / "a");
  CHECK(m["command"] == "simulate");
  CHECK(m["seed"] == 7);
  CHECK(m["config"]["scenario"] == "hyperintensity");
  CHECK(m["config"]["R"] == 3);
  CHECK(m["config"]["corruptions"][0]["kind"] == "hyperintensity");
  CHECK(m["config"]["corruptions"][0]["where"] == "epi");

  REQUIRE(run(sim_args(dir / "b", "--scenario hyperintensity --R 3 --seed 7")) == 0);
  for (const auto& g : grids) CHECK(slurp(dir / "a" / g) == slurp(dir / "b" / g));

  // A different seed must change the payloads.
  REQUIRE(run(sim_args(dir / "c", "--scenario hyperintensity --R 3 --seed 8")) == 0);
  CHECK(slurp(dir / "a" / "epi_pos.kspc") != slurp(dir / "c" / "epi_pos.kspc"));
}

TEST_CASE("scenario corruption is echoed into the manifest") {
  const fs::path dir = scratch("sim_echo");
  REQUIRE(run(sim_args(dir / "inv", "--scenario inverted-contrast")) == 0);
  const json m = manifest_of(dir / "inv");
  CHECK(m["config"]["corruptions"][0]["kind"] == "inverted_contrast");
  CHECK(m["config"]["corruptions"][0]["where"] == "acs");

  REQUIRE(run(sim_args(dir / "sc", "--scenario single-channel")) == 0);
  const json ms = manifest_of(dir / "sc");
  REQUIRE(ms["config"]["corruptions"].size() == 2);
  CHECK(ms["config"]["nch"] == 1); // channel-combined output
  CHECK(ms["config"]["nch_requested"] == 2);
}

TEST_CASE("zero-fill recon of fully sampled data reproduces the input bits") {
  const fs::path dir = scratch("zf_roundtrip");
  REQUIRE(run(sim_args(dir / "data", "--R 1 --seed 3")) == 0);
  REQUIRE(run("recon --data " + (dir / "data").string() + " --out " +
              (dir / "rec").string() + " --method zero-fill") == 0);

  const GridFile in_p = load_grid((dir / "data" / "epi_pos.kspc").string());
  const GridFile in_n = load_grid((dir / "data" / "epi_neg.kspc").string());
  const GridFile out_p = load_grid((dir / "rec" / "recon_pos.kspc").string());
  const GridFile out_n = load_grid((dir / "rec" / "recon_neg.kspc").string());
  CHECK(bitwise_equal(out_p.grid, in_p.grid));
  CHECK(bitwise_equal(out_n.grid, in_n.grid));
  CHECK(out_p.role == GridRole::gold);
  CHECK(out_p.pattern == SamplingPattern::full(16));

  const json m = manifest_of(dir / "rec");
  CHECK(m["config"]["method"] == "zero-fill");
  CHECK(m["config"]["lambda_eff"] == 0.0);
  CHECK(m["result"]["converged"] == true);
}

TEST_CASE("recon echoes the resolved configuration and writes a monotone trace") {
  const fs::path dir = scratch("recon_echo");
  REQUIRE(run(sim_args(dir / "data", "--R 2 --seed 11")) == 0);
  const std::string recon = "recon --data " + (dir / "data").string() +
                            " --method rac-loraks --max-outer 3 --cg-max 20"
                            " --lambda 0.002 --eta 0.005 --rank-s 10"
                            " --nullspace-p 6 --radius 1 --tol 1e-5";
  REQUIRE(run(recon + " --out " + (dir / "rec").string()) == 0);

  const json m = manifest_of(dir / "rec");
  const json& c = m["config"];
  CHECK(c["method"] == "rac-loraks");
  CHECK(c["init"] == "zero-fill");
  CHECK(c["lambda"] == 0.002);
  CHECK(c["eta"] == 0.005);
  CHECK(c["rank_s"] == 10);
  CHECK(c["rank_s_auto"] == false);
  CHECK(c["nullspace_p"] == 6);
  CHECK(c["nullspace_p_auto"] == false);
  CHECK(c["radius"] == 1);
  CHECK(c["tol"] == 1e-5);
  CHECK(c["cg_max"] == 20);
  CHECK(double(c["lambda_eff"]) > 0.0);

  // Trace: header plus iterations+1 rows, non-increasing objective.
  std::ifstream f(dir / "rec" / "trace.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line == "iter,objective");
  std::vector<double> obj;
  while (std::getline(f, line))
    obj.push_back(std::stod(line.substr(line.find(',') + 1)));
  REQUIRE(obj.size() == size_t(int(m["result"]["iterations"]) + 1));
  for (size_t i = 1; i < obj.size(); ++i)
    CHECK(obj[i] <= obj[i - 1] + 1e-9 * obj.front());

  // Bitwise repeatability of the reconstruction itself.
  REQUIRE(run(recon + " --out " + (dir / "rec2").string()) == 0);
  CHECK(slurp(dir / "rec" / "recon_pos.kspc") ==
        slurp(dir / "rec2" / "recon_pos.kspc"));
  CHECK(slurp(dir / "rec" / "trace.csv") == slurp(dir / "rec2" / "trace.csv"));
}

TEST_CASE("non-default starting points run and are recorded") {
  const fs::path dir = scratch("recon_init");
  REQUIRE(run(sim_args(dir / "data", "--R 2 --seed 4")) == 0);
  const std::string base = "recon --data " + (dir / "data").string() +
                           " --method rac-loraks --max-outer 2 --cg-max 10";
  for (const std::string mode : {"shared", "acs-fixed"}) {
    const fs::path out = dir / ("rec_" + mode);
    REQUIRE(run(base + " --init " + mode + " --out " + out.string()) == 0);
    CHECK(manifest_of(out)["config"]["init"] == mode);
  }
  // Start modes other than zero-fill are specific to the joint method.
  CHECK(run("recon --data " + (dir / "data").string() + " --out " +
            (dir / "x").string() + " --method ac-loraks --init shared") == 2);
  CHECK(run(base + " --init bogus --out " + (dir / "y").string()) == 2);
}

TEST_CASE("eval scores an estimate and agrees between --data and --ref flags") {
  const fs::path dir = scratch("eval");
  REQUIRE(run(sim_args(dir / "data", "--R 2 --seed 9")) == 0);

  // Gold against itself: exact zero.
  const std::string gp = (dir / "data" / "gold_pos.kspc").string();
  const std::string gn = (dir / "data" / "gold_neg.kspc").string();
  REQUIRE(run("eval --out " + (dir / "self").string() + " --est-pos " + gp +
              " --est-neg " + gn + " --data " + (dir / "data").string()) == 0);
  CHECK(std::stod(slurp(dir / "self" / "nrmse.txt")) == 0.0);
  CHECK(fs::exists(dir / "self" / "esp.csv"));
  CHECK(slurp(dir / "self" / "ssos.pgm").substr(0, 2) == "P5");

  // Zero-fill estimate, referenced two equivalent ways.
  REQUIRE(run("recon --data " + (dir / "data").string() + " --out " +
              (dir / "rec").string() + " --method zero-fill") == 0);
  const std::string est = " --est-pos " + (dir / "rec" / "recon_pos.kspc").string() +
                          " --est-neg " + (dir / "rec" / "recon_neg.kspc").string();
  REQUIRE(run("eval --out " + (dir / "via_data").string() + est + " --data " +
              (dir / "data").string()) == 0);
  REQUIRE(run("eval --out " + (dir / "via_refs").string() + est + " --ref-pos " +
              gp + " --ref-neg " + gn) == 0);
  CHECK(slurp(dir / "via_data" / "nrmse.txt") ==
        slurp(dir / "via_refs" / "nrmse.txt"));
  const double zf = std::stod(slurp(dir / "via_data" / "nrmse.txt"));
  CHECK(zf > 0.1); // half the lines are missing per polarity

  // The manifest records the nrmse it printed.
  CHECK(double(manifest_of(dir / "via_data")["result"]["nrmse"]) ==
        doctest::Approx(zf).epsilon(1e-15));
}

TEST_CASE("svplot emits descending curves and flags a rank-one calibration") {
  const fs::path dir = scratch("svplot");

  // Constant calibration data: both liftings have exactly one nonzero
  // singular value.
  const int nch = 2, ny = 16, nx = 16;
  Dataset ds;
  ds.pattern = SamplingPattern::interleaved(ny, 1, PartialFourier(1, 1), 0);
  ds.acs_pattern = SamplingPattern::full(ny);
  KSpaceGrid ones(nch, ny, nx, Polarity::positive,
                  std::vector<cplx>(size_t(nch) * ny * nx, cplx(1.0, 0.0)));
  KSpaceGrid ones_neg = ones;
  ones_neg.polarity = Polarity::negative;
  ds.epi = GridPair{mask_to_pattern(ones, ds.pattern, Polarity::positive),
                    mask_to_pattern(ones_neg, ds.pattern, Polarity::negative)};
  ds.acs = GridPair{ones, ones_neg};
  ds.gold = GridPair{ones, ones_neg};
  save_dataset((dir / "ones").string(), ds);

  REQUIRE(run("svplot --data " + (dir / "ones").string() + " --out " +
              (dir / "sv_ones").string()) == 0);
  for (const std::string label : {"C", "S"}) {
    const auto curve = csv_curve(dir / "sv_ones" / "singular_values.csv", label);
    REQUIRE(!curve.empty());
    int nonzero = 0;
    for (double s : curve) nonzero += (s > 1e-8 * curve.front()) ? 1 : 0;
    CHECK(nonzero == 1);
  }

  // Generic data: curves descend, strictly so away from the noise floor.
  REQUIRE(run(sim_args(dir / "data", "--R 2 --seed 2")) == 0);
  REQUIRE(run("svplot --data " + (dir / "data").string() + " --out " +
              (dir / "sv").string()) == 0);
  for (const std::string label : {"C", "S"}) {
    const auto curve = csv_curve(dir / "sv" / "singular_values.csv", label);
    REQUIRE(curve.size() > 10);
    for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
    for (size_t i = 1; i < 10; ++i) CHECK(curve[i] < curve[i - 1]);
  }

  const std::string sug = slurp(dir / "sv" / "suggestions.csv");
  CHECK(sug.find("c_suggested_rank,") != std::string::npos);
  CHECK(sug.find("c_nullspace_p,") != std::string::npos);
  CHECK(sug.find("s_suggested_rank,") != std::string::npos);
}

TEST_CASE("failures map onto the documented exit codes") {
  const fs::path dir = scratch("exit_codes");
  REQUIRE(run(sim_args(dir / "data", "--R 2 --seed 1")) == 0);

  CHECK(run("--help") == 0);
  CHECK(run("simulate --help") == 0);

  // Usage errors.
  CHECK(run("") == 2);                                        // no subcommand
  CHECK(run("frobnicate") == 2);                              // unknown subcommand
  CHECK(run(sim_args(dir / "x", "--no-such-flag 1")) == 2);   // unknown flag
  CHECK(run(sim_args(dir / "x", "--scenario bogus")) == 2);   // bad scenario
  CHECK(run(sim_args(dir / "x", "--R 0")) == 2);              // bad parameter
  CHECK(run("recon --data " + (dir / "data").string() + " --out " +
            (dir / "x").string() + " --method grappa") == 2); // bad method
  CHECK(run("recon --data " + (dir / "data").string() + " --out " +
            (dir / "x").string() + " --method rac-loraks --rank-s -1") == 2);
  CHECK(run("eval --out " + (dir / "x").string() + " --est-pos a --est-neg b") ==
        2); // no reference given

  // I/O errors.
  CHECK(run("recon --data " + (dir / "nowhere").string() + " --out " +
            (dir / "x").string() + " --method zero-fill") == 3);
  CHECK(run("eval --out " + (dir / "x").string() + " --est-pos " +
            (dir / "nowhere" / "a.kspc").string() + " --est-neg " +
            (dir / "nowhere" / "b.kspc").string() + " --data " +
            (dir / "data").string()) == 3);

  // Shape mismatches between user-supplied files are usage errors.
  REQUIRE(run("simulate --out " + (dir / "big").string() +
              " --ny 24 --nx 24 --nch 2 --R 2 --seed 1") == 0);
  CHECK(run("eval --out " + (dir / "x").string() + " --est-pos " +
            (dir / "big" / "gold_pos.kspc").string() + " --est-neg " +
            (dir / "big" / "gold_neg.kspc").string() + " --data " +
            (dir / "data").string()) == 2);
}
