#include "loraks/container.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace loraks {

// Payload doubles are written verbatim; the format is little-endian.
static_assert(std::endian::native == std::endian::little,
              "kspc serialization assumes a little-endian host");
static_assert(sizeof(cplx) == 16, "complex<double> must be two packed doubles");

std::string to_string(GridRole r) {
  switch (r) {
    case GridRole::epi: return "epi";
    case GridRole::acs: return "acs";
    default: return "gold";
  }
}

GridRole role_from_string(const std::string& s) {
  if (s == "epi") return GridRole::epi;
  if (s == "acs") return GridRole::acs;
  if (s == "gold") return GridRole::gold;
  throw IoError("unknown grid role '" + s + "' (expected epi, acs or gold)");
}

namespace {

namespace fs = std::filesystem;

constexpr const char* header_fields[] = {"version", "role", "polarity", "nch",
                                         "ny",      "nx",   "R",        "pf_num",
                                         "pf_den",  "offset"};

void atomic_write(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw IoError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

// EPI frames may only hold data on lines of their own polarity; ACS and
// gold frames on any acquired line.  Fully acquired gold pairs are exempt
// (both polarities hold every line there).
void check_payload(const KSpaceGrid& grid, const SamplingPattern& pattern,
                   GridRole role, const std::string& context) {
  if (role == GridRole::gold && pattern.n_acquired() == pattern.ny) return;
  const Polarity keep = (role == GridRole::epi) ? grid.polarity : Polarity::none;
  if (!bitwise_equal(mask_to_pattern(grid, pattern, keep), grid))
    throw IoError(context + ": payload holds data on lines the pattern skips");
}

int parse_int(const std::string& field, const std::string& value) {
  try {
    size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw IoError("kspc header field '" + field + "' has non-integer value '" +
                  value + "'");
  }
}

} // namespace

void save_grid(const std::string& path, const KSpaceGrid& grid,
               const SamplingPattern& pattern, GridRole role) {
  if (grid.ny != pattern.ny)
    throw ShapeError("grid ny=" + std::to_string(grid.ny) +
                     " does not match pattern ny=" + std::to_string(pattern.ny));
  grid.check_finite("grid for '" + path + "'");
  check_payload(grid, pattern, role, "'" + path + "'");
  std::ostringstream out;
  out << "version:1\n"
      << "role:" << to_string(role) << "\n"
      << "polarity:" << to_string(grid.polarity) << "\n"
      << "nch:" << grid.n_ch << "\n"
      << "ny:" << grid.ny << "\n"
      << "nx:" << grid.nx << "\n"
      << "R:" << pattern.R << "\n"
      << "pf_num:" << pattern.pf.num << "\n"
      << "pf_den:" << pattern.pf.den << "\n"
      << "offset:" << pattern.offset << "\n"
      << "\n";
  out.write(reinterpret_cast<const char*>(pattern.line_state.data()),
            std::streamsize(pattern.line_state.size()));
  out.write(reinterpret_cast<const char*>(grid.data.data()),
            std::streamsize(grid.data.size() * sizeof(cplx)));
  atomic_write(path, out.str());
}

GridFile load_grid(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());

  // Header: fixed field order, one blank line terminator.
  size_t pos = 0;
  std::string values[std::size(header_fields)];
  for (size_t i = 0; i < std::size(header_fields); ++i) {
    const size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos)
      throw IoError("'" + path + "': header ends before field '" +
                    header_fields[i] + "'");
    const std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    const size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw IoError("'" + path + "': malformed header line '" + line + "'");
    const std::string key = line.substr(0, colon);
    if (key != header_fields[i])
      throw IoError("'" + path + "': expected header field '" +
                    std::string(header_fields[i]) + "', found '" + key + "'");
    values[i] = line.substr(colon + 1);
  }
  if (pos >= bytes.size() || bytes[pos] != '\n')
    throw IoError("'" + path + "': missing blank line after header");
  ++pos;

  if (values[0] != "1")
    throw IoError("'" + path + "': unsupported kspc version '" + values[0] +
                  "' (this reader understands version 1)");
  const GridRole role = role_from_string(values[1]);
  Polarity pol;
  try {
    pol = polarity_from_string(values[2]);
  } catch (const ParamError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
  const int nch = parse_int("nch", values[3]);
  const int ny = parse_int("ny", values[4]);
  const int nx = parse_int("nx", values[5]);
  const int R = parse_int("R", values[6]);
  const int pf_num = parse_int("pf_num", values[7]);
  const int pf_den = parse_int("pf_den", values[8]);
  const int offset = parse_int("offset", values[9]);

  SamplingPattern pattern;
  try {
    pattern = SamplingPattern::interleaved(ny, R, PartialFourier(pf_num, pf_den),
                                           offset);
  } catch (const Error& e) {
    throw IoError("'" + path + "': invalid sampling parameters: " + e.what());
  }

  if (bytes.size() - pos < size_t(ny))
    throw IoError("'" + path + "': truncated line mask (expected " +
                  std::to_string(ny) + " bytes)");
  for (int l = 0; l < ny; ++l) {
    const auto m = std::uint8_t(bytes[pos + size_t(l)]);
    if (m != pattern.line_state[size_t(l)])
      throw IoError("'" + path + "': line mask disagrees with the sampling "
                    "parameters at line " + std::to_string(l));
  }
  pos += size_t(ny);

  size_t n_values;
  KSpaceGrid grid;
  try {
    grid = KSpaceGrid(nch, ny, nx, pol);
    n_values = grid.size();
  } catch (const Error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
  const size_t need = n_values * sizeof(cplx);
  if (bytes.size() - pos < need)
    throw IoError("'" + path + "': truncated payload: have " +
                  std::to_string(bytes.size() - pos) + " bytes, need " +
                  std::to_string(need));
  if (bytes.size() - pos > need)
    throw IoError("'" + path + "': " +
                  std::to_string(bytes.size() - pos - need) +
                  " trailing bytes after payload");
  std::memcpy(grid.data.data(), bytes.data() + pos, need);
  try {
    grid.check_finite("payload of '" + path + "'");
    check_payload(grid, pattern, role, "'" + path + "'");
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
  return GridFile{std::move(grid), std::move(pattern), role};
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  ds.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  save_grid((base / "epi_pos.kspc").string(), ds.epi.pos, ds.pattern, GridRole::epi);
  save_grid((base / "epi_neg.kspc").string(), ds.epi.neg, ds.pattern, GridRole::epi);
  save_grid((base / "acs_pos.kspc").string(), ds.acs.pos, ds.acs_pattern,
            GridRole::acs);
  save_grid((base / "acs_neg.kspc").string(), ds.acs.neg, ds.acs_pattern,
            GridRole::acs);
  if (ds.gold) {
    const SamplingPattern full = SamplingPattern::full(ds.gold->pos.ny);
    save_grid((base / "gold_pos.kspc").string(), ds.gold->pos, full, GridRole::gold);
    save_grid((base / "gold_neg.kspc").string(), ds.gold->neg, full, GridRole::gold);
  }
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  auto want = [&](const char* name, GridRole role, Polarity pol) {
    GridFile gf = load_grid((base / name).string());
    if (gf.role != role)
      throw IoError((base / name).string() + ": expected role '" +
                    to_string(role) + "', found '" + to_string(gf.role) + "'");
    if (gf.grid.polarity != pol)
      throw IoError((base / name).string() + ": expected polarity '" +
                    to_string(pol) + "', found '" + to_string(gf.grid.polarity) +
                    "'");
    return gf;
  };
  GridFile ep = want("epi_pos.kspc", GridRole::epi, Polarity::positive);
  GridFile en = want("epi_neg.kspc", GridRole::epi, Polarity::negative);
  GridFile ap = want("acs_pos.kspc", GridRole::acs, Polarity::positive);
  GridFile an = want("acs_neg.kspc", GridRole::acs, Polarity::negative);
  if (!(ep.pattern == en.pattern))
    throw IoError(dir + ": positive/negative EPI files disagree on sampling");
  if (!(ap.pattern == an.pattern))
    throw IoError(dir + ": positive/negative ACS files disagree on sampling");

  Dataset ds;
  ds.epi = GridPair{std::move(ep.grid), std::move(en.grid)};
  ds.pattern = std::move(ep.pattern);
  ds.acs = GridPair{std::move(ap.grid), std::move(an.grid)};
  ds.acs_pattern = std::move(ap.pattern);
  if (fs::exists(base / "gold_pos.kspc") || fs::exists(base / "gold_neg.kspc")) {
    GridFile gp = want("gold_pos.kspc", GridRole::gold, Polarity::positive);
    GridFile gn = want("gold_neg.kspc", GridRole::gold, Polarity::negative);
    ds.gold = GridPair{std::move(gp.grid), std::move(gn.grid)};
  }
  try {
    ds.validate();
  } catch (const Error& e) {
    throw IoError(dir + ": inconsistent dataset: " + e.what());
  }
  return ds;
}

} // namespace loraks
