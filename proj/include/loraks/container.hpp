#pragma once

#include <string>

#include "loraks/kspace.hpp"

namespace loraks {

// .kspc: a small self-describing container for one k-space frame.
//
//   header   UTF-8 "field:value" lines terminated by one blank line, in
//            this fixed order: version, role, polarity, nch, ny, nx, R,
//            pf_num, pf_den, offset.  version is 1.
//   mask     ny bytes, one per ky line: 0 skipped, 1 acquired positive,
//            2 acquired negative.  Must agree with the pattern derived
//            from (R, pf, offset) for EPI roles; ACS/gold roles use the
//            same encoding.
//   payload  nch*ny*nx little-endian complex<double> samples (re, im),
//            row-major over (channel, ky, kx).
//
// Writes are atomic (temp file + rename) and byte-deterministic.
enum class GridRole { epi, acs, gold };

std::string to_string(GridRole r);
GridRole role_from_string(const std::string& s);

struct GridFile {
  KSpaceGrid grid;
  SamplingPattern pattern;
  GridRole role = GridRole::epi;
};

void save_grid(const std::string& path, const KSpaceGrid& grid,
               const SamplingPattern& pattern, GridRole role);
GridFile load_grid(const std::string& path);

// A dataset directory holds epi_pos/epi_neg/acs_pos/acs_neg.kspc and
// optionally gold_pos/gold_neg.kspc.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

} // namespace loraks
