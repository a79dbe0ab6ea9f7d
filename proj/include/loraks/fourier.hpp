#pragma once

#include <vector>

#include "loraks/kspace.hpp"

namespace loraks {

// Unitary, DC-centered 2-D Fourier transforms.  Both domains place their
// origin at (n/2) along each axis, so for a real-valued image the k-space
// samples satisfy k(2*dc - p) = conj(k(p)) wherever the mirror index is in
// range.  Forward and inverse are exact inverses up to roundoff and both
// preserve the Frobenius norm.
void kspace_from_image(int ny, int nx, const cplx* image, cplx* kspace);
void image_from_kspace(int ny, int nx, const cplx* kspace, cplx* image);

// Per-channel conveniences.
KSpaceGrid grid_from_channel_images(const std::vector<std::vector<cplx>>& imgs,
                                    int ny, int nx, Polarity pol);
std::vector<std::vector<cplx>> channel_images_from_grid(const KSpaceGrid& g);

} // namespace loraks
