#pragma once

#include <vector>

#include "specrec/image.hpp"
#include "specrec/spectral.hpp"

namespace specrec {

inline constexpr double kDefaultRidge = 1e-9;

// B x 3M operator P = H^T (H H^T + ridge*Id)^-1, row-major.
// Applying P to an RGB stack yields the subspace component of the reflectance.
std::vector<double> projection_operator(const SystemMatrix& h, double ridge = kDefaultRidge);

// Subspace component H^T (H H^T + ridge*Id)^-1 I, per pixel.
// With ridge -> 0 this is the exact least-norm solution of H R = I.
// An all-zero H is signalled instead of inverted.
SpectralCube subspace_project(const SystemMatrix& h, const RgbStack& stack, double ridge = kDefaultRidge);

// Classical linear baseline: omega * subspace_project(h, stack).
SpectralCube recover_linear(const SystemMatrix& h, const RgbStack& stack, RescaleFactor omega,
                            double ridge = kDefaultRidge);

// Renders I = H R, projects, and returns ||H (R - R_par)||_inf.
// Near zero for any R whenever H has full row rank: R - R_par lies in the
// null space of H.
double decomposition_residual(const SystemMatrix& h, const SpectralCube& reflectance);

// Computes the perturbed projection (H^+dH)^T ((H^+dH)(H^+dH)^T)^-1 I two
// ways: direct inversion, and the expansion of the perturbed Gram inverse
// through the SVD of H^ dH^T + dH H^^T + dH dH^T. Returns the max
// elementwise discrepancy between the two routes.
double henderson_searle_check(const SystemMatrix& h_hat, const SystemMatrix& delta_h, const RgbStack& stack);

}  // namespace specrec
