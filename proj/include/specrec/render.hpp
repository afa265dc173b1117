#pragma once

#include <vector>

#include "specrec/image.hpp"
#include "specrec/spectral.hpp"

namespace specrec {

// Discrete color formation: I = (S (.) L) . R on a shared band grid, M=1.
RgbStack render_discrete(const SpectralCube& reflectance, const CssMatrix& css, const IlluminationSpectrum& illum);

// Stacked discrete render over several illuminations (3M channels).
RgbStack render_discrete_stack(const SpectralCube& reflectance, const CssMatrix& css,
                               const std::vector<IlluminationSpectrum>& illums);

// Rectangle-rule Riemann sum over a fine wavelength grid:
//   I^c = scale * sum_l S^c(l) L(l) R(l) dl
// All inputs must share the fine grid; `scale` defaults to 1 (raw sums).
// Pass 1/fine_white_scale(...) to normalize so that unit reflectance under
// the reference illumination peaks at 1.
RgbStack render_fine(const SpectralCube& reflectance_fine, const CssMatrix& css_fine,
                     const IlluminationSpectrum& illum_fine, double step_nm, double scale = 1.0);

// Max channel response of a perfect white reflector under the reference
// illumination, fine path: max_c sum_l S^c(l) L_ref(l) dl.
double fine_white_scale(const CssMatrix& css_fine, const IlluminationSpectrum& illum_ref_fine, double step_nm);

// Same on the band grid: max_c sum_b S^c_b L_ref_b.
double discrete_white_scale(const CssMatrix& css, const IlluminationSpectrum& illum_ref);

// Index of the reference (brightest) illumination: the one holding the
// global maximum of a jointly-normalized set; first on ties.
int reference_illumination(const std::vector<IlluminationSpectrum>& illums);

}  // namespace specrec
