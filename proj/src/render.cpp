#include "specrec/render.hpp"

#include <stdexcept>

namespace specrec {

namespace {

void check_band_agreement(const SpectralCube& r, const CssMatrix& s, const IlluminationSpectrum& l, const char* who) {
  if (s.bands != r.bands || l.bands() != r.bands)
    throw std::invalid_argument(std::string(who) + ": reflectance, CSS and illumination must share one grid");
}

// one channel of (S (.) L) . R accumulated into the given plane
void accumulate_channel(const SpectralCube& r, const CssMatrix& s, const IlluminationSpectrum& l,
                        int channel, double weight, double* out_plane) {
  const int n = r.pixels();
  for (int b = 0; b < r.bands; ++b) {
    const double coeff = s.at(channel, b) * l.values[b] * weight;
    if (coeff == 0.0) continue;
    const double* band = r.data.data() + static_cast<std::size_t>(b) * n;
    for (int p = 0; p < n; ++p) out_plane[p] += coeff * band[p];
  }
}

}  // namespace

RgbStack render_discrete(const SpectralCube& reflectance, const CssMatrix& css, const IlluminationSpectrum& illum) {
  return render_discrete_stack(reflectance, css, {illum});
}

RgbStack render_discrete_stack(const SpectralCube& reflectance, const CssMatrix& css,
                               const std::vector<IlluminationSpectrum>& illums) {
  reflectance.validate_shape();
  css.validate();
  if (illums.empty()) throw std::invalid_argument("render_discrete_stack: empty illumination list");
  RgbStack out(static_cast<int>(illums.size()), reflectance.height, reflectance.width);
  const int n = reflectance.pixels();
  for (std::size_t m = 0; m < illums.size(); ++m) {
    check_band_agreement(reflectance, css, illums[m], "render_discrete");
    for (int c = 0; c < 3; ++c) {
      double* plane = out.data.data() + (static_cast<std::size_t>(3 * m + c)) * n;
      accumulate_channel(reflectance, css, illums[m], c, 1.0, plane);
    }
  }
  return out;
}

RgbStack render_fine(const SpectralCube& reflectance_fine, const CssMatrix& css_fine,
                     const IlluminationSpectrum& illum_fine, double step_nm, double scale) {
  reflectance_fine.validate_shape();
  css_fine.validate();
  check_band_agreement(reflectance_fine, css_fine, illum_fine, "render_fine");
  if (step_nm <= 0.0) throw std::invalid_argument("render_fine: step_nm must be > 0");
  RgbStack out(1, reflectance_fine.height, reflectance_fine.width);
  const int n = reflectance_fine.pixels();
  for (int c = 0; c < 3; ++c) {
    double* plane = out.data.data() + static_cast<std::size_t>(c) * n;
    accumulate_channel(reflectance_fine, css_fine, illum_fine, c, step_nm * scale, plane);
  }
  return out;
}

double fine_white_scale(const CssMatrix& css_fine, const IlluminationSpectrum& illum_ref_fine, double step_nm) {
  css_fine.validate();
  if (illum_ref_fine.bands() != css_fine.bands)
    throw std::invalid_argument("fine_white_scale: CSS and illumination must share one grid");
  double best = 0.0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (int b = 0; b < css_fine.bands; ++b) sum += css_fine.at(c, b) * illum_ref_fine.values[b] * step_nm;
    if (sum > best) best = sum;
  }
  if (best <= 0.0) throw std::invalid_argument("fine_white_scale: zero response to the reference illumination");
  return best;
}

double discrete_white_scale(const CssMatrix& css, const IlluminationSpectrum& illum_ref) {
  return fine_white_scale(css, illum_ref, 1.0);
}

int reference_illumination(const std::vector<IlluminationSpectrum>& illums) {
  if (illums.empty()) throw std::invalid_argument("reference_illumination: empty set");
  int best = 0;
  double best_max = illums[0].max_value();
  for (std::size_t m = 1; m < illums.size(); ++m) {
    const double mv = illums[m].max_value();
    if (mv > best_max) {
      best_max = mv;
      best = static_cast<int>(m);
    }
  }
  return best;
}

}  // namespace specrec
