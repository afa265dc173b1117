#pragma once

#include <string>
#include <vector>

namespace specrec {

// Uniform wavelength axis shared by all spectral quantities.
struct SamplingGrid {
  double start_nm = 420.0;
  double step_nm = 10.0;
  int count = 31;

  double wavelength(int i) const { return start_nm + step_nm * i; }
  double end_nm() const { return wavelength(count - 1); }
  bool operator==(const SamplingGrid&) const = default;

  // 31 bands, 420..720 nm at 10 nm
  static SamplingGrid bands() { return {420.0, 10.0, 31}; }
  // 301 samples, 420..720 nm at 1 nm
  static SamplingGrid fine() { return {420.0, 1.0, 301}; }

  void validate() const;  // throws std::invalid_argument
};

// One spectral curve (reflectance slice, illumination, CSS channel) on a grid.
struct SpectralCurve {
  SamplingGrid grid;
  std::vector<double> values;

  SpectralCurve() = default;
  SpectralCurve(SamplingGrid g, std::vector<double> v);

  void validate() const;
};

// Piecewise-linear interpolation of `curve` at the target grid's wavelengths.
// Queries outside the source range clamp to the nearest endpoint value.
// Exact at wavelengths shared between the two grids.
SpectralCurve resample_linear(const SpectralCurve& curve, const SamplingGrid& target);

// CSV with lines "wavelength_nm,value", ascending wavelengths, '#' comments.
// Non-uniform wavelength spacing is rejected (grids are uniform by contract).
SpectralCurve load_curve_csv(const std::string& path);
void save_curve_csv(const SpectralCurve& curve, const std::string& path);

}  // namespace specrec
