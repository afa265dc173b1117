#pragma once

#include <string>
#include <vector>

#include "specrec/grid.hpp"

namespace specrec {

// Camera spectral sensitivity, 3 channels x B bands, row-major.
struct CssMatrix {
  int bands = 0;
  std::vector<double> data;  // data[c*bands + b], c in {0:red, 1:green, 2:blue}

  CssMatrix() = default;
  CssMatrix(int bands, std::vector<double> values);

  double& at(int channel, int band) { return data[static_cast<std::size_t>(channel) * bands + band]; }
  double at(int channel, int band) const { return data[static_cast<std::size_t>(channel) * bands + band]; }

  void validate() const;  // shape 3xB, entries finite and >= 0
};

// Relative spectral power of one light source on the band grid.
struct IlluminationSpectrum {
  std::string label;
  std::vector<double> values;

  IlluminationSpectrum() = default;
  IlluminationSpectrum(std::string label, std::vector<double> values);

  int bands() const { return static_cast<int>(values.size()); }
  double max_value() const;
  void validate() const;
};

// Positive per-image rescaling applied to the subspace component.
struct RescaleFactor {
  double value = 1.0;

  RescaleFactor() = default;
  explicit RescaleFactor(double v);
};

// Stacked per-illumination sensor x light blocks, 3M x B row-major.
struct SystemMatrix {
  int m_illums = 0;
  int bands = 0;
  std::vector<double> data;  // data[row*bands + b]

  int rows() const { return 3 * m_illums; }
  double& at(int row, int band) { return data[static_cast<std::size_t>(row) * bands + band]; }
  double at(int row, int band) const { return data[static_cast<std::size_t>(row) * bands + band]; }

  void validate() const;
};

// Vertical stack of S (.) L_m blocks: row block m holds each CSS channel
// scaled elementwise by illumination m.
SystemMatrix build_system_matrix(const CssMatrix& css, const std::vector<IlluminationSpectrum>& illums);

// CSV with 4 columns "wavelength_nm,red,green,blue"; '#' comments allowed.
CssMatrix load_css_csv(const std::string& path, SamplingGrid* grid_out = nullptr);
void save_css_csv(const CssMatrix& css, const SamplingGrid& grid, const std::string& path);

}  // namespace specrec
