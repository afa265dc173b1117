#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace specrec {

// Spectral reflectance image, band-major: data[(b*H + y)*W + x].
// Reflectance content is expected in [0,1]; derived quantities (projections,
// network residuals) reuse the container and may leave that range, so the
// range check is explicit rather than enforced on construction.
struct SpectralCube {
  int bands = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  SpectralCube() = default;
  SpectralCube(int bands, int height, int width, double fill = 0.0);

  int pixels() const { return height * width; }
  double& at(int b, int y, int x) { return data[(static_cast<std::size_t>(b) * height + y) * width + x]; }
  double at(int b, int y, int x) const { return data[(static_cast<std::size_t>(b) * height + y) * width + x]; }

  void validate_shape() const;
  bool in_unit_range() const;       // all entries in [0,1]
  void require_reflectance() const; // throws when outside [0,1] or non-finite
};

// Stack of M RGB images, 3M channels, same layout as SpectralCube.
struct RgbStack {
  int m_illums = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  RgbStack() = default;
  RgbStack(int m_illums, int height, int width, double fill = 0.0);

  int channels() const { return 3 * m_illums; }
  int pixels() const { return height * width; }
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  void validate() const;  // finite, nonnegative, shape consistent
};

// Round every entry to the nearest f32 value (the SPC1 storage precision).
void quantize_f32(std::vector<double>& values);

// SPC1 container: magic "SPC1", then little-endian u32 channel/height/width,
// then the band-major payload as little-endian f32.
void save_spc1(const std::string& path, int channels, int height, int width, const std::vector<double>& data);
void load_spc1(const std::string& path, int& channels, int& height, int& width, std::vector<double>& data);

void save_cube(const SpectralCube& cube, const std::string& path);
SpectralCube load_cube(const std::string& path);
void save_stack(const RgbStack& stack, const std::string& path);
RgbStack load_stack(const std::string& path);

}  // namespace specrec
