#include "specrec/image.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "SPC1 I/O assumes a little-endian host");

namespace specrec {

SpectralCube::SpectralCube(int bands_, int height_, int width_, double fill)
    : bands(bands_), height(height_), width(width_),
      data(static_cast<std::size_t>(bands_) * height_ * width_, fill) {
  validate_shape();
}

void SpectralCube::validate_shape() const {
  if (bands < 1 || height < 1 || width < 1)
    throw std::invalid_argument("SpectralCube: non-positive dimension");
  if (data.size() != static_cast<std::size_t>(bands) * height * width)
    throw std::invalid_argument("SpectralCube: data size does not match shape");
}

bool SpectralCube::in_unit_range() const {
  for (double x : data)
    if (!(x >= 0.0 && x <= 1.0)) return false;
  return true;
}

void SpectralCube::require_reflectance() const {
  validate_shape();
  if (!in_unit_range())
    throw std::invalid_argument("SpectralCube: reflectance values must lie in [0,1]");
}

RgbStack::RgbStack(int m_illums_, int height_, int width_, double fill)
    : m_illums(m_illums_), height(height_), width(width_),
      data(static_cast<std::size_t>(3) * m_illums_ * height_ * width_, fill) {
  validate();
}

void RgbStack::validate() const {
  if (m_illums < 1 || height < 1 || width < 1)
    throw std::invalid_argument("RgbStack: non-positive dimension");
  if (data.size() != static_cast<std::size_t>(channels()) * height * width)
    throw std::invalid_argument("RgbStack: data size does not match shape");
  for (double x : data)
    if (!std::isfinite(x) || x < 0.0)
      throw std::invalid_argument("RgbStack: entries must be finite and >= 0");
}

void quantize_f32(std::vector<double>& values) {
  for (double& x : values) x = static_cast<double>(static_cast<float>(x));
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_spc1(const std::string& path, int channels, int height, int width, const std::vector<double>& data) {
  if (data.size() != static_cast<std::size_t>(channels) * height * width)
    throw std::invalid_argument("save_spc1: data size does not match shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_spc1: cannot open " + path);
  out.write("SPC1", 4);
  write_u32(out, static_cast<std::uint32_t>(channels));
  write_u32(out, static_cast<std::uint32_t>(height));
  write_u32(out, static_cast<std::uint32_t>(width));
  std::vector<float> payload(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) payload[i] = static_cast<float>(data[i]);
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
  if (!out) throw std::runtime_error("save_spc1: write failed for " + path);
}

void load_spc1(const std::string& path, int& channels, int& height, int& width, std::vector<double>& data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_spc1: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SPC1", 4) != 0)
    throw std::runtime_error("load_spc1: bad magic in " + path);
  channels = static_cast<int>(read_u32(in));
  height = static_cast<int>(read_u32(in));
  width = static_cast<int>(read_u32(in));
  if (!in || channels < 1 || height < 1 || width < 1)
    throw std::runtime_error("load_spc1: bad header in " + path);
  const std::size_t n = static_cast<std::size_t>(channels) * height * width;
  std::vector<float> payload(n);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n * 4));
  if (!in) throw std::runtime_error("load_spc1: truncated payload in " + path);
  data.resize(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(payload[i]);
}

void save_cube(const SpectralCube& cube, const std::string& path) {
  cube.validate_shape();
  save_spc1(path, cube.bands, cube.height, cube.width, cube.data);
}

SpectralCube load_cube(const std::string& path) {
  SpectralCube cube;
  load_spc1(path, cube.bands, cube.height, cube.width, cube.data);
  return cube;
}

void save_stack(const RgbStack& stack, const std::string& path) {
  stack.validate();
  save_spc1(path, stack.channels(), stack.height, stack.width, stack.data);
}

RgbStack load_stack(const std::string& path) {
  RgbStack stack;
  int channels = 0;
  load_spc1(path, channels, stack.height, stack.width, stack.data);
  if (channels % 3 != 0)
    throw std::runtime_error("load_stack: channel count not a multiple of 3 in " + path);
  stack.m_illums = channels / 3;
  stack.validate();
  return stack;
}

}  // namespace specrec
