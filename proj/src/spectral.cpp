#include "specrec/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace specrec {

CssMatrix::CssMatrix(int bands_, std::vector<double> values) : bands(bands_), data(std::move(values)) {
  validate();
}

void CssMatrix::validate() const {
  if (bands < 1) throw std::invalid_argument("CssMatrix: bands must be >= 1");
  if (data.size() != static_cast<std::size_t>(3) * bands)
    throw std::invalid_argument("CssMatrix: expected 3 x bands entries");
  for (double x : data)
    if (!std::isfinite(x) || x < 0.0)
      throw std::invalid_argument("CssMatrix: entries must be finite and >= 0");
}

IlluminationSpectrum::IlluminationSpectrum(std::string label_, std::vector<double> values_)
    : label(std::move(label_)), values(std::move(values_)) {
  validate();
}

double IlluminationSpectrum::max_value() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

void IlluminationSpectrum::validate() const {
  if (values.empty()) throw std::invalid_argument("IlluminationSpectrum: empty");
  for (double x : values)
    if (!std::isfinite(x) || x < 0.0)
      throw std::invalid_argument("IlluminationSpectrum: entries must be finite and >= 0");
}

RescaleFactor::RescaleFactor(double v) : value(v) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument("RescaleFactor: value must be positive and finite");
}

void SystemMatrix::validate() const {
  if (m_illums < 1) throw std::invalid_argument("SystemMatrix: M must be >= 1");
  if (bands < 1) throw std::invalid_argument("SystemMatrix: bands must be >= 1");
  if (data.size() != static_cast<std::size_t>(rows()) * bands)
    throw std::invalid_argument("SystemMatrix: data size does not match 3M x B");
}

SystemMatrix build_system_matrix(const CssMatrix& css, const std::vector<IlluminationSpectrum>& illums) {
  css.validate();
  if (illums.empty()) throw std::invalid_argument("build_system_matrix: empty illumination list");
  SystemMatrix h;
  h.m_illums = static_cast<int>(illums.size());
  h.bands = css.bands;
  h.data.resize(static_cast<std::size_t>(h.rows()) * h.bands);
  for (int m = 0; m < h.m_illums; ++m) {
    const IlluminationSpectrum& light = illums[m];
    light.validate();
    if (light.bands() != css.bands)
      throw std::invalid_argument("build_system_matrix: illumination '" + light.label + "' band count mismatch");
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < h.bands; ++b)
        h.at(3 * m + c, b) = css.at(c, b) * light.values[b];
  }
  return h;
}

CssMatrix load_css_csv(const std::string& path, SamplingGrid* grid_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_css_csv: cannot open " + path);
  std::vector<double> wl, r, g, b;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double w, cr, cg, cb;
    char c1, c2, c3;
    if (!(ls >> w >> c1 >> cr >> c2 >> cg >> c3 >> cb) || c1 != ',' || c2 != ',' || c3 != ',')
      throw std::runtime_error("load_css_csv: bad line in " + path + ": " + line);
    if (!wl.empty() && w <= wl.back())
      throw std::runtime_error("load_css_csv: wavelengths not ascending in " + path);
    wl.push_back(w);
    r.push_back(cr);
    g.push_back(cg);
    b.push_back(cb);
  }
  if (wl.empty()) throw std::runtime_error("load_css_csv: no samples in " + path);
  const int n = static_cast<int>(wl.size());
  if (grid_out) {
    grid_out->start_nm = wl.front();
    grid_out->step_nm = n > 1 ? wl[1] - wl[0] : 1.0;
    grid_out->count = n;
  }
  std::vector<double> data;
  data.reserve(3 * static_cast<std::size_t>(n));
  data.insert(data.end(), r.begin(), r.end());
  data.insert(data.end(), g.begin(), g.end());
  data.insert(data.end(), b.begin(), b.end());
  return CssMatrix(n, std::move(data));
}

void save_css_csv(const CssMatrix& css, const SamplingGrid& grid, const std::string& path) {
  css.validate();
  if (grid.count != css.bands)
    throw std::invalid_argument("save_css_csv: grid count does not match CSS bands");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_css_csv: cannot open " + path);
  out << std::setprecision(17);
  for (int b = 0; b < css.bands; ++b)
    out << grid.wavelength(b) << ',' << css.at(0, b) << ',' << css.at(1, b) << ',' << css.at(2, b) << '\n';
  if (!out) throw std::runtime_error("save_css_csv: write failed for " + path);
}

}  // namespace specrec
