#include "specrec/grid.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace specrec {

void SamplingGrid::validate() const {
  if (step_nm <= 0.0) throw std::invalid_argument("SamplingGrid: step_nm must be > 0");
  if (count < 1) throw std::invalid_argument("SamplingGrid: count must be >= 1");
}

SpectralCurve::SpectralCurve(SamplingGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
  validate();
}

void SpectralCurve::validate() const {
  grid.validate();
  if (values.size() != static_cast<std::size_t>(grid.count))
    throw std::invalid_argument("SpectralCurve: values.size() != grid.count");
  for (double x : values)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::invalid_argument("SpectralCurve: values must be finite and >= 0");
}

SpectralCurve resample_linear(const SpectralCurve& curve, const SamplingGrid& target) {
  curve.validate();
  target.validate();
  if (curve.values.empty()) throw std::invalid_argument("resample_linear: empty curve");

  const SamplingGrid& src = curve.grid;
  std::vector<double> out(target.count);
  for (int i = 0; i < target.count; ++i) {
    const double wl = target.wavelength(i);
    const double pos = (wl - src.start_nm) / src.step_nm;
    if (pos <= 0.0) {
      out[i] = curve.values.front();
    } else if (pos >= src.count - 1) {
      out[i] = curve.values.back();
    } else {
      const int lo = static_cast<int>(std::floor(pos));
      const double t = pos - lo;
      out[i] = (1.0 - t) * curve.values[lo] + t * curve.values[lo + 1];
    }
  }
  return SpectralCurve(target, std::move(out));
}

SpectralCurve load_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_curve_csv: cannot open " + path);
  std::vector<double> wl, val;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double w, v;
    char comma;
    if (!(ls >> w >> comma >> v) || comma != ',')
      throw std::runtime_error("load_curve_csv: bad line in " + path + ": " + line);
    if (!wl.empty() && w <= wl.back())
      throw std::runtime_error("load_curve_csv: wavelengths not ascending in " + path);
    wl.push_back(w);
    val.push_back(v);
  }
  if (wl.empty()) throw std::runtime_error("load_curve_csv: no samples in " + path);
  SamplingGrid grid;
  grid.start_nm = wl.front();
  grid.count = static_cast<int>(wl.size());
  grid.step_nm = grid.count > 1 ? wl[1] - wl[0] : 1.0;
  for (std::size_t i = 1; i < wl.size(); ++i)
    if (std::abs(wl[i] - (grid.start_nm + grid.step_nm * i)) > 1e-6)
      throw std::runtime_error("load_curve_csv: non-uniform wavelength spacing in " + path);
  return SpectralCurve(grid, std::move(val));
}

void save_curve_csv(const SpectralCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_curve_csv: cannot open " + path);
  out << std::setprecision(17);
  for (int i = 0; i < curve.grid.count; ++i)
    out << curve.grid.wavelength(i) << ',' << curve.values[i] << '\n';
  if (!out) throw std::runtime_error("save_curve_csv: write failed for " + path);
}

}  // namespace specrec
