#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "specrec/image.hpp"

namespace specrec {

// Scalar scores comparing a recovered cube against ground truth.
// psnr is meaningless when psnr_infinite is set (identical inputs).
struct MetricsReport {
    double mae = 0.0;
    double rmse = 0.0;
    double sas = 0.0;   // radians
    double psnr = 0.0;  // dB
    double ssim = 0.0;
    bool psnr_infinite = false;
    std::size_t zero_pixel_count = 0;  // pixels skipped as zero-angle in sas
    std::vector<double> band_mae;      // length = bands

    std::string to_key_value() const;
    // Header row for the CSV form of this report.
    static std::string csv_header();
    std::string to_csv_row(const std::string& label) const;
};

double mae(const SpectralCube& a, const SpectralCube& b);
double rmse(const SpectralCube& a, const SpectralCube& b);

// Mean per-pixel angle between spectra: acos of the cosine clamped to
// [-1,1], evaluated in the atan2 form that is exact for identical pixels.
// Pixels where either spectrum is all-zero count as angle 0; the number of
// such pixels is reported through zero_count when non-null.
double sas(const SpectralCube& a, const SpectralCube& b,
           std::size_t* zero_count = nullptr);

// 10*log10(peak^2 / MSE). When MSE == 0 returns +inf and sets *infinite.
double psnr(const SpectralCube& a, const SpectralCube& b, double peak = 1.0,
            bool* infinite = nullptr);

// Mean SSIM per band, then averaged over bands. Gaussian window 11x11
// sigma 1.5, C1=(0.01*peak)^2, C2=(0.03*peak)^2, windows fully inside the
// image (no padding). Throws if either spatial dim is under the window.
double ssim(const SpectralCube& a, const SpectralCube& b, double peak = 1.0);

std::vector<double> per_band_mae(const SpectralCube& a, const SpectralCube& b);

// Per-pixel mean absolute error over bands; height*width values, row-major.
std::vector<double> pixel_mae_map(const SpectralCube& a, const SpectralCube& b);

MetricsReport evaluate(const SpectralCube& recovered, const SpectralCube& truth,
                       double peak = 1.0);

}  // namespace specrec
