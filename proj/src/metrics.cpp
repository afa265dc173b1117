#include "specrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace specrec {
namespace {

void require_same_shape(const SpectralCube& a, const SpectralCube& b) {
    if (a.bands != b.bands || a.height != b.height || a.width != b.width) {
        throw std::invalid_argument("metrics: cube shapes differ");
    }
}

double mse(const SpectralCube& a, const SpectralCube& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

std::vector<double> gaussian_window(int radius, double sigma) {
    const int size = 2 * radius + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    double sum = 0.0;
    for (int y = -radius; y <= radius; ++y) {
        for (int x = -radius; x <= radius; ++x) {
            const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(y + radius) * size + (x + radius)] = v;
            sum += v;
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

// Mean SSIM over all fully-interior window placements of one band.
double ssim_band(const SpectralCube& a, const SpectralCube& b, int band,
                 const std::vector<double>& win, int radius, double c1,
                 double c2) {
    const int size = 2 * radius + 1;
    double total = 0.0;
    std::size_t count = 0;
    for (int cy = radius; cy < a.height - radius; ++cy) {
        for (int cx = radius; cx < a.width - radius; ++cx) {
            double mu_a = 0.0, mu_b = 0.0;
            double aa = 0.0, bb = 0.0, ab = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const double g =
                        win[static_cast<std::size_t>(dy + radius) * size +
                            (dx + radius)];
                    const double va = a.at(band, cy + dy, cx + dx);
                    const double vb = b.at(band, cy + dy, cx + dx);
                    mu_a += g * va;
                    mu_b += g * vb;
                    aa += g * va * va;
                    bb += g * vb * vb;
                    ab += g * va * vb;
                }
            }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den =
                (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace

double mae(const SpectralCube& a, const SpectralCube& b) {
    require_same_shape(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        acc += std::abs(a.data[i] - b.data[i]);
    }
    return acc / static_cast<double>(a.data.size());
}

double rmse(const SpectralCube& a, const SpectralCube& b) {
    require_same_shape(a, b);
    return std::sqrt(mse(a, b));
}

double sas(const SpectralCube& a, const SpectralCube& b,
           std::size_t* zero_count) {
    require_same_shape(a, b);
    std::size_t zeros = 0;
    double total = 0.0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            double na = 0.0, nb = 0.0;
            for (int band = 0; band < a.bands; ++band) {
                const double va = a.at(band, y, x);
                const double vb = b.at(band, y, x);
                na += va * va;
                nb += vb * vb;
            }
            if (na == 0.0 || nb == 0.0) {
                ++zeros;  // angle undefined; counted and scored as 0
                continue;
            }
            // 2*atan2(|u-v|, |u+v|) on unit vectors equals acos of the
            // clamped cosine but stays exact at 0 and pi, where acos of a
            // rounded cosine drifts by ~1e-8.
            const double inv_a = 1.0 / std::sqrt(na);
            const double inv_b = 1.0 / std::sqrt(nb);
            double diff = 0.0, sum = 0.0;
            for (int band = 0; band < a.bands; ++band) {
                const double u = a.at(band, y, x) * inv_a;
                const double v = b.at(band, y, x) * inv_b;
                diff += (u - v) * (u - v);
                sum += (u + v) * (u + v);
            }
            total += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
        }
    }
    if (zero_count != nullptr) *zero_count = zeros;
    return total / static_cast<double>(a.pixels());
}

double psnr(const SpectralCube& a, const SpectralCube& b, double peak,
            bool* infinite) {
    require_same_shape(a, b);
    const double err = mse(a, b);
    if (err == 0.0) {
        if (infinite != nullptr) *infinite = true;
        return std::numeric_limits<double>::infinity();
    }
    if (infinite != nullptr) *infinite = false;
    return 10.0 * std::log10(peak * peak / err);
}

double ssim(const SpectralCube& a, const SpectralCube& b, double peak) {
    require_same_shape(a, b);
    constexpr int kRadius = 5;  // 11x11 window
    constexpr double kSigma = 1.5;
    if (a.height < 2 * kRadius + 1 || a.width < 2 * kRadius + 1) {
        throw std::invalid_argument("ssim: image smaller than 11x11 window");
    }
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const std::vector<double> win = gaussian_window(kRadius, kSigma);
    double total = 0.0;
    for (int band = 0; band < a.bands; ++band) {
        total += ssim_band(a, b, band, win, kRadius, c1, c2);
    }
    return total / static_cast<double>(a.bands);
}

std::vector<double> per_band_mae(const SpectralCube& a, const SpectralCube& b) {
    require_same_shape(a, b);
    const std::size_t pixels = static_cast<std::size_t>(a.pixels());
    std::vector<double> out(static_cast<std::size_t>(a.bands), 0.0);
    for (int band = 0; band < a.bands; ++band) {
        double acc = 0.0;
        const std::size_t base = static_cast<std::size_t>(band) * pixels;
        for (std::size_t i = 0; i < pixels; ++i) {
            acc += std::abs(a.data[base + i] - b.data[base + i]);
        }
        out[static_cast<std::size_t>(band)] = acc / static_cast<double>(pixels);
    }
    return out;
}

std::vector<double> pixel_mae_map(const SpectralCube& a,
                                  const SpectralCube& b) {
    require_same_shape(a, b);
    const std::size_t pixels = static_cast<std::size_t>(a.pixels());
    std::vector<double> out(pixels, 0.0);
    for (int band = 0; band < a.bands; ++band) {
        const std::size_t base = static_cast<std::size_t>(band) * pixels;
        for (std::size_t i = 0; i < pixels; ++i) {
            out[i] += std::abs(a.data[base + i] - b.data[base + i]);
        }
    }
    for (double& v : out) v /= static_cast<double>(a.bands);
    return out;
}

MetricsReport evaluate(const SpectralCube& recovered, const SpectralCube& truth,
                       double peak) {
    MetricsReport r;
    r.mae = mae(recovered, truth);
    r.rmse = rmse(recovered, truth);
    r.sas = sas(recovered, truth, &r.zero_pixel_count);
    r.psnr = psnr(recovered, truth, peak, &r.psnr_infinite);
    r.ssim = ssim(recovered, truth, peak);
    r.band_mae = per_band_mae(recovered, truth);
    return r;
}

std::string MetricsReport::to_key_value() const {
    std::ostringstream out;
    out.precision(12);
    out << "mae=" << mae << "\n";
    out << "rmse=" << rmse << "\n";
    out << "sas=" << sas << "\n";
    if (psnr_infinite) {
        out << "psnr=inf\n";
    } else {
        out << "psnr=" << psnr << "\n";
    }
    out << "ssim=" << ssim << "\n";
    out << "sas_zero_pixels=" << zero_pixel_count << "\n";
    for (std::size_t i = 0; i < band_mae.size(); ++i) {
        out << "band_mae_" << i << "=" << band_mae[i] << "\n";
    }
    return out.str();
}

std::string MetricsReport::csv_header() {
    return "label,mae,rmse,sas,psnr,ssim";
}

std::string MetricsReport::to_csv_row(const std::string& label) const {
    std::ostringstream out;
    out.precision(12);
    out << label << ',' << mae << ',' << rmse << ',' << sas << ',';
    if (psnr_infinite) {
        out << "inf";
    } else {
        out << psnr;
    }
    out << ',' << ssim;
    return out.str();
}

}  // namespace specrec
