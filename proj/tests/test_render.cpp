#include <doctest.h>

#include <cmath>
#include <vector>

#include "specrec/grid.hpp"
#include "specrec/render.hpp"
#include "specrec/rng.hpp"

using namespace specrec;

namespace {

CssMatrix random_css(int bands, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(3) * bands);
    for (double& x : v) x = rng.uniform(0.0, 1.0);
    return CssMatrix(bands, std::move(v));
}

IlluminationSpectrum random_illum(int bands, Rng& rng, const char* label) {
    std::vector<double> v(static_cast<std::size_t>(bands));
    for (double& x : v) x = rng.uniform(0.05, 1.0);
    return IlluminationSpectrum(label, std::move(v));
}

SpectralCube random_cube(int bands, int h, int w, Rng& rng) {
    SpectralCube cube(bands, h, w);
    for (double& x : cube.data) x = rng.uniform(0.0, 1.0);
    return cube;
}

}  // namespace

TEST_CASE("discrete render matches a scalar loop oracle") {
    Rng rng(21);
    const int bands = 31, h = 5, w = 7;
    const CssMatrix css = random_css(bands, rng);
    const IlluminationSpectrum illum = random_illum(bands, rng, "a");
    const SpectralCube cube = random_cube(bands, h, w, rng);

    const RgbStack got = render_discrete(cube, css, illum);
    REQUIRE(got.m_illums == 1);
    REQUIRE(got.height == h);
    REQUIRE(got.width == w);

    double worst = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int b = 0; b < bands; ++b) {
                    acc += css.at(c, b) * illum.values[static_cast<std::size_t>(b)] * cube.at(b, y, x);
                }
                worst = std::max(worst, std::abs(acc - got.at(c, y, x)));
            }
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("single-band reflectance isolates one sensitivity sample") {
    const int bands = 31;
    std::vector<double> sv(static_cast<std::size_t>(3) * bands, 0.0);
    for (int c = 0; c < 3; ++c) {
        for (int b = 0; b < bands; ++b) sv[static_cast<std::size_t>(c) * bands + b] = 0.1 * (c + 1) + 0.01 * b;
    }
    const CssMatrix css(bands, sv);
    std::vector<double> lv(static_cast<std::size_t>(bands), 0.0);
    lv[12] = 0.8;
    const IlluminationSpectrum illum("spike", lv);

    SpectralCube cube(bands, 1, 1);
    cube.at(12, 0, 0) = 1.0;
    const RgbStack got = render_discrete(cube, css, illum);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(got.at(c, 0, 0) - css.at(c, 12) * 0.8) < 1e-15);
    }
}

TEST_CASE("stacked render concatenates per-illumination renders") {
    Rng rng(22);
    const int bands = 31, h = 4, w = 3;
    const CssMatrix css = random_css(bands, rng);
    const std::vector<IlluminationSpectrum> illums = {
        random_illum(bands, rng, "a"), random_illum(bands, rng, "b"),
        random_illum(bands, rng, "c")};
    const SpectralCube cube = random_cube(bands, h, w, rng);

    const RgbStack stack = render_discrete_stack(cube, css, illums);
    REQUIRE(stack.m_illums == 3);
    for (int m = 0; m < 3; ++m) {
        const RgbStack one = render_discrete(cube, css, illums[static_cast<std::size_t>(m)]);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    CHECK(stack.at(3 * m + c, y, x) == one.at(c, y, x));
                }
            }
        }
    }
}

TEST_CASE("fine render matches the rectangle-rule oracle") {
    Rng rng(23);
    const SamplingGrid fine = SamplingGrid::fine();
    const int n = fine.count;
    const CssMatrix css = random_css(n, rng);
    const IlluminationSpectrum illum = random_illum(n, rng, "fine");
    const SpectralCube cube = random_cube(n, 2, 3, rng);

    const double scale = 0.37;
    const RgbStack got = render_fine(cube, css, illum, fine.step_nm, scale);
    double worst = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 3; ++x) {
                double acc = 0.0;
                for (int l = 0; l < n; ++l) {
                    acc += css.at(c, l) * illum.values[static_cast<std::size_t>(l)] * cube.at(l, y, x);
                }
                acc *= fine.step_nm * scale;
                worst = std::max(worst, std::abs(acc - got.at(c, y, x)));
            }
        }
    }
    CHECK(worst <= 1e-12);
}

// Band-constant spectra make the fine Riemann sum exactly proportional to the
// discrete sum, so after white normalization the two paths agree to rounding.
// The fine axis must tile each 10 nm bin with the same number of samples,
// hence 310 samples spanning 420..729 here.
TEST_CASE("band-constant spectra render identically on both paths") {
    Rng rng(24);
    const int bands = 31;
    const SamplingGrid fine_grid{420.0, 1.0, 310};

    const CssMatrix css = random_css(bands, rng);
    const IlluminationSpectrum illum = random_illum(bands, rng, "ref");
    const SpectralCube cube = random_cube(bands, 3, 4, rng);

    auto lift = [&](const std::vector<double>& v) {
        std::vector<double> out(static_cast<std::size_t>(fine_grid.count));
        for (int l = 0; l < fine_grid.count; ++l) out[static_cast<std::size_t>(l)] = v[static_cast<std::size_t>(l / 10)];
        return out;
    };
    std::vector<double> css_fine_v;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> row(css.data.begin() + static_cast<std::ptrdiff_t>(c) * bands,
                                css.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * bands);
        const std::vector<double> lifted = lift(row);
        css_fine_v.insert(css_fine_v.end(), lifted.begin(), lifted.end());
    }
    const CssMatrix css_fine(fine_grid.count, css_fine_v);
    const IlluminationSpectrum illum_fine("ref", lift(illum.values));
    SpectralCube cube_fine(fine_grid.count, 3, 4);
    for (int l = 0; l < fine_grid.count; ++l) {
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 4; ++x) cube_fine.at(l, y, x) = cube.at(l / 10, y, x);
        }
    }

    const double ws_fine = fine_white_scale(css_fine, illum_fine, fine_grid.step_nm);
    const double ws_disc = discrete_white_scale(css, illum);
    const RgbStack fine = render_fine(cube_fine, css_fine, illum_fine, fine_grid.step_nm, 1.0 / ws_fine);
    RgbStack disc = render_discrete(cube, css, illum);
    for (double& v : disc.data) v /= ws_disc;

    double worst = 0.0;
    for (std::size_t i = 0; i < disc.data.size(); ++i) {
        worst = std::max(worst, std::abs(disc.data[i] - fine.data[i]));
    }
    CHECK(worst <= 1e-12);
}

// A 10 nm rectangle rule is exponentially accurate on wide Gaussians, so the
// gap only shows once a spectrum has sub-band structure. A few-nm LED-style
// spike against a steep reflectance edge exposes it.
TEST_CASE("sub-band spectral structure leaves a visible discretization gap") {
    const SamplingGrid bands_grid = SamplingGrid::bands();
    const SamplingGrid fine_grid = SamplingGrid::fine();

    auto gauss = [](double nm, double center, double width) {
        const double t = (nm - center) / width;
        return std::exp(-0.5 * t * t);
    };
    auto sampled = [&](const SamplingGrid& g, auto&& f) {
        std::vector<double> v(static_cast<std::size_t>(g.count));
        for (int i = 0; i < g.count; ++i) v[static_cast<std::size_t>(i)] = f(g.wavelength(i));
        return v;
    };

    std::vector<double> css_b, css_f;
    const double centers[3] = {610.0, 540.0, 465.0};
    for (double c : centers) {
        auto channel = [&](double nm) { return gauss(nm, c, 30.0); };
        const std::vector<double> vb = sampled(bands_grid, channel);
        const std::vector<double> vf = sampled(fine_grid, channel);
        css_b.insert(css_b.end(), vb.begin(), vb.end());
        css_f.insert(css_f.end(), vf.begin(), vf.end());
    }
    const CssMatrix css(bands_grid.count, css_b);
    const CssMatrix css_fine(fine_grid.count, css_f);

    auto spike = [&](double nm) { return 0.02 + gauss(nm, 593.0, 3.0); };
    const IlluminationSpectrum illum("spiky", sampled(bands_grid, spike));
    const IlluminationSpectrum illum_fine("spiky", sampled(fine_grid, spike));

    auto edge = [](double nm) { return 1.0 / (1.0 + std::exp(-(nm - 590.0) / 4.0)); };
    SpectralCube cube(bands_grid.count, 1, 1);
    SpectralCube cube_fine(fine_grid.count, 1, 1);
    for (int i = 0; i < bands_grid.count; ++i) cube.at(i, 0, 0) = edge(bands_grid.wavelength(i));
    for (int i = 0; i < fine_grid.count; ++i) cube_fine.at(i, 0, 0) = edge(fine_grid.wavelength(i));

    const double ws_fine = fine_white_scale(css_fine, illum_fine, fine_grid.step_nm);
    const double ws_disc = discrete_white_scale(css, illum);
    const RgbStack fine = render_fine(cube_fine, css_fine, illum_fine, fine_grid.step_nm, 1.0 / ws_fine);
    RgbStack disc = render_discrete(cube, css, illum);
    for (double& v : disc.data) v /= ws_disc;

    double gap = 0.0;
    for (std::size_t i = 0; i < disc.data.size(); ++i) {
        gap = std::max(gap, std::abs(disc.data[i] - fine.data[i]));
    }
    CHECK(gap > 1e-3);
}

TEST_CASE("white scale rejects a zero response and picks the max channel") {
    const int bands = 4;
    const CssMatrix zero(bands, std::vector<double>(12, 0.0));
    const IlluminationSpectrum flat("flat", {1.0, 1.0, 1.0, 1.0});
    CHECK_THROWS(discrete_white_scale(zero, flat));

    std::vector<double> v(12, 0.1);
    v[static_cast<std::size_t>(1) * bands + 2] = 2.0;  // green channel dominates
    const CssMatrix css(bands, v);
    // green: 0.1*3 + 2.0 = 2.3, others 0.4
    CHECK(std::abs(discrete_white_scale(css, flat) - 2.3) < 1e-15);
}

TEST_CASE("reference illumination is the one holding the global max") {
    const IlluminationSpectrum a("a", {0.2, 0.4, 0.1});
    const IlluminationSpectrum b("b", {0.9, 0.1, 0.2});
    const IlluminationSpectrum c("c", {0.3, 0.3, 0.3});
    CHECK(reference_illumination({a, b, c}) == 1);
    CHECK(reference_illumination({a, c}) == 0);
    const IlluminationSpectrum d("d", {0.4, 0.2, 0.1});
    CHECK(reference_illumination({d, a}) == 0);  // tie at 0.4 keeps the first
}
