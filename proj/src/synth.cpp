#include "specrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "specrec/render.hpp"

namespace specrec {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double gauss(double x, double center, double width) {
    const double t = (x - center) / width;
    return std::exp(-0.5 * t * t);
}

SpectralCurve lift(const std::vector<double>& band_values, const SamplingGrid& band_grid,
                   const SamplingGrid& fine_grid) {
    return resample_linear(SpectralCurve(band_grid, band_values), fine_grid);
}

template <typename Img>
Img flip_x(const Img& src, int channels) {
    Img out = src;
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < src.height; ++y) {
            for (int x = 0; x < src.width; ++x) {
                out.at(c, y, x) = src.at(c, y, src.width - 1 - x);
            }
        }
    }
    return out;
}

template <typename Img>
Img flip_y(const Img& src, int channels) {
    Img out = src;
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < src.height; ++y) {
            for (int x = 0; x < src.width; ++x) {
                out.at(c, y, x) = src.at(c, src.height - 1 - y, x);
            }
        }
    }
    return out;
}

template <typename Img>
std::vector<Img> crop_impl(const Img& src, int channels, int patch, int stride) {
    if (patch < 1 || stride < 1) throw std::invalid_argument("crop_patches: patch and stride must be >= 1");
    if (patch > src.height || patch > src.width) {
        throw std::invalid_argument("crop_patches: patch larger than image");
    }
    std::vector<Img> out;
    for (int oy = 0; oy + patch <= src.height; oy += stride) {
        for (int ox = 0; ox + patch <= src.width; ox += stride) {
            Img p = src;
            p.height = patch;
            p.width = patch;
            p.data.assign(static_cast<std::size_t>(channels) * patch * patch, 0.0);
            for (int c = 0; c < channels; ++c) {
                for (int y = 0; y < patch; ++y) {
                    for (int x = 0; x < patch; ++x) {
                        p.at(c, y, x) = src.at(c, oy + y, ox + x);
                    }
                }
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::string index_name(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03zu", prefix, i);
    return buf;
}

void save_triples(const std::vector<Triple>& triples, const char* prefix, const fs::path& dir,
                  const SamplingGrid& band_grid, json& out) {
    out = json::array();
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const Triple& t = triples[i];
        const std::string base = index_name(prefix, i);
        json entry;
        entry["input"] = base + ".input.spc1";
        entry["truth"] = base + ".truth.spc1";
        entry["css"] = base + ".css.csv";
        entry["illum_labels"] = t.illum_labels;
        entry["render_gap"] = t.render_gap;
        save_stack(t.input, (dir / (base + ".input.spc1")).string());
        save_cube(t.truth, (dir / (base + ".truth.spc1")).string());
        save_css_csv(t.css, band_grid, (dir / (base + ".css.csv")).string());
        out.push_back(entry);
    }
}

std::vector<Triple> load_triples(const json& list, const fs::path& dir) {
    std::vector<Triple> out;
    for (const json& entry : list) {
        Triple t;
        t.input = load_stack((dir / entry.at("input").get<std::string>()).string());
        t.truth = load_cube((dir / entry.at("truth").get<std::string>()).string());
        t.css = load_css_csv((dir / entry.at("css").get<std::string>()).string());
        t.illum_labels = entry.at("illum_labels").get<std::vector<std::string>>();
        t.render_gap = entry.at("render_gap").get<double>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

std::vector<IlluminationSpectrum> normalize_illuminations(std::vector<IlluminationSpectrum> illums) {
    if (illums.empty()) throw std::invalid_argument("normalize_illuminations: empty set");
    double global_max = 0.0;
    for (const IlluminationSpectrum& s : illums) {
        s.validate();
        global_max = std::max(global_max, s.max_value());
    }
    if (global_max <= 0.0) throw std::invalid_argument("normalize_illuminations: all spectra are zero");
    for (IlluminationSpectrum& s : illums) {
        for (double& v : s.values) v /= global_max;
    }
    return illums;
}

Triple synth_triple(const SpectralCube& truth, const CssMatrix& css,
                    const std::vector<IlluminationSpectrum>& illums,
                    const SamplingGrid& band_grid, const SamplingGrid& fine_grid) {
    band_grid.validate();
    fine_grid.validate();
    truth.validate_shape();
    css.validate();
    if (illums.empty()) throw std::invalid_argument("synth_triple: no illuminations");
    if (truth.bands != band_grid.count || css.bands != band_grid.count) {
        throw std::invalid_argument("synth_triple: inputs not on the band grid");
    }
    for (const IlluminationSpectrum& s : illums) {
        if (s.bands() != band_grid.count) throw std::invalid_argument("synth_triple: illumination not on the band grid");
    }

    Triple out;
    out.truth = truth;
    quantize_f32(out.truth.data);
    out.truth.require_reflectance();
    out.css = css;

    // lift CSS to the fine grid
    std::vector<double> css_fine_v;
    css_fine_v.reserve(static_cast<std::size_t>(3) * fine_grid.count);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> row(css.data.begin() + static_cast<std::ptrdiff_t>(c) * css.bands,
                                css.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * css.bands);
        const SpectralCurve lifted = lift(row, band_grid, fine_grid);
        css_fine_v.insert(css_fine_v.end(), lifted.values.begin(), lifted.values.end());
    }
    const CssMatrix css_fine(fine_grid.count, css_fine_v);

    std::vector<IlluminationSpectrum> illums_fine;
    for (const IlluminationSpectrum& s : illums) {
        illums_fine.emplace_back(s.label, lift(s.values, band_grid, fine_grid).values);
    }

    // lift the truth cube per pixel
    SpectralCube truth_fine(fine_grid.count, truth.height, truth.width);
    {
        std::vector<double> spectrum(static_cast<std::size_t>(band_grid.count));
        for (int y = 0; y < truth.height; ++y) {
            for (int x = 0; x < truth.width; ++x) {
                for (int b = 0; b < band_grid.count; ++b) spectrum[static_cast<std::size_t>(b)] = out.truth.at(b, y, x);
                const SpectralCurve lifted = lift(spectrum, band_grid, fine_grid);
                for (int l = 0; l < fine_grid.count; ++l) truth_fine.at(l, y, x) = lifted.values[static_cast<std::size_t>(l)];
            }
        }
    }

    const int ref = reference_illumination(illums);
    const double ws_fine = fine_white_scale(css_fine, illums_fine[static_cast<std::size_t>(ref)], fine_grid.step_nm);
    const double ws_band = discrete_white_scale(css, illums[static_cast<std::size_t>(ref)]);

    out.input = RgbStack(static_cast<int>(illums.size()), truth.height, truth.width);
    for (std::size_t m = 0; m < illums.size(); ++m) {
        const RgbStack one = render_fine(truth_fine, css_fine, illums_fine[m], fine_grid.step_nm, 1.0 / ws_fine);
        std::copy(one.data.begin(), one.data.end(),
                  out.input.data.begin() + static_cast<std::ptrdiff_t>(m) * one.data.size());
        out.illum_labels.push_back(illums[m].label);
    }

    // gap vs the band-grid render, measured before storage quantization
    RgbStack band_render = render_discrete_stack(out.truth, css, illums);
    for (double& v : band_render.data) v /= ws_band;
    double gap = 0.0;
    for (std::size_t i = 0; i < band_render.data.size(); ++i) {
        gap = std::max(gap, std::abs(band_render.data[i] - out.input.data[i]));
    }
    out.render_gap = gap;

    quantize_f32(out.input.data);
    out.input.validate();
    return out;
}

std::vector<SpectralCube> crop_patches(const SpectralCube& cube, int patch, int stride) {
    return crop_impl(cube, cube.bands, patch, stride);
}

std::vector<RgbStack> crop_patches(const RgbStack& stack, int patch, int stride) {
    return crop_impl(stack, stack.channels(), patch, stride);
}

std::vector<Triple> crop_patches(const Triple& triple, int patch, int stride) {
    const std::vector<RgbStack> inputs = crop_patches(triple.input, patch, stride);
    const std::vector<SpectralCube> truths = crop_patches(triple.truth, patch, stride);
    std::vector<Triple> out(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        out[i].input = inputs[i];
        out[i].truth = truths[i];
        out[i].css = triple.css;
        out[i].illum_labels = triple.illum_labels;
        out[i].render_gap = triple.render_gap;
    }
    return out;
}

SpectralCube flip_horizontal(const SpectralCube& cube) { return flip_x(cube, cube.bands); }
SpectralCube flip_vertical(const SpectralCube& cube) { return flip_y(cube, cube.bands); }
RgbStack flip_horizontal(const RgbStack& stack) { return flip_x(stack, stack.channels()); }
RgbStack flip_vertical(const RgbStack& stack) { return flip_y(stack, stack.channels()); }

Triple augment_flips(const Triple& triple, std::uint64_t seed) {
    Rng rng(seed);
    Triple out = triple;
    if (rng.coin()) {
        out.input = flip_horizontal(out.input);
        out.truth = flip_horizontal(out.truth);
    }
    if (rng.coin()) {
        out.input = flip_vertical(out.input);
        out.truth = flip_vertical(out.truth);
    }
    return out;
}

SpectralCube make_reflectance(int bands, int height, int width, Rng& rng) {
    const int components = 2 + static_cast<int>(rng.below(4));
    std::vector<std::vector<double>> profiles;
    std::vector<std::vector<double>> fields;
    const double lambda0 = 420.0, lambda1 = 720.0;
    for (int k = 0; k < components; ++k) {
        std::vector<double> profile(static_cast<std::size_t>(bands));
        const double center = rng.uniform(lambda0 + 10.0, lambda1 - 10.0);
        const double width_nm = rng.uniform(20.0, 90.0);
        const double amp = rng.uniform(0.4, 0.85);
        const double base = rng.uniform(0.05, 0.15);
        for (int b = 0; b < bands; ++b) {
            const double nm = lambda0 + (lambda1 - lambda0) * b / (bands - 1);
            profile[static_cast<std::size_t>(b)] = base + amp * gauss(nm, center, width_nm);
        }
        profiles.push_back(std::move(profile));

        // smooth positive field: a few spatial blobs on a small floor
        std::vector<double> field(static_cast<std::size_t>(height) * width, 0.05);
        const int blobs = 1 + static_cast<int>(rng.below(3));
        for (int j = 0; j < blobs; ++j) {
            const double cy = rng.uniform(0.0, height - 1.0);
            const double cx = rng.uniform(0.0, width - 1.0);
            const double sigma = rng.uniform(height / 4.0, height * 1.0);
            const double w = rng.uniform(0.3, 1.0);
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    field[static_cast<std::size_t>(y) * width + x] += w * std::exp(-d2 / (2.0 * sigma * sigma));
                }
            }
        }
        fields.push_back(std::move(field));
    }

    SpectralCube cube(bands, height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double total = 0.0;
            for (int k = 0; k < components; ++k) total += fields[static_cast<std::size_t>(k)][static_cast<std::size_t>(y) * width + x];
            for (int b = 0; b < bands; ++b) {
                double v = 0.0;
                for (int k = 0; k < components; ++k) {
                    v += fields[static_cast<std::size_t>(k)][static_cast<std::size_t>(y) * width + x] *
                         profiles[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)];
                }
                cube.at(b, y, x) = std::clamp(v / total, 0.02, 0.98);
            }
        }
    }
    return cube;
}

std::vector<CssMatrix> css_library(int bands) {
    struct Spec {
        double r, g, b, width;
    };
    // staggered channel peaks, one width per camera
    const Spec specs[6] = {{610.0, 540.0, 465.0, 28.0}, {620.0, 550.0, 460.0, 32.0},
                           {600.0, 530.0, 470.0, 26.0}, {615.0, 545.0, 455.0, 30.0},
                           {605.0, 535.0, 475.0, 34.0}, {625.0, 555.0, 450.0, 24.0}};
    std::vector<CssMatrix> out;
    for (const Spec& s : specs) {
        std::vector<double> v(static_cast<std::size_t>(3) * bands);
        const double centers[3] = {s.r, s.g, s.b};
        for (int c = 0; c < 3; ++c) {
            for (int b = 0; b < bands; ++b) {
                const double nm = 420.0 + 300.0 * b / (bands - 1);
                v[static_cast<std::size_t>(c) * bands + b] = 0.01 + 0.95 * gauss(nm, centers[c], s.width);
            }
        }
        out.emplace_back(bands, std::move(v));
    }
    return out;
}

std::vector<IlluminationSpectrum> illumination_presets(int bands) {
    std::vector<double> white(static_cast<std::size_t>(bands));
    std::vector<double> amber(static_cast<std::size_t>(bands));
    std::vector<double> halogen(static_cast<std::size_t>(bands));
    for (int b = 0; b < bands; ++b) {
        const double nm = 420.0 + 300.0 * b / (bands - 1);
        white[static_cast<std::size_t>(b)] = 1.6 * gauss(nm, 450.0, 9.0) + 1.0 * gauss(nm, 560.0, 60.0);
        // narrow amber band, exactly zero away from it
        amber[static_cast<std::size_t>(b)] = std::abs(nm - 595.0) <= 25.0 ? 0.85 * gauss(nm, 595.0, 5.0) : 0.0;
        halogen[static_cast<std::size_t>(b)] = 0.05 + 1.1 * std::pow((nm - 420.0) / 300.0, 1.6);
    }
    return {IlluminationSpectrum("white", std::move(white)),
            IlluminationSpectrum("amber", std::move(amber)),
            IlluminationSpectrum("halogen", std::move(halogen))};
}

CorpusSplit make_split(const std::vector<SpectralCube>& reflectances,
                       const std::vector<CssMatrix>& cameras,
                       const std::vector<IlluminationSpectrum>& illums,
                       double ratio, std::uint64_t seed) {
    if (reflectances.size() < 2) throw std::invalid_argument("make_split: need at least 2 source images");
    if (cameras.size() < 2) throw std::invalid_argument("make_split: need at least 2 cameras");
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("make_split: ratio must be in (0,1)");
    const std::vector<IlluminationSpectrum> norm = normalize_illuminations(illums);

    const Rng base(seed);
    const std::size_t n = reflectances.size();
    const std::size_t n_train = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(n)));

    std::vector<std::size_t> image_order(n);
    for (std::size_t i = 0; i < n; ++i) image_order[i] = i;
    Rng image_rng = base.split(0);
    image_rng.shuffle(image_order);

    std::vector<std::size_t> camera_order(cameras.size());
    for (std::size_t i = 0; i < cameras.size(); ++i) camera_order[i] = i;
    Rng camera_rng = base.split(1);
    camera_rng.shuffle(camera_order);
    const std::size_t n_test_cams = std::max<std::size_t>(1, cameras.size() / 3);
    const std::size_t n_train_cams = cameras.size() - n_test_cams;

    CorpusSplit split;
    split.seed = seed;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t img = image_order[pos];
        const bool is_train = pos < n_train;
        Rng item_rng = base.split(2 + img);  // per-image stream, order independent
        std::size_t cam;
        if (is_train) {
            cam = camera_order[item_rng.below(n_train_cams)];
        } else {
            cam = camera_order[n_train_cams + item_rng.below(n_test_cams)];
        }
        Triple t = synth_triple(reflectances[img], cameras[cam], norm);
        (is_train ? split.train : split.test).push_back(std::move(t));
    }
    return split;
}

void save_corpus(const CorpusSplit& split, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path root(dir);
    const SamplingGrid band_grid = SamplingGrid::bands();

    json manifest;
    manifest["seed"] = split.seed;
    manifest["m_illums"] = split.train.empty()
                               ? (split.test.empty() ? 0 : split.test.front().input.m_illums)
                               : split.train.front().input.m_illums;
    manifest["band_grid"] = {{"start_nm", band_grid.start_nm},
                             {"step_nm", band_grid.step_nm},
                             {"count", band_grid.count}};
    save_triples(split.train, "train", root, band_grid, manifest["train"]);
    save_triples(split.test, "test", root, band_grid, manifest["test"]);

    std::ofstream out(root / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("save_corpus: cannot write manifest under " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("save_corpus: manifest write failed");
}

CorpusSplit load_corpus(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "manifest.json", std::ios::binary);
    if (!in) throw std::runtime_error("load_corpus: missing manifest under " + dir);
    json manifest;
    in >> manifest;

    CorpusSplit split;
    split.seed = manifest.at("seed").get<std::uint64_t>();
    split.train = load_triples(manifest.at("train"), root);
    split.test = load_triples(manifest.at("test"), root);
    return split;
}

}  // namespace specrec
