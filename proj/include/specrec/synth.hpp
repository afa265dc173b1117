#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specrec/grid.hpp"
#include "specrec/image.hpp"
#include "specrec/rng.hpp"
#include "specrec/spectral.hpp"

namespace specrec {

// One training/evaluation sample: RGB stack rendered from the truth cube
// through the fine-grid path, plus everything needed to re-render it.
struct Triple {
    RgbStack input;
    CssMatrix css;
    SpectralCube truth;
    std::vector<std::string> illum_labels;
    // max |fine render - band render| after joint white normalization;
    // nonzero whenever the spectra have sub-band structure
    double render_gap = 0.0;
};

struct CorpusSplit {
    std::vector<Triple> train;
    std::vector<Triple> test;
    std::uint64_t seed = 0;
};

// Divide every spectrum by the single global maximum of the set, keeping
// relative intensities. Throws when the set is empty or identically zero.
std::vector<IlluminationSpectrum> normalize_illuminations(std::vector<IlluminationSpectrum> illums);

// Renders one triple: every band-grid spectrum is lifted to the fine grid by
// linear interpolation, rendered per illumination with the rectangle rule,
// jointly normalized by the white response of the brightest illumination and
// stacked. Truth and input are quantized to f32 (the storage precision), so
// re-running on the stored truth reproduces the stored input bit-exactly.
Triple synth_triple(const SpectralCube& truth, const CssMatrix& css,
                    const std::vector<IlluminationSpectrum>& illums,
                    const SamplingGrid& band_grid = SamplingGrid::bands(),
                    const SamplingGrid& fine_grid = SamplingGrid::fine());

// All aligned patches at the given stride, row-major over patch origins.
std::vector<SpectralCube> crop_patches(const SpectralCube& cube, int patch, int stride);
std::vector<RgbStack> crop_patches(const RgbStack& stack, int patch, int stride);
// Crops input and truth jointly; css, labels and gap are carried over.
std::vector<Triple> crop_patches(const Triple& triple, int patch, int stride);

SpectralCube flip_horizontal(const SpectralCube& cube);
SpectralCube flip_vertical(const SpectralCube& cube);
RgbStack flip_horizontal(const RgbStack& stack);
RgbStack flip_vertical(const RgbStack& stack);

// Horizontal then vertical flip, each with probability 1/2 under the seeded
// generator; input and truth are flipped identically.
Triple augment_flips(const Triple& triple, std::uint64_t seed);

// Procedural reflectance: 2-5 spectral bumps blended by smooth nonnegative
// spatial fields, clamped to (0,1). Smooth in wavelength and space.
SpectralCube make_reflectance(int bands, int height, int width, Rng& rng);

// Six smooth camera sensitivity sets with staggered channel peaks.
std::vector<CssMatrix> css_library(int bands = 31);

// Analytic light sources on the band grid: a white LED (blue peak plus
// phosphor hump), a narrow amber LED (exactly zero outside its band), and a
// halogen-like ramp. Raw amplitudes; normalize_illuminations scales them.
std::vector<IlluminationSpectrum> illumination_presets(int bands = 31);

// Seeded shuffle of source images, ceil(ratio*n) to train; camera
// sensitivities are split disjointly (roughly a third held out for test) so
// test triples always use cameras never seen in training.
CorpusSplit make_split(const std::vector<SpectralCube>& reflectances,
                       const std::vector<CssMatrix>& cameras,
                       const std::vector<IlluminationSpectrum>& illums,
                       double ratio, std::uint64_t seed);

// manifest.json plus SPC1/CSV payloads under dir; load reverses it.
void save_corpus(const CorpusSplit& split, const std::string& dir);
CorpusSplit load_corpus(const std::string& dir);

}  // namespace specrec
