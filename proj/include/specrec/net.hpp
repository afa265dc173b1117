#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "specrec/autodiff.hpp"
#include "specrec/image.hpp"
#include "specrec/spectral.hpp"
#include "specrec/subspace.hpp"
#include "specrec/tensor.hpp"

namespace specrec {

// Which loss owns a tensor: the shared trunk, the recovery head (including
// the camera-sensitivity estimator), or the RGB-reconstruction head.
enum class Partition : std::uint8_t { shared = 0, primary = 1, auxiliary = 2 };

struct NetConfig {
    int m_illums = 1;
    int scales = 2;
    int base_channels = 8;
    int bands = 31;
    double leaky_slope = 0.01;
    int patch = 16;
    double ridge = kDefaultRidge;
    // ablation switches
    bool use_pyramid = true;   // off: plain decoder, single output, no fusion
    bool use_omega = true;     // off: recovered = projected + residual
    bool use_delta_r = true;   // off: recovered = scale * projected only
    bool fuse_zero_m = false;  // on: drop the high-frequency supplement term

    void validate() const;
    // channel width of encoder level i (1-based): base * 2^(i-1)
    int level_channels(int level) const;
    bool operator==(const NetConfig&) const = default;
};

struct ParamSet {
    struct Entry {
        std::string name;
        Partition part;
        Tensor value;
    };
    std::vector<Entry> entries;  // creation-ordered; order is part of the format

    Entry& find(const std::string& name);
    const Entry& find(const std::string& name) const;
    bool has(const std::string& name) const;
    std::size_t count(Partition part) const;  // scalar count per partition
    std::size_t total_count() const;
    bool all_finite() const;
};

using GradMap = std::map<std::string, Tensor>;

// Everything one forward pass produces, including the live tape so losses
// can be appended and swept once.
struct ForwardTrace {
    std::unique_ptr<Graph> graph;
    std::map<std::string, Node*> params;     // leaf per parameter tensor
    std::vector<Node*> r_hat_nodes;          // index 0 = full resolution output
    Node* s_hat_node = nullptr;              // {3*bands}
    Node* i_hat_node = nullptr;              // {3M,H,W}
    std::vector<Node*> omega_nodes;          // per scale, null when disabled

    std::vector<SpectralCube> r_hats;        // values of r_hat_nodes
    CssMatrix s_hat;
    RgbStack i_hat;
    std::vector<double> omegas;              // softplus outputs (1.0 when disabled)
    std::vector<SpectralCube> r_hh;          // constant projected components
    std::vector<RgbStack> inputs_by_scale;   // bilinear-downsampled stacks

    const SpectralCube& output() const { return r_hats.front(); }
};

// deterministic init: weights uniform in +-sqrt(6/fan_in), biases zero
ParamSet init_params(const NetConfig& config, std::uint64_t seed);

// half-pixel bilinear resize (matches the network's upsampling convention)
SpectralCube bilinear_resize(const SpectralCube& cube, int out_h, int out_w);
RgbStack bilinear_resize(const RgbStack& stack, int out_h, int out_w);

// Eq-style projected component from the estimated sensitivities: build the
// system matrix from s_hat and project the scaled-down stack. Constant with
// respect to backprop by design: the pseudo-inverse is not differentiated.
SpectralCube compute_projected(const RgbStack& input_scaled, const CssMatrix& s_hat,
                               const std::vector<IlluminationSpectrum>& illums, double ridge);

// standalone sensitivity estimate (same parameters the full forward uses)
CssMatrix estimate_css(const RgbStack& input, const ParamSet& params, const NetConfig& config);

// Graph-level building blocks, exposed so gradient tests can drive them in
// isolation. `projected` enters as a constant tensor {B,h,w}.
// Returns (recovered node, omega node or null).
std::pair<Node*, Node*> output_module_node(Graph& g, const NetConfig& config, Node* features,
                                           const Tensor& projected, Node* delta_w, Node* delta_b,
                                           Node* omega_w, Node* omega_b);
// low/high split of e_prev plus the modulated high-frequency supplement.
Node* fuse_node(Graph& g, const NetConfig& config, Node* e_prev, Node* r_hat, Node* m_w, Node* m_b,
                Node* out_w, Node* out_b);

// `pinned_css`, when given, replaces the live sensitivity estimate inside the
// projections only. Backprop already treats the projections as constants, so
// gradient checks pin them to the base point to probe exactly the function
// the tape differentiates; the loss still sees the live estimate.
ForwardTrace forward(const ParamSet& params, const RgbStack& input,
                     const std::vector<IlluminationSpectrum>& illums, const NetConfig& config,
                     const CssMatrix* pinned_css = nullptr);

// Scalar losses appended to the trace's tape. primary: mean|s_hat - s| plus
// the per-scale mean|r_hat - truth_i| sum; auxiliary: mean|input - i_hat|.
Node* loss_primary_node(ForwardTrace& trace, const SpectralCube& truth, const CssMatrix& true_css);
Node* loss_auxiliary_node(ForwardTrace& trace, const RgbStack& input);

// sweeps the tape once and returns per-parameter gradients keyed by name
GradMap backward_gradients(ForwardTrace& trace, Node* loss);

// value-only conveniences
double loss_primary(ForwardTrace& trace, const SpectralCube& truth, const CssMatrix& true_css);
double loss_auxiliary(ForwardTrace& trace, const RgbStack& input);

// TNW1 checkpoint: magic, config block, then named f32 tensors with
// partition tags, little-endian throughout.
void save_params(const ParamSet& params, const NetConfig& config, const std::string& path);
std::pair<ParamSet, NetConfig> load_params(const std::string& path);

}  // namespace specrec
