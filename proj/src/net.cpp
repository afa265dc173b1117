#include "specrec/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "specrec/rng.hpp"

namespace specrec {
namespace {

constexpr char kMagic[4] = {'T', 'N', 'W', '1'};

int pow2(int e) { return 1 << e; }

Tensor slice_channels(const RgbStack& stack, int first, int count) {
    Tensor t({count, stack.height, stack.width});
    const std::size_t plane = static_cast<std::size_t>(stack.height) * stack.width;
    std::copy(stack.data.begin() + static_cast<std::ptrdiff_t>(first * plane),
              stack.data.begin() + static_cast<std::ptrdiff_t>((first + count) * plane), t.data.begin());
    return t;
}

Tensor cube_tensor(const SpectralCube& cube) {
    return Tensor({cube.bands, cube.height, cube.width}, cube.data);
}

Tensor stack_tensor(const RgbStack& stack) {
    return Tensor({stack.channels(), stack.height, stack.width}, stack.data);
}

SpectralCube tensor_cube(const Tensor& t) {
    SpectralCube cube(t.shape[0], t.shape[1], t.shape[2]);
    cube.data = t.data;
    return cube;
}

// shared half-pixel bilinear kernel for both container types
template <typename Img>
Img resize_impl(const Img& src, int channels, int out_h, int out_w) {
    Img out = src;
    out.height = out_h;
    out.width = out_w;
    out.data.assign(static_cast<std::size_t>(channels) * out_h * out_w, 0.0);
    auto src_coord = [](int o, int out_n, int in_n) {
        double s = (o + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
        const int lo = static_cast<int>(s);
        const int hi = std::min(lo + 1, in_n - 1);
        return std::tuple<int, int, double>(lo, hi, s - lo);
    };
    for (int y = 0; y < out_h; ++y) {
        const auto [y0, y1, wy] = src_coord(y, out_h, src.height);
        for (int x = 0; x < out_w; ++x) {
            const auto [x0, x1, wx] = src_coord(x, out_w, src.width);
            for (int c = 0; c < channels; ++c) {
                out.at(c, y, x) = (1.0 - wy) * ((1.0 - wx) * src.at(c, y0, x0) + wx * src.at(c, y0, x1)) +
                                  wy * ((1.0 - wx) * src.at(c, y1, x0) + wx * src.at(c, y1, x1));
            }
        }
    }
    return out;
}

struct ParamSpec {
    std::string name;
    Partition part;
    std::vector<int> shape;
    int fan_in;
};

void push_conv(std::vector<ParamSpec>& specs, const std::string& name, Partition part, int cout, int cin, int k) {
    specs.push_back({name + ".w", part, {cout, cin, k, k}, cin * k * k});
    specs.push_back({name + ".b", part, {cout}, 0});
}

void push_dense(std::vector<ParamSpec>& specs, const std::string& name, Partition part, int out, int in) {
    specs.push_back({name + ".w", part, {out, in}, in});
    specs.push_back({name + ".b", part, {out}, 0});
}

// Single source of truth for the architecture: every parameter tensor, in
// creation order. init_params, forward and the count checks all walk this.
std::vector<ParamSpec> architecture(const NetConfig& cfg) {
    cfg.validate();
    const int c0 = cfg.base_channels;
    const int b = cfg.bands;
    const int m = cfg.m_illums;
    const int deep = cfg.level_channels(cfg.scales);
    std::vector<ParamSpec> specs;

    for (int i = 0; i < m; ++i) push_conv(specs, "stem" + std::to_string(i), Partition::shared, c0, 3, 3);
    push_conv(specs, "enc1", Partition::shared, c0, m * c0, 3);
    for (int l = 2; l <= cfg.scales; ++l) {
        push_conv(specs, "enc" + std::to_string(l), Partition::shared, cfg.level_channels(l), cfg.level_channels(l - 1), 3);
    }
    push_conv(specs, "bottleneck", Partition::shared, deep, deep, 1);

    push_conv(specs, "css.enc1", Partition::primary, c0, 3 * m, 1);
    push_conv(specs, "css.enc2", Partition::primary, 2 * c0, c0, 1);
    push_conv(specs, "css.head", Partition::primary, 3 * b, 2 * c0, 1);

    const int omega_in = cfg.use_delta_r ? 2 * b : b;
    if (cfg.use_pyramid) {
        for (int i = cfg.scales; i >= 2; --i) {
            const int ci = cfg.level_channels(i);
            const int cp = cfg.level_channels(i - 1);
            if (cfg.use_delta_r) push_conv(specs, "out" + std::to_string(i) + ".delta", Partition::primary, b, ci, 3);
            if (cfg.use_omega) push_dense(specs, "out" + std::to_string(i) + ".omega", Partition::primary, 1, omega_in);
            push_conv(specs, "fuse" + std::to_string(i - 1) + ".m", Partition::primary, cp, 2 * cp + b, 3);
            push_conv(specs, "fuse" + std::to_string(i - 1) + ".o", Partition::primary, cp, cp + b, 3);
            push_conv(specs, "dec" + std::to_string(i - 1), Partition::primary, cp, ci + cp, 3);
        }
    } else {
        for (int i = cfg.scales; i >= 2; --i) {
            push_conv(specs, "dec" + std::to_string(i - 1), Partition::primary, cfg.level_channels(i - 1), cfg.level_channels(i), 3);
        }
    }
    if (cfg.use_delta_r) push_conv(specs, "out1.delta", Partition::primary, b, c0, 3);
    if (cfg.use_omega) push_dense(specs, "out1.omega", Partition::primary, 1, omega_in);

    push_conv(specs, "aux1", Partition::auxiliary, c0, deep + b, 3);
    push_conv(specs, "aux2", Partition::auxiliary, 3 * m, c0, 3);
    return specs;
}

std::vector<IlluminationSpectrum> check_illums(const std::vector<IlluminationSpectrum>& illums, const NetConfig& cfg) {
    if (static_cast<int>(illums.size()) != cfg.m_illums) {
        throw std::invalid_argument("forward: illumination count does not match config");
    }
    for (const auto& s : illums) {
        if (s.bands() != cfg.bands) throw std::invalid_argument("forward: illumination band count mismatch");
    }
    return illums;
}

// sensitivity estimator: channel-mixing 1x1 convs so a spatially constant
// input stays constant all the way to the pooled head
Node* css_encoder(Graph& g, const NetConfig& cfg, Node* x_full, const std::map<std::string, Node*>& p) {
    Node* c1 = g.leaky_relu(g.conv2d(x_full, p.at("css.enc1.w"), p.at("css.enc1.b")), cfg.leaky_slope);
    Node* c2 = g.leaky_relu(g.conv2d(g.avgpool2(c1), p.at("css.enc2.w"), p.at("css.enc2.b")), cfg.leaky_slope);
    Node* head = g.conv2d(c2, p.at("css.head.w"), p.at("css.head.b"));
    return g.softplus(g.global_avg_pool(head));
}

}  // namespace

void NetConfig::validate() const {
    if (m_illums < 1 || m_illums > 3) throw std::invalid_argument("NetConfig: m_illums must be 1..3");
    if (scales < 1) throw std::invalid_argument("NetConfig: scales must be >= 1");
    if (base_channels < 4) throw std::invalid_argument("NetConfig: base_channels must be >= 4");
    if (bands < 1) throw std::invalid_argument("NetConfig: bands must be >= 1");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("NetConfig: leaky_slope out of range");
    if (patch < 4) throw std::invalid_argument("NetConfig: patch must be >= 4");
    if (ridge < 0.0) throw std::invalid_argument("NetConfig: ridge must be >= 0");
}

int NetConfig::level_channels(int level) const { return base_channels * pow2(level - 1); }

ParamSet::Entry& ParamSet::find(const std::string& name) {
    for (Entry& e : entries)
        if (e.name == name) return e;
    throw std::invalid_argument("ParamSet: no tensor named " + name);
}

const ParamSet::Entry& ParamSet::find(const std::string& name) const {
    for (const Entry& e : entries)
        if (e.name == name) return e;
    throw std::invalid_argument("ParamSet: no tensor named " + name);
}

bool ParamSet::has(const std::string& name) const {
    for (const Entry& e : entries)
        if (e.name == name) return true;
    return false;
}

std::size_t ParamSet::count(Partition part) const {
    std::size_t n = 0;
    for (const Entry& e : entries)
        if (e.part == part) n += e.value.numel();
    return n;
}

std::size_t ParamSet::total_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries) n += e.value.numel();
    return n;
}

bool ParamSet::all_finite() const {
    for (const Entry& e : entries)
        if (!e.value.all_finite()) return false;
    return true;
}

ParamSet init_params(const NetConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    ParamSet out;
    for (const ParamSpec& spec : architecture(config)) {
        Tensor t(spec.shape);
        if (spec.fan_in > 0) {
            const double limit = std::sqrt(6.0 / spec.fan_in);
            for (double& v : t.data) v = rng.uniform(-limit, limit);
        }
        out.entries.push_back({spec.name, spec.part, std::move(t)});
    }
    return out;
}

SpectralCube bilinear_resize(const SpectralCube& cube, int out_h, int out_w) {
    return resize_impl(cube, cube.bands, out_h, out_w);
}

RgbStack bilinear_resize(const RgbStack& stack, int out_h, int out_w) {
    return resize_impl(stack, stack.channels(), out_h, out_w);
}

SpectralCube compute_projected(const RgbStack& input_scaled, const CssMatrix& s_hat,
                               const std::vector<IlluminationSpectrum>& illums, double ridge) {
    const SystemMatrix h = build_system_matrix(s_hat, illums);
    return subspace_project(h, input_scaled, ridge);
}

std::pair<Node*, Node*> output_module_node(Graph& g, const NetConfig& config, Node* features,
                                           const Tensor& projected, Node* delta_w, Node* delta_b,
                                           Node* omega_w, Node* omega_b) {
    Node* delta = nullptr;
    if (config.use_delta_r) delta = g.conv2d(features, delta_w, delta_b);

    if (!config.use_omega) {
        if (config.use_delta_r) return {g.add_const(delta, projected), nullptr};
        return {g.leaf(projected, false), nullptr};
    }

    Node* proj_leaf = g.leaf(projected, false);
    Node* pooled_src = config.use_delta_r ? g.concat({proj_leaf, delta}) : proj_leaf;
    Node* omega = g.softplus(g.dense(g.global_avg_pool(pooled_src), omega_w, omega_b));
    Node* scaled = g.scale_by(omega, projected);
    Node* recovered = config.use_delta_r ? g.add(scaled, delta) : scaled;
    return {recovered, omega};
}

Node* fuse_node(Graph& g, const NetConfig& config, Node* e_prev, Node* r_hat, Node* m_w, Node* m_b,
                Node* out_w, Node* out_b) {
    Node* low = g.upsample2x(g.avgpool2(e_prev));
    Node* up_r = g.upsample2x(r_hat);
    Node* out = g.conv2d(g.concat({up_r, low}), out_w, out_b);
    if (!config.fuse_zero_m) {
        Node* high = g.sub(e_prev, low);
        Node* m = g.conv2d(g.concat({low, e_prev, up_r}), m_w, m_b);
        out = g.add(out, g.mul(m, high));
    }
    return out;
}

CssMatrix estimate_css(const RgbStack& input, const ParamSet& params, const NetConfig& config) {
    config.validate();
    input.validate();
    if (input.m_illums != config.m_illums) throw std::invalid_argument("estimate_css: illumination count mismatch");
    Graph g;
    std::map<std::string, Node*> p;
    for (const char* name : {"css.enc1.w", "css.enc1.b", "css.enc2.w", "css.enc2.b", "css.head.w", "css.head.b"}) {
        p[name] = g.leaf(params.find(name).value, false);
    }
    Node* x = g.leaf(stack_tensor(input), false);
    Node* s = css_encoder(g, config, x, p);
    return CssMatrix(config.bands, s->value.data);
}

ForwardTrace forward(const ParamSet& params, const RgbStack& input,
                     const std::vector<IlluminationSpectrum>& illums_in, const NetConfig& config,
                     const CssMatrix* pinned_css) {
    config.validate();
    input.validate();
    if (input.m_illums != config.m_illums) throw std::invalid_argument("forward: stack illumination count mismatch");
    // every downsampling site (encoder levels, fusion splits, the
    // sensitivity encoder's single pool) must see even dims
    const int need = std::max(2, pow2(config.scales - 1));
    if (input.height % need != 0 || input.width % need != 0) {
        throw std::invalid_argument("forward: spatial dims must be divisible by 2^(scales-1) and even");
    }
    const std::vector<IlluminationSpectrum> illums = check_illums(illums_in, config);

    ForwardTrace trace;
    trace.graph = std::make_unique<Graph>();
    Graph& g = *trace.graph;

    for (const ParamSpec& spec : architecture(config)) {
        trace.params[spec.name] = g.leaf(params.find(spec.name).value, true);
    }
    const auto& p = trace.params;

    // shared trunk: per-illumination stems, concat, then downscaling levels
    std::vector<Node*> stem_outs;
    for (int m = 0; m < config.m_illums; ++m) {
        Node* xm = g.leaf(slice_channels(input, 3 * m, 3), false);
        const std::string s = "stem" + std::to_string(m);
        stem_outs.push_back(g.leaky_relu(g.conv2d(xm, p.at(s + ".w"), p.at(s + ".b")), config.leaky_slope));
    }
    Node* merged = stem_outs.size() == 1 ? stem_outs[0] : g.concat(stem_outs);

    std::vector<Node*> enc(static_cast<std::size_t>(config.scales) + 1, nullptr);
    enc[1] = g.leaky_relu(g.conv2d(merged, p.at("enc1.w"), p.at("enc1.b")), config.leaky_slope);
    for (int l = 2; l <= config.scales; ++l) {
        const std::string s = "enc" + std::to_string(l);
        enc[static_cast<std::size_t>(l)] =
            g.leaky_relu(g.conv2d(g.avgpool2(enc[static_cast<std::size_t>(l) - 1]), p.at(s + ".w"), p.at(s + ".b")), config.leaky_slope);
    }
    Node* z = g.leaky_relu(g.conv2d(enc[static_cast<std::size_t>(config.scales)], p.at("bottleneck.w"), p.at("bottleneck.b")),
                           config.leaky_slope);

    // sensitivity estimate; its value (not its node) feeds the projections,
    // so the pseudo-inverse stays constant during backprop
    Node* x_full = g.leaf(stack_tensor(input), false);
    trace.s_hat_node = css_encoder(g, config, x_full, p);
    trace.s_hat = CssMatrix(config.bands, trace.s_hat_node->value.data);

    const int n_outputs = config.use_pyramid ? config.scales : 1;
    trace.r_hat_nodes.assign(static_cast<std::size_t>(n_outputs), nullptr);
    trace.omega_nodes.assign(static_cast<std::size_t>(n_outputs), nullptr);
    trace.r_hh.resize(static_cast<std::size_t>(n_outputs));
    trace.inputs_by_scale.resize(static_cast<std::size_t>(n_outputs));

    const CssMatrix& proj_css = pinned_css ? *pinned_css : trace.s_hat;
    auto run_output_module = [&](int scale, Node* features) {
        const int h = input.height / pow2(scale - 1);
        const int w = input.width / pow2(scale - 1);
        const RgbStack scaled = scale == 1 ? input : bilinear_resize(input, h, w);
        const SpectralCube projected = compute_projected(scaled, proj_css, illums, config.ridge);
        const std::string base = "out" + std::to_string(scale);
        Node* dw = config.use_delta_r ? p.at(base + ".delta.w") : nullptr;
        Node* db = config.use_delta_r ? p.at(base + ".delta.b") : nullptr;
        Node* ow = config.use_omega ? p.at(base + ".omega.w") : nullptr;
        Node* ob = config.use_omega ? p.at(base + ".omega.b") : nullptr;
        auto [r, omega] = output_module_node(g, config, features, cube_tensor(projected), dw, db, ow, ob);
        const std::size_t idx = static_cast<std::size_t>(scale) - 1;
        if (config.use_pyramid || scale == 1) {
            trace.r_hat_nodes[idx] = r;
            trace.omega_nodes[idx] = omega;
            trace.r_hh[idx] = projected;
            trace.inputs_by_scale[idx] = scaled;
        }
        return r;
    };

    Node* d = z;
    if (config.use_pyramid) {
        for (int i = config.scales; i >= 2; --i) {
            Node* r_i = run_output_module(i, d);
            const std::string f = "fuse" + std::to_string(i - 1);
            Node* fused = fuse_node(g, config, enc[static_cast<std::size_t>(i) - 1], r_i, p.at(f + ".m.w"), p.at(f + ".m.b"),
                                    p.at(f + ".o.w"), p.at(f + ".o.b"));
            const std::string dname = "dec" + std::to_string(i - 1);
            d = g.leaky_relu(g.conv2d(g.concat({g.upsample2x(d), fused}), p.at(dname + ".w"), p.at(dname + ".b")),
                             config.leaky_slope);
        }
    } else {
        for (int i = config.scales; i >= 2; --i) {
            const std::string dname = "dec" + std::to_string(i - 1);
            d = g.leaky_relu(g.conv2d(g.upsample2x(d), p.at(dname + ".w"), p.at(dname + ".b")), config.leaky_slope);
        }
    }
    Node* r_final = run_output_module(1, d);

    // reconstruction head: deepest shared feature lifted to full resolution,
    // concatenated with the recovered cube
    Node* zu = z;
    for (int l = 1; l < config.scales; ++l) zu = g.upsample2x(zu);
    Node* a = g.leaky_relu(g.conv2d(g.concat({zu, r_final}), p.at("aux1.w"), p.at("aux1.b")), config.leaky_slope);
    trace.i_hat_node = g.conv2d(a, p.at("aux2.w"), p.at("aux2.b"));

    trace.r_hats.reserve(trace.r_hat_nodes.size());
    trace.omegas.reserve(trace.r_hat_nodes.size());
    for (std::size_t i = 0; i < trace.r_hat_nodes.size(); ++i) {
        trace.r_hats.push_back(tensor_cube(trace.r_hat_nodes[i]->value));
        trace.omegas.push_back(trace.omega_nodes[i] ? trace.omega_nodes[i]->value[0] : 1.0);
    }
    trace.i_hat = RgbStack(config.m_illums, input.height, input.width);
    trace.i_hat.data = trace.i_hat_node->value.data;
    return trace;
}

Node* loss_primary_node(ForwardTrace& trace, const SpectralCube& truth, const CssMatrix& true_css) {
    if (static_cast<int>(true_css.data.size()) != trace.s_hat_node->value.shape[0]) {
        throw std::invalid_argument("loss_primary: sensitivity shape mismatch");
    }
    Graph& g = *trace.graph;
    Node* loss = g.l1_loss(trace.s_hat_node, Tensor({static_cast<int>(true_css.data.size())}, true_css.data));
    for (Node* r : trace.r_hat_nodes) {
        const int h = r->value.shape[1], w = r->value.shape[2];
        if (truth.bands != r->value.shape[0]) throw std::invalid_argument("loss_primary: band mismatch");
        const SpectralCube target = (h == truth.height && w == truth.width) ? truth : bilinear_resize(truth, h, w);
        loss = g.add(loss, g.l1_loss(r, cube_tensor(target)));
    }
    return loss;
}

Node* loss_auxiliary_node(ForwardTrace& trace, const RgbStack& input) {
    if (input.channels() != trace.i_hat_node->value.shape[0] || input.height != trace.i_hat_node->value.shape[1] ||
        input.width != trace.i_hat_node->value.shape[2]) {
        throw std::invalid_argument("loss_auxiliary: stack shape mismatch");
    }
    return trace.graph->l1_loss(trace.i_hat_node, stack_tensor(input));
}

GradMap backward_gradients(ForwardTrace& trace, Node* loss) {
    trace.graph->backward(loss);
    GradMap out;
    for (const auto& [name, node] : trace.params) out[name] = node->grad;
    return out;
}

double loss_primary(ForwardTrace& trace, const SpectralCube& truth, const CssMatrix& true_css) {
    return loss_primary_node(trace, truth, true_css)->value[0];
}

double loss_auxiliary(ForwardTrace& trace, const RgbStack& input) {
    return loss_auxiliary_node(trace, input)->value[0];
}

namespace {

template <typename T>
void write_le(std::ofstream& out, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_params(const ParamSet& params, const NetConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_params: cannot open " + path);
    out.write(kMagic, 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.m_illums));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.scales));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.base_channels));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.bands));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.patch));
    write_le<double>(out, config.leaky_slope);
    write_le<double>(out, config.ridge);
    write_le<std::uint8_t>(out, config.use_pyramid ? 1 : 0);
    write_le<std::uint8_t>(out, config.use_omega ? 1 : 0);
    write_le<std::uint8_t>(out, config.use_delta_r ? 1 : 0);
    write_le<std::uint8_t>(out, config.fuse_zero_m ? 1 : 0);

    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.entries.size()));
    for (const ParamSet::Entry& e : params.entries) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.part));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.shape.size()));
        for (int d : e.value.shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (double v : e.value.data) write_le<float>(out, static_cast<float>(v));
    }
    if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

std::pair<ParamSet, NetConfig> load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_params: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("load_params: bad magic in " + path);

    NetConfig config;
    config.m_illums = static_cast<int>(read_le<std::uint32_t>(in));
    config.scales = static_cast<int>(read_le<std::uint32_t>(in));
    config.base_channels = static_cast<int>(read_le<std::uint32_t>(in));
    config.bands = static_cast<int>(read_le<std::uint32_t>(in));
    config.patch = static_cast<int>(read_le<std::uint32_t>(in));
    config.leaky_slope = read_le<double>(in);
    config.ridge = read_le<double>(in);
    config.use_pyramid = read_le<std::uint8_t>(in) != 0;
    config.use_omega = read_le<std::uint8_t>(in) != 0;
    config.use_delta_r = read_le<std::uint8_t>(in) != 0;
    config.fuse_zero_m = read_le<std::uint8_t>(in) != 0;

    ParamSet params;
    const std::uint32_t n = read_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t name_len = read_le<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto part = static_cast<Partition>(read_le<std::uint8_t>(in));
        const std::uint32_t ndim = read_le<std::uint32_t>(in);
        std::vector<int> shape(ndim);
        for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_le<std::uint32_t>(in));
        Tensor t(shape);
        for (double& v : t.data) v = static_cast<double>(read_le<float>(in));
        params.entries.push_back({std::move(name), part, std::move(t)});
    }
    if (!in) throw std::runtime_error("load_params: truncated file " + path);
    config.validate();
    return {std::move(params), config};
}

}  // namespace specrec
