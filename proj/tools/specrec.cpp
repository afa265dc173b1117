// Command-line front end: corpus synthesis, rendering, linear and learned
// recovery, training phases, evaluation, export, and self checks. Every
// command that writes artifacts also writes run_manifest.json recording the
// resolved configuration and content hashes of inputs and outputs.
//
// Exit codes: 0 success, 1 usage or failed self check, 2 IO failure,
// 3 configuration mismatch (checkpoint vs corpus or flags).

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "specrec/autodiff.hpp"
#include "specrec/image.hpp"
#include "specrec/manifest.hpp"
#include "specrec/metrics.hpp"
#include "specrec/net.hpp"
#include "specrec/render.hpp"
#include "specrec/rng.hpp"
#include "specrec/spectral.hpp"
#include "specrec/subspace.hpp"
#include "specrec/synth.hpp"
#include "specrec/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace specrec;

namespace {

// Settings that contradict a loaded checkpoint or corpus (exit code 3).
struct ConfigMismatch : std::runtime_error {
    explicit ConfigMismatch(const std::string& what) : std::runtime_error(what) {}
};

std::uint64_t effective_seed(std::uint64_t flag_seed) {
    const char* env = std::getenv("SPECREC_SEED");
    if (env == nullptr || *env == '\0') return flag_seed;
    char* end = nullptr;
    const std::uint64_t v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw std::invalid_argument("SPECREC_SEED is not an unsigned integer");
    return v;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_index(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

// Regular files under dir, except the run manifest itself.
std::vector<std::string> artifact_files(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename() == "run_manifest.json") continue;
        paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

void finish_manifest(RunManifest& manifest, const std::string& out_dir) {
    for (const auto& path : artifact_files(out_dir)) manifest.add_output(path);
    save_manifest(manifest, (fs::path(out_dir) / "run_manifest.json").string());
}

// The presets carrying exactly the given labels, jointly normalized. Using
// the subset (not the whole preset list) reproduces the normalization the
// corpus was rendered with.
std::vector<IlluminationSpectrum> illums_for_labels(const std::vector<std::string>& labels) {
    std::set<std::string> wanted(labels.begin(), labels.end());
    std::vector<IlluminationSpectrum> subset;
    for (auto& illum : illumination_presets()) {
        if (wanted.erase(illum.label) > 0) subset.push_back(std::move(illum));
    }
    if (!wanted.empty()) throw std::runtime_error("unknown illumination label: " + *wanted.begin());
    return normalize_illuminations(std::move(subset));
}

std::vector<IlluminationSpectrum> first_presets(int m) {
    auto presets = illumination_presets();
    if (m < 1 || m > static_cast<int>(presets.size()))
        throw std::invalid_argument("--m must be between 1 and " + std::to_string(presets.size()));
    presets.resize(static_cast<std::size_t>(m));
    return normalize_illuminations(std::move(presets));
}

std::vector<std::string> corpus_labels(const CorpusSplit& split) {
    std::set<std::string> seen;
    std::vector<std::string> ordered;
    auto take = [&](const std::vector<Triple>& triples) {
        for (const auto& t : triples)
            for (const auto& label : t.illum_labels)
                if (seen.insert(label).second) ordered.push_back(label);
    };
    take(split.train);
    take(split.test);
    if (ordered.empty()) throw std::runtime_error("corpus has no triples");
    return ordered;
}

int corpus_m(const CorpusSplit& split) {
    int m = 0;
    auto check = [&](const std::vector<Triple>& triples) {
        for (const auto& t : triples) {
            const int mt = static_cast<int>(t.illum_labels.size());
            if (m == 0) m = mt;
            if (mt != m) throw std::runtime_error("corpus mixes illumination counts");
        }
    };
    check(split.train);
    check(split.test);
    return m;
}

// ---- standalone triple directory (render / recover-linear) ----

void save_triple_dir(const Triple& triple, const std::string& dir) {
    ensure_dir(dir);
    const fs::path root(dir);
    save_stack(triple.input, (root / "input.spc1").string());
    save_cube(triple.truth, (root / "truth.spc1").string());
    save_css_csv(triple.css, SamplingGrid::bands(), (root / "css.csv").string());
    json meta;
    meta["illum_labels"] = triple.illum_labels;
    meta["render_gap"] = triple.render_gap;
    meta["input"] = "input.spc1";
    meta["truth"] = "truth.spc1";
    meta["css"] = "css.csv";
    write_text((root / "triple.json").string(), meta.dump(2) + "\n");
}

Triple load_triple_dir(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "triple.json", std::ios::binary);
    if (!in) throw std::runtime_error("missing triple.json under " + dir);
    json meta;
    try {
        in >> meta;
        Triple triple;
        triple.illum_labels = meta.at("illum_labels").get<std::vector<std::string>>();
        triple.render_gap = meta.at("render_gap").get<double>();
        triple.input = load_stack((root / meta.at("input").get<std::string>()).string());
        triple.truth = load_cube((root / meta.at("truth").get<std::string>()).string());
        triple.css = load_css_csv((root / meta.at("css").get<std::string>()).string());
        return triple;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed triple.json under " + dir + ": " + e.what());
    }
}

// ---- metrics helpers ----

// evaluate() needs the 11x11 structural-similarity window; below that the
// score is reported as nan instead of refusing the whole table.
MetricsReport metrics_for(const SpectralCube& recovered, const SpectralCube& truth) {
    if (truth.height >= 11 && truth.width >= 11) return evaluate(recovered, truth);
    MetricsReport report;
    report.mae = mae(recovered, truth);
    report.rmse = rmse(recovered, truth);
    report.sas = sas(recovered, truth, &report.zero_pixel_count);
    report.psnr = psnr(recovered, truth, 1.0, &report.psnr_infinite);
    report.ssim = std::numeric_limits<double>::quiet_NaN();
    report.band_mae = per_band_mae(recovered, truth);
    return report;
}

void write_metrics_csv(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                       const std::string& path) {
    MetricsReport mean;
    for (const auto& [label, r] : rows) {
        mean.mae += r.mae;
        mean.rmse += r.rmse;
        mean.sas += r.sas;
        mean.psnr += r.psnr;
        mean.ssim += r.ssim;
        mean.psnr_infinite = mean.psnr_infinite || r.psnr_infinite;
    }
    const double n = static_cast<double>(rows.size());
    mean.mae /= n;
    mean.rmse /= n;
    mean.sas /= n;
    mean.psnr /= n;
    mean.ssim /= n;
    std::ostringstream out;
    out << MetricsReport::csv_header() << "\n";
    for (const auto& [label, r] : rows) out << r.to_csv_row(label) << "\n";
    out << mean.to_csv_row("mean") << "\n";
    write_text(path, out.str());
}

// ---- command option structs ----

struct SynthOpts {
    std::string out;
    int n = 8;
    int size = 16;
    int m = 1;
    double ratio = 0.75;
    std::uint64_t seed = 0;
};

struct RenderOpts {
    std::string truth;
    std::string out;
    std::string css;  // CSV override; empty selects --camera from the library
    int camera = 0;
    int m = 1;
};

struct RecoverLinearOpts {
    std::string triple;
    std::string out;
    std::string css;    // CSV override; empty uses the triple's own matrix
    double omega = 0.0;  // <= 0 selects the discrete white scale
    double ridge = 0.0;
};

struct TrainOpts {
    std::string corpus;
    std::string out;
    std::string init;
    int steps = 200;
    double lr = 1e-4;
    int batch = 4;
    int patch = 8;
    int scales = 2;
    int base_channels = 8;
    std::uint64_t seed = 0;
    bool no_cosine = false;
    bool no_omega = false;
    bool no_delta = false;
    bool no_pyramid = false;
    bool zero_m = false;
};

struct MetaOpts {
    std::string corpus;
    std::string out;
    std::string init;
    double alpha = 1e-2;
    double beta = 5e-5;
    int n_inner = 5;
    int tasks = 4;
    int steps = 30;
    int patch = 8;
    std::uint64_t seed = 0;
};

struct EvalOpts {
    std::string corpus;
    std::string ckpt;
    std::string out;
    std::string split = "test";
};

struct AdaptOpts {
    std::string corpus;
    std::string ckpt;
    std::string out;
    int n_inner = 5;
    double alpha = 1e-2;
    int index = -1;  // -1: every test triple
};

struct ExportOpts {
    std::string truth;
    std::string recovered;
    std::string out;
    std::vector<std::string> pixels;
};

struct CheckOpts {
    std::string manifest;
};

// ---- shared command plumbing ----

void add_corpus_inputs(RunManifest& manifest, const std::string& corpus_dir) {
    for (const auto& path : artifact_files(corpus_dir)) manifest.add_input(path);
}

std::pair<ParamSet, NetConfig> load_checkpoint(const std::string& path, int corpus_illums) {
    auto loaded = load_params(path);
    if (loaded.second.m_illums != corpus_illums)
        throw ConfigMismatch("checkpoint expects " + std::to_string(loaded.second.m_illums) +
                             " illumination(s), corpus has " + std::to_string(corpus_illums));
    return loaded;
}

std::vector<Triple> train_patches(const CorpusSplit& split, int patch) {
    std::vector<Triple> patches;
    for (const auto& triple : split.train) {
        auto crops = crop_patches(triple, patch, patch);
        patches.insert(patches.end(), crops.begin(), crops.end());
    }
    if (patches.empty()) throw std::runtime_error("corpus yields no training patches at --patch " + std::to_string(patch));
    return patches;
}

// ---- commands ----

int run_synth(SynthOpts o) {
    o.seed = effective_seed(o.seed);
    if (o.n < 1) throw std::invalid_argument("--n must be at least 1");
    if (o.size < 1) throw std::invalid_argument("--size must be at least 1");
    if (!(o.ratio > 0.0 && o.ratio <= 1.0)) throw std::invalid_argument("--ratio must lie in (0,1]");

    Rng rng(o.seed);
    std::vector<SpectralCube> reflectances;
    reflectances.reserve(static_cast<std::size_t>(o.n));
    for (int i = 0; i < o.n; ++i) reflectances.push_back(make_reflectance(31, o.size, o.size, rng));

    const auto split = make_split(reflectances, css_library(), first_presets(o.m), o.ratio, o.seed);
    save_corpus(split, o.out);

    RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = o.seed;
    manifest.config = {{"n", std::to_string(o.n)},
                       {"size", std::to_string(o.size)},
                       {"m", std::to_string(o.m)},
                       {"ratio", fmt_double(o.ratio)},
                       {"out", o.out}};
    finish_manifest(manifest, o.out);
    std::printf("synth: %zu train / %zu test triples under %s\n", split.train.size(), split.test.size(),
                o.out.c_str());
    return 0;
}

int run_render(const RenderOpts& o) {
    const SpectralCube truth = load_cube(o.truth);
    CssMatrix css;
    if (!o.css.empty()) {
        css = load_css_csv(o.css);
    } else {
        const auto library = css_library();
        if (o.camera < 0 || o.camera >= static_cast<int>(library.size()))
            throw std::invalid_argument("--camera must be between 0 and " + std::to_string(library.size() - 1));
        css = library[static_cast<std::size_t>(o.camera)];
    }

    const Triple triple = synth_triple(truth, css, first_presets(o.m));
    save_triple_dir(triple, o.out);

    RunManifest manifest;
    manifest.command = "render";
    manifest.config = {{"truth", o.truth},
                       {"css", o.css},
                       {"camera", std::to_string(o.camera)},
                       {"m", std::to_string(o.m)},
                       {"out", o.out}};
    manifest.add_input(o.truth);
    if (!o.css.empty()) manifest.add_input(o.css);
    finish_manifest(manifest, o.out);
    std::printf("render: %d illumination(s), gap %.3g, wrote %s\n", static_cast<int>(triple.illum_labels.size()),
                triple.render_gap, o.out.c_str());
    return 0;
}

int run_recover_linear(const RecoverLinearOpts& o) {
    const Triple triple = load_triple_dir(o.triple);
    const CssMatrix css = o.css.empty() ? triple.css : load_css_csv(o.css);
    const auto available = illums_for_labels(triple.illum_labels);
    const auto illums = select_illums(triple.illum_labels, available);
    const SystemMatrix h = build_system_matrix(css, illums);

    double omega = o.omega;
    if (omega <= 0.0) omega = discrete_white_scale(css, illums[static_cast<std::size_t>(reference_illumination(illums))]);

    const SpectralCube r_par = subspace_project(h, triple.input, o.ridge);
    SpectralCube recovered = recover_linear(h, triple.input, RescaleFactor(omega), o.ridge);
    quantize_f32(recovered.data);  // metrics describe the stored artifact

    // H applied back to the subspace component must reproduce the observed
    // stack for any full-row-rank system; the residual reports solver health.
    double reprojection = 0.0;
    for (int y = 0; y < triple.input.height; ++y) {
        for (int x = 0; x < triple.input.width; ++x) {
            for (int row = 0; row < h.rows(); ++row) {
                double acc = 0.0;
                for (int b = 0; b < h.bands; ++b) acc += h.at(row, b) * r_par.at(b, y, x);
                reprojection = std::max(reprojection, std::abs(acc - triple.input.at(row, y, x)));
            }
        }
    }

    ensure_dir(o.out);
    const fs::path root(o.out);
    save_cube(recovered, (root / "recovered.spc1").string());

    const MetricsReport report = metrics_for(recovered, triple.truth);
    const SamplingGrid grid = SamplingGrid::bands();
    std::ostringstream bands_csv;
    bands_csv << "band,wavelength_nm,mae\n";
    bands_csv.precision(12);
    for (std::size_t b = 0; b < report.band_mae.size(); ++b)
        bands_csv << b << ',' << grid.wavelength(static_cast<int>(b)) << ',' << report.band_mae[b] << "\n";
    write_text((root / "band_mae.csv").string(), bands_csv.str());

    std::ostringstream metrics_txt;
    metrics_txt << report.to_key_value();
    metrics_txt << "reprojection_max_error=" << fmt_double(reprojection) << "\n";
    metrics_txt << "omega=" << fmt_double(omega) << "\n";
    metrics_txt << "ridge=" << fmt_double(o.ridge) << "\n";
    write_text((root / "metrics.txt").string(), metrics_txt.str());

    RunManifest manifest;
    manifest.command = "recover-linear";
    manifest.config = {{"triple", o.triple},
                       {"css", o.css},
                       {"omega", fmt_double(omega)},
                       {"ridge", fmt_double(o.ridge)},
                       {"out", o.out}};
    for (const auto& path : artifact_files(o.triple)) manifest.add_input(path);
    if (!o.css.empty()) manifest.add_input(o.css);
    finish_manifest(manifest, o.out);
    std::printf("recover-linear: mae %.6g, reprojection residual %.3g\n", report.mae, reprojection);
    return 0;
}

int run_train(TrainOpts o) {
    o.seed = effective_seed(o.seed);
    const CorpusSplit split = load_corpus(o.corpus);
    const int m = corpus_m(split);
    const auto illums = illums_for_labels(corpus_labels(split));

    ParamSet params;
    NetConfig cfg;
    if (!o.init.empty()) {
        std::tie(params, cfg) = load_checkpoint(o.init, m);
    } else {
        cfg.m_illums = m;
        cfg.scales = o.scales;
        cfg.base_channels = o.base_channels;
        cfg.patch = o.patch;
        cfg.use_omega = !o.no_omega;
        cfg.use_delta_r = !o.no_delta;
        cfg.use_pyramid = !o.no_pyramid;
        cfg.fuse_zero_m = o.zero_m;
        cfg.validate();
        params = init_params(cfg, o.seed);
    }

    TrainConfig tc;
    tc.pretrain_lr = o.lr;
    tc.pretrain_steps = o.steps;
    tc.batch = o.batch;
    tc.seed = o.seed;
    tc.cosine = !o.no_cosine;
    tc.validate();

    const auto patches = train_patches(split, o.patch);
    const TrainLog log = pretrain(params, patches, illums, cfg, tc);

    ensure_dir(o.out);
    const fs::path root(o.out);
    save_params(params, cfg, (root / "ckpt.tnw1").string());
    save_train_log(log, (root / "train_log.csv").string());

    RunManifest manifest;
    manifest.command = "train";
    manifest.seed = o.seed;
    manifest.config = {{"corpus", o.corpus},     {"init", o.init},
                       {"steps", std::to_string(o.steps)}, {"lr", fmt_double(o.lr)},
                       {"batch", std::to_string(o.batch)}, {"patch", std::to_string(o.patch)},
                       {"scales", std::to_string(cfg.scales)},
                       {"base_channels", std::to_string(cfg.base_channels)},
                       {"cosine", tc.cosine ? "1" : "0"},
                       {"use_omega", cfg.use_omega ? "1" : "0"},
                       {"use_delta_r", cfg.use_delta_r ? "1" : "0"},
                       {"use_pyramid", cfg.use_pyramid ? "1" : "0"},
                       {"fuse_zero_m", cfg.fuse_zero_m ? "1" : "0"},
                       {"out", o.out}};
    add_corpus_inputs(manifest, o.corpus);
    if (!o.init.empty()) manifest.add_input(o.init);
    finish_manifest(manifest, o.out);

    const double last = log.rows.empty() ? 0.0 : log.rows.back().value;
    std::printf("train: %d step(s) on %zu patch(es), final logged loss %.6g\n", o.steps, patches.size(), last);
    return 0;
}

int run_meta(MetaOpts o) {
    o.seed = effective_seed(o.seed);
    const CorpusSplit split = load_corpus(o.corpus);
    const int m = corpus_m(split);
    const auto illums = illums_for_labels(corpus_labels(split));

    auto [params, cfg] = load_checkpoint(o.init, m);

    TrainConfig tc;
    tc.alpha = o.alpha;
    tc.beta = o.beta;
    tc.n_inner = o.n_inner;
    tc.meta_tasks = o.tasks;
    tc.meta_steps = o.steps;
    tc.seed = o.seed;
    tc.validate();

    const auto patches = train_patches(split, o.patch);
    const TrainLog log = meta_train(params, patches, illums, cfg, tc);

    ensure_dir(o.out);
    const fs::path root(o.out);
    save_params(params, cfg, (root / "ckpt.tnw1").string());
    save_train_log(log, (root / "meta_log.csv").string());

    RunManifest manifest;
    manifest.command = "meta-train";
    manifest.seed = o.seed;
    manifest.config = {{"corpus", o.corpus},
                       {"init", o.init},
                       {"alpha", fmt_double(o.alpha)},
                       {"beta", fmt_double(o.beta)},
                       {"n", std::to_string(o.n_inner)},
                       {"tasks", std::to_string(o.tasks)},
                       {"steps", std::to_string(o.steps)},
                       {"patch", std::to_string(o.patch)},
                       {"out", o.out}};
    add_corpus_inputs(manifest, o.corpus);
    manifest.add_input(o.init);
    finish_manifest(manifest, o.out);

    std::printf("meta-train: %d outer step(s), %d task(s) each, wrote %s\n", o.steps, o.tasks, o.out.c_str());
    return 0;
}

const std::vector<Triple>& pick_split(const CorpusSplit& split, const std::string& name) {
    if (name == "train") return split.train;
    if (name == "test") return split.test;
    throw std::invalid_argument("--split must be train or test");
}

int run_eval(const EvalOpts& o) {
    const CorpusSplit split = load_corpus(o.corpus);
    const auto available = illums_for_labels(corpus_labels(split));
    auto [params, cfg] = load_checkpoint(o.ckpt, corpus_m(split));

    const auto& triples = pick_split(split, o.split);
    if (triples.empty()) throw std::runtime_error("corpus split '" + o.split + "' is empty");

    ensure_dir(o.out);
    const fs::path root(o.out);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const Triple& t = triples[i];
        const auto illums = select_illums(t.illum_labels, available);
        ForwardTrace trace = forward(params, t.input, illums, cfg);
        SpectralCube recovered = trace.output();
        quantize_f32(recovered.data);
        save_cube(recovered, (root / ("recovered_" + fmt_index(static_cast<int>(i)) + ".spc1")).string());
        rows.emplace_back(fmt_index(static_cast<int>(i)), metrics_for(recovered, t.truth));
    }
    write_metrics_csv(rows, (root / "metrics.csv").string());

    RunManifest manifest;
    manifest.command = "eval";
    manifest.config = {{"corpus", o.corpus}, {"ckpt", o.ckpt}, {"split", o.split}, {"out", o.out}};
    add_corpus_inputs(manifest, o.corpus);
    manifest.add_input(o.ckpt);
    finish_manifest(manifest, o.out);

    double mean_mae = 0.0;
    for (const auto& [label, r] : rows) mean_mae += r.mae;
    std::printf("eval: %zu triple(s), mean mae %.6g\n", rows.size(), mean_mae / static_cast<double>(rows.size()));
    return 0;
}

int run_adapt(const AdaptOpts& o) {
    const CorpusSplit split = load_corpus(o.corpus);
    const auto available = illums_for_labels(corpus_labels(split));
    auto [params, cfg] = load_checkpoint(o.ckpt, corpus_m(split));

    const auto& triples = split.test;
    if (triples.empty()) throw std::runtime_error("corpus has no test triples");
    if (o.index >= static_cast<int>(triples.size()))
        throw std::invalid_argument("--index out of range (test split has " + std::to_string(triples.size()) +
                                    " triples)");

    TrainConfig tc;
    tc.alpha = o.alpha;
    tc.n_inner = o.n_inner;
    tc.validate();

    ensure_dir(o.out);
    const fs::path root(o.out);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        if (o.index >= 0 && static_cast<int>(i) != o.index) continue;
        const Triple& t = triples[i];
        const auto illums = select_illums(t.illum_labels, available);
        AdaptResult result = adapt_test_time(params, t.input, illums, cfg, tc);
        quantize_f32(result.recovered.data);
        const std::string tag = fmt_index(static_cast<int>(i));
        save_cube(result.recovered, (root / ("recovered_" + tag + ".spc1")).string());
        save_train_log(result.log, (root / ("adapt_log_" + tag + ".csv")).string());
        rows.emplace_back(tag, metrics_for(result.recovered, t.truth));
    }
    write_metrics_csv(rows, (root / "metrics.csv").string());

    RunManifest manifest;
    manifest.command = "adapt";
    manifest.config = {{"corpus", o.corpus},
                       {"ckpt", o.ckpt},
                       {"n", std::to_string(o.n_inner)},
                       {"alpha", fmt_double(o.alpha)},
                       {"index", std::to_string(o.index)},
                       {"out", o.out}};
    add_corpus_inputs(manifest, o.corpus);
    manifest.add_input(o.ckpt);
    finish_manifest(manifest, o.out);

    double mean_mae = 0.0;
    for (const auto& [label, r] : rows) mean_mae += r.mae;
    std::printf("adapt: %zu triple(s), %d update(s) each, mean mae %.6g\n", rows.size(), o.n_inner,
                mean_mae / static_cast<double>(rows.size()));
    return 0;
}

// Pearson correlation; sets *defined to false when either side is constant.
double pearson(const std::vector<double>& a, const std::vector<double>& b, bool* defined) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        sa += (a[i] - ma) * (a[i] - ma);
        sb += (b[i] - mb) * (b[i] - mb);
    }
    if (sa == 0.0 || sb == 0.0) {
        *defined = false;
        return 0.0;
    }
    *defined = true;
    return num / std::sqrt(sa * sb);
}

int run_export(const ExportOpts& o) {
    const SpectralCube truth = load_cube(o.truth);
    const SpectralCube recovered = load_cube(o.recovered);

    ensure_dir(o.out);
    const fs::path root(o.out);

    const std::vector<double> errors = pixel_mae_map(recovered, truth);
    double max_err = 0.0;
    for (double e : errors) max_err = std::max(max_err, e);
    std::ostringstream pgm;
    pgm << "P2\n# max " << fmt_double(max_err) << "\n" << truth.width << ' ' << truth.height << "\n255\n";
    for (int y = 0; y < truth.height; ++y) {
        for (int x = 0; x < truth.width; ++x) {
            const double e = errors[static_cast<std::size_t>(y) * truth.width + x];
            const long level = max_err > 0.0 ? std::lround(255.0 * e / max_err) : 0;
            pgm << std::clamp(level, 0L, 255L) << (x + 1 == truth.width ? "\n" : " ");
        }
    }
    write_text((root / "error_map.pgm").string(), pgm.str());

    std::vector<std::string> pixels = o.pixels;
    if (pixels.empty()) pixels.push_back("0,0");
    const SamplingGrid grid{420.0, 10.0, truth.bands};
    for (const auto& spec : pixels) {
        int x = 0, y = 0;
        if (std::sscanf(spec.c_str(), "%d,%d", &x, &y) != 2)
            throw std::invalid_argument("--pixel expects x,y: " + spec);
        if (x < 0 || x >= truth.width || y < 0 || y >= truth.height)
            throw std::invalid_argument("--pixel " + spec + " outside the image");
        std::vector<double> tv(static_cast<std::size_t>(truth.bands));
        std::vector<double> rv(static_cast<std::size_t>(truth.bands));
        std::ostringstream csv;
        csv << "wavelength_nm,truth,recovered\n";
        for (int b = 0; b < truth.bands; ++b) {
            tv[static_cast<std::size_t>(b)] = truth.at(b, y, x);
            rv[static_cast<std::size_t>(b)] = recovered.at(b, y, x);
            csv << fmt_double(grid.wavelength(b)) << ',' << fmt_double(truth.at(b, y, x)) << ','
                << fmt_double(recovered.at(b, y, x)) << "\n";
        }
        bool defined = false;
        const double corr = pearson(tv, rv, &defined);
        csv << "corr," << (defined ? fmt_double(corr) : "undefined") << "\n";
        write_text((root / ("curve_x" + std::to_string(x) + "_y" + std::to_string(y) + ".csv")).string(),
                   csv.str());
    }

    RunManifest manifest;
    manifest.command = "export";
    manifest.config = {{"truth", o.truth}, {"recovered", o.recovered}, {"out", o.out}};
    manifest.add_input(o.truth);
    manifest.add_input(o.recovered);
    finish_manifest(manifest, o.out);
    std::printf("export: max pixel error %.6g, %zu curve(s)\n", max_err, pixels.size());
    return 0;
}

int run_check(const CheckOpts& o) {
    if (!o.manifest.empty()) {
        const RunManifest manifest = load_manifest(o.manifest);
        const auto bad = verify_manifest(manifest);
        if (bad.empty()) {
            std::printf("manifest ok: %zu file(s) match\n",
                        manifest.input_hashes.size() + manifest.output_hashes.size());
            return 0;
        }
        for (const auto& path : bad) std::printf("MISMATCH %s\n", path.c_str());
        return 2;
    }

    int failures = 0;
    auto report = [&](const char* label, bool ok, double value) {
        std::printf("%s %s (%.3g)\n", ok ? "PASS" : "FAIL", label, value);
        if (!ok) ++failures;
    };

    Rng rng(1234);
    const auto library = css_library();

    double worst_residual = 0.0;
    for (int i = 0; i < 5; ++i) {
        const auto illums = first_presets(1 + i % 3);
        const SystemMatrix h = build_system_matrix(library[static_cast<std::size_t>(i) % library.size()], illums);
        const SpectralCube r = make_reflectance(31, 4, 4, rng);
        worst_residual = std::max(worst_residual, decomposition_residual(h, r));
    }
    report("projection decomposition residual", worst_residual <= 1e-8, worst_residual);

    double worst_idem = 0.0;
    {
        const auto illums = first_presets(2);
        const SystemMatrix h = build_system_matrix(library[0], illums);
        const SpectralCube r = make_reflectance(31, 4, 4, rng);
        const RgbStack observed = render_discrete_stack(r, library[0], illums);
        const SpectralCube once = subspace_project(h, observed, 0.0);
        RgbStack reprojected(static_cast<int>(illums.size()), r.height, r.width);
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x)
                for (int row = 0; row < h.rows(); ++row) {
                    double acc = 0.0;
                    for (int b = 0; b < h.bands; ++b) acc += h.at(row, b) * once.at(b, y, x);
                    reprojected.at(row, y, x) = acc;
                }
        const SpectralCube twice = subspace_project(h, reprojected, 0.0);
        for (std::size_t i = 0; i < once.data.size(); ++i)
            worst_idem = std::max(worst_idem, std::abs(once.data[i] - twice.data[i]));
    }
    report("projection idempotence", worst_idem <= 1e-9, worst_idem);

    double worst_routes = 0.0;
    for (int i = 0; i < 3; ++i) {
        const auto illums = first_presets(1 + i % 3);
        const CssMatrix& css = library[static_cast<std::size_t>(i + 1) % library.size()];
        const SystemMatrix h = build_system_matrix(css, illums);
        SystemMatrix dh = h;
        double h_norm = 0.0, d_norm = 0.0;
        for (double v : h.data) h_norm += v * v;
        for (auto& v : dh.data) {
            v = rng.uniform() * 2.0 - 1.0;
            d_norm += v * v;
        }
        const double scale = 0.005 * std::sqrt(h_norm) / std::sqrt(d_norm);
        for (auto& v : dh.data) v *= scale;
        const SpectralCube r = make_reflectance(31, 3, 3, rng);
        const RgbStack observed = render_discrete_stack(r, css, illums);
        worst_routes = std::max(worst_routes, henderson_searle_check(h, dh, observed));
    }
    report("perturbed projection routes agree", worst_routes <= 1e-7, worst_routes);

    double worst_grad = 0.0;
    {
        Tensor x({2, 3, 3});
        Tensor w({1, 2, 3, 3});
        Tensor bias({1});
        Tensor target({1, 3, 3});
        for (auto& v : x.data) v = rng.uniform() + 0.1;
        for (auto& v : w.data) v = rng.uniform() - 0.5;
        bias.data[0] = 0.2;
        for (auto& v : target.data) v = rng.uniform() + 3.0;  // keep |pred-target| off zero
        auto build = [&](const Tensor& xv, const Tensor& wv, const Tensor& bv) {
            Graph local;
            Node* a = local.leaky_relu(local.conv2d(local.leaf(xv, false), local.leaf(wv, false),
                                                    local.leaf(bv, false)),
                                       0.01);
            return local.l1_loss(a, target)->value.data[0];
        };
        Graph g;
        Node* xn = g.leaf(x, true);
        Node* wn = g.leaf(w, true);
        Node* bn = g.leaf(bias, true);
        Node* a = g.leaky_relu(g.conv2d(xn, wn, bn), 0.01);
        g.backward(g.l1_loss(a, target));
        const double step = 1e-6;
        auto probe = [&](Tensor& store, Node* node, std::size_t k) {
            const double keep = store.data[k];
            store.data[k] = keep + step;
            const double up = build(x, w, bias);
            store.data[k] = keep - step;
            const double down = build(x, w, bias);
            store.data[k] = keep;
            const double fd = (up - down) / (2.0 * step);
            const double an = node->grad.data[k];
            worst_grad = std::max(worst_grad, std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}));
        };
        for (std::size_t k = 0; k < x.data.size(); ++k) probe(x, xn, k);
        for (std::size_t k = 0; k < w.data.size(); ++k) probe(w, wn, k);
        probe(bias, bn, 0);
    }
    report("gradient finite-difference spot check", worst_grad <= 1e-6, worst_grad);

    {
        SpectralCube a(5, 12, 12);
        for (auto& v : a.data) v = rng.uniform();
        SpectralCube b = a;
        bool inf_flag = false;
        const double self_mae = mae(a, a);
        const double self_sas = sas(a, a);
        psnr(a, b, 1.0, &inf_flag);
        const double self_ssim = ssim(a, a);
        bool ok = self_mae == 0.0 && self_sas == 0.0 && inf_flag && self_ssim == 1.0;
        for (auto& v : b.data) v = rng.uniform();
        ok = ok && mae(a, b) <= rmse(a, b);
        report("metric identities", ok, self_mae + self_sas);
    }

    std::printf("%s\n", failures == 0 ? "all checks passed" : "CHECK FAILURES PRESENT");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral reflectance recovery toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value file ([section] per command); command-line flags win");
    app.footer("Exit codes: 0 ok, 1 usage/self-check failure, 2 IO error, 3 config mismatch.\n"
               "SPECREC_SEED overrides every --seed.");

    std::function<int()> run;

    SynthOpts synth_opts;
    auto* synth = app.add_subcommand("synth", "generate a procedural corpus with a train/test split");
    synth->add_option("--out", synth_opts.out, "corpus directory")->required();
    synth->add_option("--n", synth_opts.n, "number of source reflectance images");
    synth->add_option("--size", synth_opts.size, "image height and width");
    synth->add_option("--m", synth_opts.m, "illuminations per stack (1-3)");
    synth->add_option("--ratio", synth_opts.ratio, "train fraction of source images");
    synth->add_option("--seed", synth_opts.seed, "generator seed");
    synth->callback([&] { run = [&] { return run_synth(synth_opts); }; });

    RenderOpts render_opts;
    auto* render = app.add_subcommand("render", "render one truth cube into a standalone triple directory");
    render->add_option("--truth", render_opts.truth, "reflectance cube (SPC1)")->required();
    render->add_option("--out", render_opts.out, "triple directory")->required();
    render->add_option("--camera", render_opts.camera, "library sensitivity index");
    render->add_option("--css", render_opts.css, "sensitivity CSV overriding --camera");
    render->add_option("--m", render_opts.m, "illuminations per stack (1-3)");
    render->callback([&] { run = [&] { return run_render(render_opts); }; });

    RecoverLinearOpts linear_opts;
    auto* linear = app.add_subcommand("recover-linear", "subspace projection baseline on one triple");
    linear->add_option("--triple", linear_opts.triple, "triple directory from render")->required();
    linear->add_option("--out", linear_opts.out, "output directory")->required();
    linear->add_option("--css", linear_opts.css, "sensitivity CSV replacing the triple's own");
    linear->add_option("--omega", linear_opts.omega, "rescale factor; <=0 selects the discrete white scale");
    linear->add_option("--ridge", linear_opts.ridge, "Gram regularizer");
    linear->callback([&] { run = [&] { return run_recover_linear(linear_opts); }; });

    TrainOpts train_opts;
    auto* train = app.add_subcommand("train", "joint pre-training on the train split");
    train->add_option("--corpus", train_opts.corpus, "corpus directory")->required();
    train->add_option("--out", train_opts.out, "output directory")->required();
    train->add_option("--init", train_opts.init, "checkpoint to continue from (its architecture wins)");
    train->add_option("--steps", train_opts.steps, "optimization steps");
    train->add_option("--lr", train_opts.lr, "step size");
    train->add_option("--batch", train_opts.batch, "patches per step");
    train->add_option("--patch", train_opts.patch, "training crop size");
    train->add_option("--scales", train_opts.scales, "pyramid levels");
    train->add_option("--base-channels", train_opts.base_channels, "channels at full resolution");
    train->add_option("--seed", train_opts.seed, "init and sampling seed");
    train->add_flag("--no-cosine", train_opts.no_cosine, "constant step size");
    train->add_flag("--no-omega", train_opts.no_omega, "drop the rescale gate");
    train->add_flag("--no-delta", train_opts.no_delta, "drop the residual branch");
    train->add_flag("--no-pyramid", train_opts.no_pyramid, "single-scale decoder");
    train->add_flag("--zero-m", train_opts.zero_m, "zero the fusion modulator");
    train->callback([&] { run = [&] { return run_train(train_opts); }; });

    MetaOpts meta_opts;
    auto* meta = app.add_subcommand("meta-train", "episodic refinement of a pre-trained checkpoint");
    meta->add_option("--corpus", meta_opts.corpus, "corpus directory")->required();
    meta->add_option("--init", meta_opts.init, "pre-trained checkpoint")->required();
    meta->add_option("--out", meta_opts.out, "output directory")->required();
    meta->add_option("--alpha", meta_opts.alpha, "inner adaptation step size");
    meta->add_option("--beta", meta_opts.beta, "outer step size");
    meta->add_option("--n", meta_opts.n_inner, "inner steps per task");
    meta->add_option("--tasks", meta_opts.tasks, "tasks per outer step");
    meta->add_option("--steps", meta_opts.steps, "outer steps");
    meta->add_option("--patch", meta_opts.patch, "training crop size");
    meta->add_option("--seed", meta_opts.seed, "task sampling seed");
    meta->callback([&] { run = [&] { return run_meta(meta_opts); }; });

    EvalOpts eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "recover a split with a checkpoint and tabulate metrics");
    eval_cmd->add_option("--corpus", eval_opts.corpus, "corpus directory")->required();
    eval_cmd->add_option("--ckpt", eval_opts.ckpt, "checkpoint")->required();
    eval_cmd->add_option("--out", eval_opts.out, "output directory")->required();
    eval_cmd->add_option("--split", eval_opts.split, "train or test");
    eval_cmd->callback([&] { run = [&] { return run_eval(eval_opts); }; });

    AdaptOpts adapt_opts;
    auto* adapt = app.add_subcommand("adapt", "test-time adaptation on the test split, then recovery");
    adapt->add_option("--corpus", adapt_opts.corpus, "corpus directory")->required();
    adapt->add_option("--ckpt", adapt_opts.ckpt, "checkpoint")->required();
    adapt->add_option("--out", adapt_opts.out, "output directory")->required();
    adapt->add_option("--n", adapt_opts.n_inner, "adaptation steps per stack (0 matches eval)");
    adapt->add_option("--alpha", adapt_opts.alpha, "adaptation step size");
    adapt->add_option("--index", adapt_opts.index, "single test triple instead of all");
    adapt->callback([&] { run = [&] { return run_adapt(adapt_opts); }; });

    ExportOpts export_opts;
    auto* export_cmd = app.add_subcommand("export", "error map and per-pixel spectra for two cubes");
    export_cmd->add_option("--truth", export_opts.truth, "reference cube (SPC1)")->required();
    export_cmd->add_option("--recovered", export_opts.recovered, "cube under test (SPC1)")->required();
    export_cmd->add_option("--out", export_opts.out, "output directory")->required();
    export_cmd->add_option("--pixel", export_opts.pixels, "x,y spectrum to export (repeatable)");
    export_cmd->callback([&] { run = [&] { return run_export(export_opts); }; });

    CheckOpts check_opts;
    auto* check = app.add_subcommand("check", "numerical self checks, or manifest verification");
    check->add_option("--manifest", check_opts.manifest, "verify hashes recorded in a run manifest");
    check->callback([&] { run = [&] { return run_check(check_opts); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // collapse CLI11's per-error exit codes onto the documented contract
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        return run();
    } catch (const ConfigMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
