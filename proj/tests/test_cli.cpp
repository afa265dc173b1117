// Drives the installed binary through std::system against scratch
// directories; SPECREC_BIN points at it (set by ctest).
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "specrec/image.hpp"
#include "specrec/metrics.hpp"
#include "specrec/synth.hpp"

using namespace specrec;
namespace fs = std::filesystem;

namespace {

std::string bin() {
    const char* b = std::getenv("SPECREC_BIN");
    REQUIRE_MESSAGE(b != nullptr, "SPECREC_BIN must point at the CLI binary");
    return b;
}

// exit code of `specrec args`, output silenced
int run(const std::string& args) {
    const int status = std::system((bin() + " " + args + " >/dev/null 2>&1").c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

int run_logged(const std::string& args, const std::string& log_path) {
    const int status = std::system((bin() + " " + args + " >" + log_path + " 2>&1").c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

fs::path scratch(const std::string& name) {
    const fs::path root = fs::temp_directory_path() / "specrec_cli_tests" / name;
    fs::remove_all(root);
    fs::create_directories(root);
    return root;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing " << path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

// parsed "key=value" lines
std::map<std::string, std::string> key_values(const fs::path& path) {
    std::map<std::string, std::string> out;
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

// CSV row by first column, then cell by header name
std::map<std::string, double> csv_row(const fs::path& path, const std::string& label) {
    std::istringstream in(slurp(path));
    std::string header;
    REQUIRE(std::getline(in, header));
    std::vector<std::string> cols;
    std::istringstream hs(header);
    for (std::string cell; std::getline(hs, cell, ',');) cols.push_back(cell);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.empty() || cells[0] != label) continue;
        std::map<std::string, double> row;
        for (std::size_t i = 1; i < cells.size() && i < cols.size(); ++i)
            row[cols[i]] = std::stod(cells[i]);
        return row;
    }
    FAIL("row '" << label << "' not found in " << path.string());
    return {};
}

// Corpus plus short pre-training shared by the checkpoint-consuming cases.
struct BaseRun {
    fs::path root, corpus, ckpt;
};

const BaseRun& base_run() {
    static BaseRun base = [] {
        BaseRun b;
        b.root = scratch("base");
        b.corpus = b.root / "corpus";
        REQUIRE(run("synth --out " + b.corpus.string() + " --n 5 --size 16 --m 1 --seed 7") == 0);
        REQUIRE(run("train --corpus " + b.corpus.string() + " --out " + (b.root / "train").string() +
                    " --steps 3 --lr 2e-3 --seed 3") == 0);
        b.ckpt = b.root / "train" / "ckpt.tnw1";
        return b;
    }();
    return base;
}

}  // namespace

TEST_CASE("corpus synthesis is byte-deterministic at a fixed seed") {
    const fs::path root = scratch("synth_det");
    const std::string a = (root / "a").string(), b = (root / "b").string();
    REQUIRE(run("synth --out " + a + " --n 4 --size 16 --seed 9") == 0);
    REQUIRE(run("synth --out " + b + " --n 4 --size 16 --seed 9") == 0);
    for (const auto& entry : fs::directory_iterator(a)) {
        const std::string name = entry.path().filename().string();
        if (name == "run_manifest.json") continue;  // records the differing --out path
        CHECK_MESSAGE(same_bytes(entry.path(), fs::path(b) / name), name);
    }

    // identical command line reproduces the manifest too
    const std::string c = (root / "c").string();
    REQUIRE(run("synth --out " + c + " --n 4 --size 16 --seed 9") == 0);
    const std::string manifest = slurp(fs::path(c) / "run_manifest.json");
    fs::remove_all(c);
    REQUIRE(run("synth --out " + c + " --n 4 --size 16 --seed 9") == 0);
    CHECK(slurp(fs::path(c) / "run_manifest.json") == manifest);

    // a different seed changes payloads
    const std::string d = (root / "d").string();
    REQUIRE(run("synth --out " + d + " --n 4 --size 16 --seed 10") == 0);
    CHECK_FALSE(same_bytes(fs::path(a) / "manifest.json", fs::path(d) / "manifest.json"));
}

TEST_CASE("two-illumination corpora carry six-channel stacks") {
    const fs::path root = scratch("synth_m2");
    REQUIRE(run("synth --out " + root.string() + "/c --n 4 --size 16 --m 2 --seed 5") == 0);
    const CorpusSplit split = load_corpus((root / "c").string());
    REQUIRE_FALSE(split.train.empty());
    for (const auto& t : split.train) {
        CHECK(t.input.channels() == 6);
        REQUIRE(t.illum_labels.size() == 2);
    }
}

TEST_CASE("manifest verification catches a flipped payload byte") {
    const fs::path root = scratch("tamper");
    const std::string corpus = (root / "c").string();
    REQUIRE(run("synth --out " + corpus + " --n 3 --size 16 --seed 4") == 0);
    const std::string manifest = corpus + "/run_manifest.json";
    CHECK(run("check --manifest " + manifest) == 0);

    // flip one byte in the middle of a payload
    const fs::path victim = fs::path(corpus) / "train_000.input.spc1";
    std::string bytes = slurp(victim);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x01);
    std::ofstream(victim, std::ios::binary) << bytes;

    const fs::path log = root / "check.log";
    CHECK(run_logged("check --manifest " + manifest, log.string()) == 2);
    CHECK(slurp(log).find("MISMATCH") != std::string::npos);
    CHECK(slurp(log).find("train_000.input.spc1") != std::string::npos);
}

TEST_CASE("checkpoint and corpus illumination counts must agree") {
    const BaseRun& b = base_run();
    const fs::path root = scratch("mismatch");
    const std::string m2 = (root / "m2").string();
    REQUIRE(run("synth --out " + m2 + " --n 4 --size 16 --m 2 --seed 6") == 0);
    CHECK(run("eval --corpus " + m2 + " --ckpt " + b.ckpt.string() + " --out " + (root / "e").string()) == 3);
    CHECK(run("adapt --corpus " + m2 + " --ckpt " + b.ckpt.string() + " --out " + (root / "a").string()) == 3);
    CHECK(run("meta-train --corpus " + m2 + " --init " + b.ckpt.string() + " --out " +
              (root / "m").string()) == 3);
    CHECK(run("train --corpus " + m2 + " --init " + b.ckpt.string() + " --out " + (root / "t").string()) == 3);
}

TEST_CASE("usage and IO failures use distinct exit codes") {
    const BaseRun& b = base_run();
    const fs::path root = scratch("codes");
    CHECK(run("no-such-command") == 1);
    CHECK(run("synth") == 1);  // --out is required
    CHECK(run("synth --out " + (root / "r").string() + " --ratio 0") == 1);
    CHECK(run("eval --corpus " + b.corpus.string() + " --ckpt " + b.ckpt.string() + " --out " +
              (root / "e").string() + " --split weird") == 1);
    CHECK(run("eval --corpus " + (root / "missing").string() + " --ckpt " + b.ckpt.string() + " --out " +
              (root / "e2").string()) == 2);
    CHECK(run("recover-linear --triple " + (root / "missing").string() + " --out " + (root / "l").string()) == 2);
    CHECK(run("check --manifest " + (root / "missing.json").string()) == 2);
    CHECK(run("--help") == 0);
}

TEST_CASE("zero-step adaptation reproduces plain evaluation") {
    const BaseRun& b = base_run();
    const fs::path root = scratch("n0");
    const std::string ev = (root / "eval").string(), ad = (root / "adapt").string();
    REQUIRE(run("eval --corpus " + b.corpus.string() + " --ckpt " + b.ckpt.string() + " --out " + ev) == 0);
    REQUIRE(run("adapt --corpus " + b.corpus.string() + " --ckpt " + b.ckpt.string() + " --out " + ad +
                " --n 0") == 0);
    CHECK(same_bytes(fs::path(ev) / "recovered_000.spc1", fs::path(ad) / "recovered_000.spc1"));
    CHECK(same_bytes(fs::path(ev) / "metrics.csv", fs::path(ad) / "metrics.csv"));

    // and a positive step count changes the outputs
    const std::string ad5 = (root / "adapt5").string();
    REQUIRE(run("adapt --corpus " + b.corpus.string() + " --ckpt " + b.ckpt.string() + " --out " + ad5 +
                " --n 5") == 0);
    CHECK_FALSE(same_bytes(fs::path(ev) / "recovered_000.spc1", fs::path(ad5) / "recovered_000.spc1"));
}

TEST_CASE("evaluation is stable under re-run and matches direct metric calls") {
    const BaseRun& b = base_run();
    const fs::path root = scratch("eval_cross");
    const std::string e1 = (root / "e1").string(), e2 = (root / "e2").string();
    REQUIRE(run("eval --corpus " + b.corpus.string() + " --ckpt " + b.ckpt.string() + " --out " + e1) == 0);
    REQUIRE(run("eval --corpus " + b.corpus.string() + " --ckpt " + b.ckpt.string() + " --out " + e2) == 0);
    CHECK(same_bytes(fs::path(e1) / "metrics.csv", fs::path(e2) / "metrics.csv"));
    CHECK(same_bytes(fs::path(e1) / "recovered_000.spc1", fs::path(e2) / "recovered_000.spc1"));

    // recompute the table entries from the stored artifacts
    const CorpusSplit split = load_corpus(b.corpus.string());
    REQUIRE_FALSE(split.test.empty());
    const SpectralCube recovered = load_cube((fs::path(e1) / "recovered_000.spc1").string());
    const MetricsReport direct = evaluate(recovered, split.test[0].truth);
    const auto row = csv_row(fs::path(e1) / "metrics.csv", "000");
    CHECK(row.at("mae") == doctest::Approx(direct.mae).epsilon(1e-9));
    CHECK(row.at("rmse") == doctest::Approx(direct.rmse).epsilon(1e-9));
    CHECK(row.at("sas") == doctest::Approx(direct.sas).epsilon(1e-9));
    CHECK(row.at("psnr") == doctest::Approx(direct.psnr).epsilon(1e-9));
    CHECK(row.at("ssim") == doctest::Approx(direct.ssim).epsilon(1e-9));
}

TEST_CASE("rendered triples feed a linear recovery that reproduces the stack") {
    const BaseRun& b = base_run();
    const fs::path root = scratch("linear");
    const std::string triple = (root / "t").string(), out = (root / "r").string();
    REQUIRE(run("render --truth " + b.corpus.string() + "/test_000.truth.spc1 --out " + triple +
                " --camera 3 --m 2") == 0);
    REQUIRE(run("recover-linear --triple " + triple + " --out " + out) == 0);

    const SpectralCube recovered = load_cube(out + "/recovered.spc1");
    CHECK(recovered.bands == 31);

    const auto kv = key_values(out + "/metrics.txt");
    CHECK(std::stod(kv.at("reprojection_max_error")) <= 1e-9);
    CHECK(std::stod(kv.at("omega")) > 0.0);

    // table values recompute from the stored cubes
    const SpectralCube truth = load_cube(triple + "/truth.spc1");
    CHECK(std::stod(kv.at("mae")) == doctest::Approx(mae(recovered, truth)).epsilon(1e-9));
    CHECK(std::stod(kv.at("rmse")) == doctest::Approx(rmse(recovered, truth)).epsilon(1e-9));

    // band MAE CSV has one row per band
    std::istringstream bands(slurp(fs::path(out) / "band_mae.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(bands, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 32);  // header + 31 bands
}

TEST_CASE("export writes the error surface and per-pixel spectra") {
    const fs::path root = scratch("export");

    // truth: pixel (0,0) constant, pixel (1,0) an ascending integer ramp;
    // recovered reverses the ramp, so its correlation is exactly -1
    SpectralCube truth(31, 2, 2, 0.5);
    SpectralCube recovered(31, 2, 2, 0.5);
    for (int bnd = 0; bnd < 31; ++bnd) {
        truth.at(bnd, 0, 1) = static_cast<double>(bnd + 1);
        recovered.at(bnd, 0, 1) = static_cast<double>(31 - bnd);
    }
    const std::string tp = (root / "truth.spc1").string(), rp = (root / "rec.spc1").string();
    save_cube(truth, tp);
    save_cube(recovered, rp);

    const std::string out = (root / "out").string();
    REQUIRE(run("export --truth " + tp + " --recovered " + rp + " --out " + out +
                " --pixel 0,0 --pixel 1,0") == 0);

    // constant spectrum: correlation is undefined and flagged
    const std::string c00 = slurp(fs::path(out) / "curve_x0_y0.csv");
    CHECK(c00.find("corr,undefined") != std::string::npos);

    // ramp vs reversed ramp: exactly -1
    const std::string c10 = slurp(fs::path(out) / "curve_x1_y0.csv");
    const auto pos = c10.rfind("corr,");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(c10.substr(pos + 5)) == -1.0);
    // 31 data rows plus header plus corr line
    CHECK(std::count(c10.begin(), c10.end(), '\n') == 33);

    // PGM header carries the true maximum, and the worst pixel maps to 255
    const std::string pgm = slurp(fs::path(out) / "error_map.pgm");
    CHECK(pgm.rfind("P2\n", 0) == 0);
    const auto maxpos = pgm.find("# max ");
    REQUIRE(maxpos != std::string::npos);
    const double header_max = std::stod(pgm.substr(maxpos + 6));
    std::vector<double> errs = pixel_mae_map(recovered, truth);
    double direct_max = 0.0;
    for (double e : errs) direct_max = std::max(direct_max, e);
    CHECK(header_max == doctest::Approx(direct_max).epsilon(1e-6));
    CHECK(pgm.find("255") != std::string::npos);

    // identical cubes: all-zero map, self-correlation exactly 1
    const std::string out2 = (root / "self").string();
    REQUIRE(run("export --truth " + tp + " --recovered " + tp + " --out " + out2 + " --pixel 1,0") == 0);
    const std::string pgm2 = slurp(fs::path(out2) / "error_map.pgm");
    CHECK(pgm2.find("# max 0\n") != std::string::npos);
    std::istringstream body(pgm2.substr(pgm2.find("255\n") + 4));
    int level = -1;
    while (body >> level) CHECK(level == 0);
    const std::string self = slurp(fs::path(out2) / "curve_x1_y0.csv");
    const auto spos = self.rfind("corr,");
    REQUIRE(spos != std::string::npos);
    CHECK(std::stod(self.substr(spos + 5)) == 1.0);

    // out-of-range pixel is a usage error
    CHECK(run("export --truth " + tp + " --recovered " + rp + " --out " + (root / "bad").string() +
              " --pixel 9,9") == 1);
}

TEST_CASE("flat config files fill unset flags and lose to explicit ones") {
    const fs::path root = scratch("config");
    const std::string cfg = (root / "run.ini").string();
    std::ofstream(cfg) << "[synth]\nn=4\nsize=16\nseed=21\nout=" << (root / "c1").string() << "\n";
    REQUIRE(run("--config " + cfg + " synth") == 0);
    const std::string f = (root / "c2").string();
    REQUIRE(run("synth --out " + f + " --n 4 --size 16 --seed 21") == 0);
    CHECK(same_bytes(root / "c1" / "manifest.json", root / "c2" / "manifest.json"));

    // explicit flag wins over the file value
    std::ofstream(cfg, std::ios::trunc)
        << "[synth]\nn=4\nsize=16\nseed=21\nout=" << (root / "c3").string() << "\n";
    REQUIRE(run("--config " + cfg + " synth --seed 22") == 0);
    CHECK_FALSE(same_bytes(root / "c1" / "manifest.json", root / "c3" / "manifest.json"));
}

TEST_CASE("the environment seed overrides every flag seed") {
    const fs::path root = scratch("envseed");
    const std::string a = (root / "a").string(), b = (root / "b").string();
    REQUIRE(run("synth --out " + a + " --n 4 --size 16 --seed 33") == 0);
    const int status =
        std::system(("SPECREC_SEED=33 " + bin() + " synth --out " + b + " --n 4 --size 16 --seed 999 " +
                     ">/dev/null 2>&1").c_str());
    REQUIRE(WEXITSTATUS(status) == 0);
    CHECK(same_bytes(fs::path(a) / "manifest.json", fs::path(b) / "manifest.json"));
}

TEST_CASE("the self-check battery passes") {
    const fs::path root = scratch("selfcheck");
    const fs::path log = root / "check.log";
    CHECK(run_logged("check", log.string()) == 0);
    const std::string text = slurp(log);
    CHECK(text.find("FAIL") == std::string::npos);
    CHECK(text.find("PASS") != std::string::npos);
}
