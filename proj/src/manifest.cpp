#include "specrec/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace specrec {

void RunManifest::add_input(const std::string& path) { input_hashes[path] = hash_hex(fnv1a64_file(path)); }

void RunManifest::add_output(const std::string& path) { output_hashes[path] = hash_hex(fnv1a64_file(path)); }

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fnv1a64_file: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_manifest(const RunManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["command"] = manifest.command;
    j["seed"] = manifest.seed;
    j["config"] = manifest.config;
    j["inputs"] = manifest.input_hashes;
    j["outputs"] = manifest.output_hashes;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("save_manifest: write failed for " + path);
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
    nlohmann::json j;
    in >> j;
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.input_hashes = j.at("inputs").get<std::map<std::string, std::string>>();
    m.output_hashes = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
}

std::vector<std::string> verify_manifest(const RunManifest& manifest) {
    std::vector<std::string> bad;
    auto check = [&bad](const std::map<std::string, std::string>& hashes) {
        for (const auto& [path, recorded] : hashes) {
            try {
                if (hash_hex(fnv1a64_file(path)) != recorded) bad.push_back(path);
            } catch (const std::runtime_error&) {
                bad.push_back(path);
            }
        }
    };
    check(manifest.input_hashes);
    check(manifest.output_hashes);
    return bad;
}

}  // namespace specrec
