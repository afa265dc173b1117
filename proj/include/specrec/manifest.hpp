#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace specrec {

// Record of one command invocation: resolved configuration plus content
// hashes of everything read and written, so a run can be reproduced and its
// artifacts checked for tampering.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> input_hashes;   // path -> hash
    std::map<std::string, std::string> output_hashes;  // path -> hash

    void add_input(const std::string& path);
    void add_output(const std::string& path);
};

// FNV-1a over the file bytes; throws on IO failure.
std::uint64_t fnv1a64_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

void save_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest(const std::string& path);

// Re-hashes every recorded file; returns the paths that are missing or
// whose content changed since the manifest was written.
std::vector<std::string> verify_manifest(const RunManifest& manifest);

}  // namespace specrec
