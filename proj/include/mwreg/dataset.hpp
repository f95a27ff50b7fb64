#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mwreg/lssvm.hpp"
#include "mwreg/phantom.hpp"
#include "mwreg/volume.hpp"

namespace mwreg {

struct ManifestEntry {
    std::string id;
    std::filesystem::path source;
    std::filesystem::path target;
    std::filesystem::path source_seg;
    std::filesystem::path target_seg;
    std::optional<std::filesystem::path> truth_field;
};

/// Paths are stored relative to the manifest file and resolved on load.
struct Manifest {
    ClassSet classes;
    std::vector<ManifestEntry> samples;
};

std::string manifest_to_json(const Manifest& m, const std::filesystem::path& base_dir);
Manifest manifest_from_json(const std::string& text, const std::filesystem::path& base_dir);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

/// Loads a pair from .vvol or .nii files; intensities are min-max normalised
/// and the masks are checked against the manifest classes.
TrainSample load_sample(const ManifestEntry& e, const ClassSet& classes);
std::vector<TrainSample> load_samples(const Manifest& m);

/// Generates every sample of the spec into out_dir and writes manifest.json.
Manifest write_dataset(const std::filesystem::path& out_dir, const SynthSpec& spec);

} // namespace mwreg
