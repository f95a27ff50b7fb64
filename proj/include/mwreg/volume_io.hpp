#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "mwreg/volume.hpp"

namespace mwreg {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using NativeObject = std::variant<Volume, SegMask, DenseField>;

// .vvol container: one UTF-8 JSON header line with keys in the fixed order
// magic, kind, dims, spacing, origin, dtype; then '\n'; then the raw
// little-endian payload (float32 for "volume" and "field", uint8 for "mask").
inline constexpr std::string_view kVvolMagic = "VVOL1";

void save_native(const std::filesystem::path& path, const Volume& v);
void save_native(const std::filesystem::path& path, const SegMask& m);
void save_native(const std::filesystem::path& path, const DenseField& f);

NativeObject load_native(const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);
SegMask load_mask(const std::filesystem::path& path);
DenseField load_field(const std::filesystem::path& path);

// Minimal NIfTI-1: single uncompressed little-endian .nii with datatype
// uint8 (2), int16 (4) or float32 (16). uint8 files are returned as masks.
std::variant<Volume, SegMask> import_nifti(const std::filesystem::path& path);
/// Imports any supported NIfTI as an intensity volume (uint8 widened).
Volume import_nifti_volume(const std::filesystem::path& path);
SegMask import_nifti_mask(const std::filesystem::path& path);
void export_nifti(const std::filesystem::path& path, const Volume& v);
void export_nifti(const std::filesystem::path& path, const SegMask& m);

/// Block-mean downsampling; output voxel k covers input voxels
/// [k*factor, (k+1)*factor) per axis, partial blocks averaged over what exists.
Volume downsample(const Volume& v, int factor);
/// Block majority vote, ties to the lowest class id.
SegMask downsample(const SegMask& m, int factor);
Geometry downsample_geometry(const Geometry& g, int factor);

/// Per-volume min-max rescale to [0,1]; constant volumes map to 0.
Volume normalize_minmax(const Volume& v);

/// Writes through a sibling temp file and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

} // namespace mwreg
