#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mwreg/deformation.hpp"
#include "mwreg/volume.hpp"

namespace mwreg {

/// Metric order is fixed everywhere: feature vectors, weight files, reports.
enum class Metric : int { SAD = 0, MI = 1, NCC = 2, DWT = 3 };
inline constexpr int kNumMetrics = 4;
inline constexpr std::array<Metric, kNumMetrics> kAllMetrics{Metric::SAD, Metric::MI, Metric::NCC, Metric::DWT};

std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);

using MetricMask = std::array<bool, kNumMetrics>;
inline constexpr MetricMask kAllMetricsMask{true, true, true, true};

template <typename T>
struct BasicPatch {
    Index3 center;      ///< voxel nearest the requested physical centre
    Index3 half_extent; ///< (hx,hy,hz); side is 2h+1
    std::vector<T> values;

    std::size_t size() const { return values.size(); }
    Index3 side() const { return {2 * half_extent.x + 1, 2 * half_extent.y + 1, 2 * half_extent.z + 1}; }
};

using Patch = BasicPatch<float>;
using MaskPatch = BasicPatch<std::uint8_t>;

/// Patch around the voxel nearest `center_mm`, border-clamped, x fastest.
Patch extract_patch(const Volume& v, const Vec3& center_mm, const Index3& half_extent);
MaskPatch extract_patch(const SegMask& m, const Vec3& center_mm, const Index3& half_extent);

/// Patch on the voxel lattice around `center_voxel`, every sample moved by
/// `shift_mm` and read trilinearly (border-clamped). A zero shift gives the
/// same values as extract_patch.
Patch extract_shifted_patch(const Volume& v, const Index3& center_voxel, const Index3& half_extent,
                            const Vec3& shift_mm);

/// Cube of side equal to the control spacing, in voxels, rounded to odd.
Index3 patch_half_extent_for(const Geometry& g, double control_spacing_mm);

// All four are dissimilarities: lower is better and d(a,a) is minimal.
// Each throws std::invalid_argument on a size mismatch.
double sad(const Patch& a, const Patch& b);
double ncc_dissim(const Patch& a, const Patch& b);
double mi_dissim(const Patch& a, const Patch& b, int bins = 16);
double dwt_dissim(const Patch& a, const Patch& b);
double metric_dissim(Metric m, const Patch& a, const Patch& b, int mi_bins = 16);

/// Per-node, per-label feature vectors, laid out [node][label][metric].
/// Inactive metrics hold zeros.
class UnaryFeatureTable {
public:
    UnaryFeatureTable() = default;
    UnaryFeatureTable(std::size_t nodes, std::size_t labels, MetricMask active)
        : nodes_(nodes), labels_(labels), active_(active), values_(nodes * labels * kNumMetrics, 0.0)
    {
    }

    std::size_t nodes() const { return nodes_; }
    std::size_t labels() const { return labels_; }
    const MetricMask& active() const { return active_; }

    double& at(std::size_t node, std::size_t label, int metric)
    {
        return values_[(node * labels_ + label) * kNumMetrics + static_cast<std::size_t>(metric)];
    }
    double at(std::size_t node, std::size_t label, int metric) const
    {
        return values_[(node * labels_ + label) * kNumMetrics + static_cast<std::size_t>(metric)];
    }
    const double* features(std::size_t node, std::size_t label) const
    {
        return values_.data() + (node * labels_ + label) * kNumMetrics;
    }

    /// Min-max rescales each (node, metric) row across labels to [0,1];
    /// constant rows become zeros.
    void normalize_rows();

private:
    std::size_t nodes_ = 0;
    std::size_t labels_ = 0;
    MetricMask active_{};
    std::vector<double> values_;
};

struct UnaryTableOptions {
    Index3 half_extent{3, 3, 3};
    int mi_bins = 16;
    MetricMask active = kAllMetricsMask;
    bool normalize = true;
};

/// Source patch at p_i + d (on `source`) against target patch at p_i (on
/// `target`) for every node and label. The source patch is the target patch
/// lattice shifted by d, so sub-voxel labels are resolved by interpolation.
UnaryFeatureTable build_unary_table(const Volume& source, const Volume& target, const ControlGrid& grid,
                                    const DisplacementLabelSet& labels, const UnaryTableOptions& opts);

} // namespace mwreg
