#include "mwreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mwreg/parallel.hpp"

namespace mwreg {

std::string_view metric_name(Metric m)
{
    switch (m) {
    case Metric::SAD: return "sad";
    case Metric::MI: return "mi";
    case Metric::NCC: return "ncc";
    case Metric::DWT: return "dwt";
    }
    return "?";
}

std::optional<Metric> parse_metric(std::string_view name)
{
    for (Metric m : kAllMetrics) {
        if (metric_name(m) == name)
            return m;
    }
    return std::nullopt;
}

namespace {

template <typename T>
BasicPatch<T> extract(const Grid<T>& v, const Vec3& center_mm, const Index3& h)
{
    BasicPatch<T> p;
    p.center = v.geometry().nearest_voxel(center_mm);
    p.half_extent = h;
    const Index3 s = p.side();
    p.values.resize(static_cast<std::size_t>(s.x) * s.y * s.z);
    std::size_t k = 0;
    for (int z = -h.z; z <= h.z; ++z)
        for (int y = -h.y; y <= h.y; ++y)
            for (int x = -h.x; x <= h.x; ++x)
                p.values[k++] = v.clamped(p.center.x + x, p.center.y + y, p.center.z + z);
    return p;
}

void check_sizes(const Patch& a, const Patch& b)
{
    if (a.size() != b.size() || a.size() == 0)
        throw std::invalid_argument("patch size mismatch");
}

int hist_bin(float v, int bins)
{
    const int b = static_cast<int>(std::floor(static_cast<double>(v) * bins));
    return b < 0 ? 0 : (b >= bins ? bins - 1 : b);
}

} // namespace

Patch extract_patch(const Volume& v, const Vec3& center_mm, const Index3& half_extent)
{
    return extract(v, center_mm, half_extent);
}

MaskPatch extract_patch(const SegMask& m, const Vec3& center_mm, const Index3& half_extent)
{
    return extract(m, center_mm, half_extent);
}

Patch extract_shifted_patch(const Volume& v, const Index3& center_voxel, const Index3& half_extent,
                            const Vec3& shift_mm)
{
    const Geometry& g = v.geometry();
    const Vec3 s{shift_mm.x / g.spacing.x, shift_mm.y / g.spacing.y, shift_mm.z / g.spacing.z};
    Patch p;
    p.center = center_voxel;
    p.half_extent = half_extent;
    const Index3 side = p.side();
    p.values.reserve(static_cast<std::size_t>(side.x) * side.y * side.z);
    for (int dz = -half_extent.z; dz <= half_extent.z; ++dz)
        for (int dy = -half_extent.y; dy <= half_extent.y; ++dy)
            for (int dx = -half_extent.x; dx <= half_extent.x; ++dx) {
                const Vec3 q{center_voxel.x + dx + s.x, center_voxel.y + dy + s.y, center_voxel.z + dz + s.z};
                p.values.push_back(static_cast<float>(sample_trilinear(v, q)));
            }
    return p;
}

Index3 patch_half_extent_for(const Geometry& g, double control_spacing_mm)
{
    Index3 h;
    for (int a = 0; a < 3; ++a) {
        const double side = control_spacing_mm / g.spacing[a];
        h[a] = std::max(0, static_cast<int>(std::lround((side - 1.0) / 2.0)));
    }
    return h;
}

double sad(const Patch& a, const Patch& b)
{
    check_sizes(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::abs(static_cast<double>(a.values[i]) - b.values[i]);
    return s / static_cast<double>(a.size());
}

double ncc_dissim(const Patch& a, const Patch& b)
{
    check_sizes(a, b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a.values[i];
        mb += b.values[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a.values[i] - ma;
        const double db = b.values[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa / n < 1e-12 || sbb / n < 1e-12)
        return 1.0;
    const double r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    return 1.0 - r;
}

double mi_dissim(const Patch& a, const Patch& b, int bins)
{
    check_sizes(a, b);
    if (bins < 2)
        throw std::invalid_argument("MI needs at least 2 bins");
    std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
    std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int ia = hist_bin(a.values[i], bins);
        const int ib = hist_bin(b.values[i], bins);
        joint[static_cast<std::size_t>(ia) * bins + ib] += 1.0;
        pa[ia] += 1.0;
        pb[ib] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double mi = 0.0;
    for (int i = 0; i < bins; ++i) {
        if (pa[i] == 0.0) continue;
        for (int j = 0; j < bins; ++j) {
            const double c = joint[static_cast<std::size_t>(i) * bins + j];
            if (c == 0.0) continue;
            mi += (c / n) * std::log(c * n / (pa[i] * pb[j]));
        }
    }
    return std::max(0.0, std::log(static_cast<double>(bins)) - mi);
}

namespace {

// Single-level orthonormal Haar along every axis, in place on a buffer with
// even dims; low band in the first half of each axis.
void haar3d_inplace(std::vector<double>& v, const Index3& dims)
{
    const double r = 1.0 / std::sqrt(2.0);
    std::vector<double> line;
    for (int axis = 0; axis < 3; ++axis) {
        const int n = dims[axis];
        line.resize(static_cast<std::size_t>(n));
        const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(dims.x)
                                                               : static_cast<std::size_t>(dims.x) * dims.y);
        const int o1 = axis == 0 ? dims.y : dims.x;
        const int o2 = axis == 2 ? dims.y : dims.z;
        for (int q = 0; q < o2; ++q)
            for (int p = 0; p < o1; ++p) {
                std::size_t base;
                if (axis == 0)
                    base = static_cast<std::size_t>(dims.x) * (p + static_cast<std::size_t>(dims.y) * q);
                else if (axis == 1)
                    base = static_cast<std::size_t>(p) + static_cast<std::size_t>(dims.x) * dims.y * q;
                else
                    base = static_cast<std::size_t>(p) + static_cast<std::size_t>(dims.x) * q;
                for (int k = 0; k < n / 2; ++k) {
                    const double e = v[base + stride * (2 * k)];
                    const double o = v[base + stride * (2 * k + 1)];
                    line[k] = (e + o) * r;
                    line[n / 2 + k] = (e - o) * r;
                }
                for (int k = 0; k < n; ++k)
                    v[base + stride * k] = line[k];
            }
    }
}

} // namespace

double dwt_dissim(const Patch& a, const Patch& b)
{
    check_sizes(a, b);
    const Index3 side = a.side();
    if (static_cast<std::size_t>(side.x) * side.y * side.z != a.size() || !(a.side() == b.side()))
        throw std::invalid_argument("patch size mismatch");
    const Index3 pad{side.x + side.x % 2, side.y + side.y % 2, side.z + side.z % 2};
    std::vector<double> diff(static_cast<std::size_t>(pad.x) * pad.y * pad.z, 0.0);
    std::size_t k = 0;
    for (int z = 0; z < side.z; ++z)
        for (int y = 0; y < side.y; ++y)
            for (int x = 0; x < side.x; ++x, ++k)
                diff[static_cast<std::size_t>(x) + static_cast<std::size_t>(pad.x) * (y + static_cast<std::size_t>(pad.y) * z)] =
                    static_cast<double>(a.values[k]) - b.values[k];
    haar3d_inplace(diff, pad);
    double s = 0.0;
    for (double c : diff)
        s += std::abs(c);
    return s / static_cast<double>(diff.size());
}

double metric_dissim(Metric m, const Patch& a, const Patch& b, int mi_bins)
{
    switch (m) {
    case Metric::SAD: return sad(a, b);
    case Metric::MI: return mi_dissim(a, b, mi_bins);
    case Metric::NCC: return ncc_dissim(a, b);
    case Metric::DWT: return dwt_dissim(a, b);
    }
    throw std::invalid_argument("unknown metric");
}

void UnaryFeatureTable::normalize_rows()
{
    for (std::size_t i = 0; i < nodes_; ++i)
        for (int m = 0; m < kNumMetrics; ++m) {
            double lo = at(i, 0, m), hi = lo;
            for (std::size_t l = 1; l < labels_; ++l) {
                lo = std::min(lo, at(i, l, m));
                hi = std::max(hi, at(i, l, m));
            }
            const double range = hi - lo;
            for (std::size_t l = 0; l < labels_; ++l)
                at(i, l, m) = range > 1e-12 ? (at(i, l, m) - lo) / range : 0.0;
        }
}

UnaryFeatureTable build_unary_table(const Volume& source, const Volume& target, const ControlGrid& grid,
                                    const DisplacementLabelSet& labels, const UnaryTableOptions& opts)
{
    UnaryFeatureTable table(grid.node_count(), labels.size(), opts.active);
    parallel_for(grid.node_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const Vec3 p = grid.position(static_cast<int>(i));
            const Patch tgt = extract_patch(target, p, opts.half_extent);
            for (std::size_t l = 0; l < labels.size(); ++l) {
                const Patch src = extract_shifted_patch(source, tgt.center, opts.half_extent, labels.vectors[l]);
                for (Metric m : kAllMetrics) {
                    if (opts.active[static_cast<int>(m)])
                        table.at(i, l, static_cast<int>(m)) = metric_dissim(m, src, tgt, opts.mi_bins);
                }
            }
        }
    });
    if (opts.normalize)
        table.normalize_rows();
    return table;
}

} // namespace mwreg
