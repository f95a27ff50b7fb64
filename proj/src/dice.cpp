#include "mwreg/dice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mwreg/parallel.hpp"

namespace mwreg {

double exact_dice(const SegMask& a, const SegMask& b, ClassId c)
{
    if (!(a.geometry() == b.geometry()))
        throw std::invalid_argument("dice requires masks with identical geometry");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ia = a[i] == c;
        const bool ib = b[i] == c;
        na += ia;
        nb += ib;
        both += ia && ib;
    }
    if (na + nb == 0)
        return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<int> partition_cells(const ControlGrid& grid, const Geometry& g)
{
    std::vector<int> owner(g.voxel_count());
    std::vector<int> axis_owner[3];
    for (int a = 0; a < 3; ++a) {
        axis_owner[a].resize(static_cast<std::size_t>(g.dims[a]));
        for (int i = 0; i < g.dims[a]; ++i) {
            const double u = (g.origin[a] + i * g.spacing[a] - grid.origin[a]) / grid.spacing_mm;
            axis_owner[a][i] = clamp_index(static_cast<int>(std::floor(u + 0.5)), grid.dims[a]);
        }
    }
    for (std::size_t v = 0; v < owner.size(); ++v) {
        const Index3 c = g.coords(v);
        owner[v] = grid.index({axis_owner[0][c.x], axis_owner[1][c.y], axis_owner[2][c.z]});
    }
    return owner;
}

namespace {

ClassId shifted_label(const SegMask& source, const Geometry& target, std::size_t voxel, const Vec3& d)
{
    const Index3 s = source.geometry().nearest_voxel(target.to_mm(target.coords(voxel)) + d);
    return source.at(s.x, s.y, s.z);
}

std::size_t count_class(const SegMask& m, ClassId c)
{
    return static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), c));
}

} // namespace

SegMask patchwise_shift(const SegMask& source, const Geometry& target, const ControlGrid& grid, const Labeling& d,
                        const DisplacementLabelSet& labels)
{
    if (d.size() != grid.node_count())
        throw std::invalid_argument("labeling length does not match grid");
    const auto owner = partition_cells(grid, target);
    SegMask out(target);
    for (std::size_t v = 0; v < out.size(); ++v)
        out[v] = shifted_label(source, target, v, labels.vectors.at(static_cast<std::size_t>(d[owner[v]])));
    return out;
}

namespace {

// Per node and label: voxels of the node's cell where exactly one of the
// shifted source and the target has class c.
std::vector<std::size_t> cell_mismatch(const SegMask& source, const SegMask& target, const ControlGrid& grid,
                                       const DisplacementLabelSet& labels, ClassId c)
{
    const Geometry& g = target.geometry();
    const auto owner = partition_cells(grid, g);
    std::vector<std::vector<std::size_t>> cell_voxels(grid.node_count());
    for (std::size_t v = 0; v < target.size(); ++v)
        cell_voxels[static_cast<std::size_t>(owner[v])].push_back(v);
    const std::size_t L = labels.size();
    std::vector<std::size_t> out(grid.node_count() * L, 0);
    parallel_for(grid.node_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            for (std::size_t l = 0; l < L; ++l) {
                std::size_t n = 0;
                for (std::size_t v : cell_voxels[i])
                    n += (shifted_label(source, g, v, labels.vectors[l]) == c) != (target[v] == c);
                out[i * L + l] = n;
            }
    });
    return out;
}

} // namespace

double loss_denominator(const SegMask& source, const SegMask& target, const ControlGrid& grid,
                        const DisplacementLabelSet& labels, ClassId c)
{
    const double base = static_cast<double>(count_class(source, c) + count_class(target, c));
    if (base == 0.0)
        return 0.0;
    const auto mism = cell_mismatch(source, target, grid, labels, c);
    const std::size_t L = labels.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.node_count(); ++i)
        worst += static_cast<double>(*std::max_element(mism.begin() + i * L, mism.begin() + (i + 1) * L));
    return std::max(base, worst);
}

double surrogate_loss(const SegMask& source, const SegMask& target, const ControlGrid& grid, const Labeling& d,
                      const DisplacementLabelSet& labels, ClassId c)
{
    if (d.size() != grid.node_count())
        throw std::invalid_argument("labeling length does not match grid");
    const double denom = loss_denominator(source, target, grid, labels, c);
    if (denom == 0.0)
        return 0.0;
    const SegMask shifted = patchwise_shift(source, target.geometry(), grid, d, labels);
    std::size_t mismatch = 0;
    for (std::size_t v = 0; v < target.size(); ++v)
        mismatch += (shifted[v] == c) != (target[v] == c);
    return static_cast<double>(mismatch) / denom;
}

double LossTable::evaluate(const Labeling& d) const
{
    if (d.size() != nodes)
        throw std::invalid_argument("labeling length does not match loss table");
    double s = offset;
    for (std::size_t i = 0; i < nodes; ++i)
        s += at(i, static_cast<std::size_t>(d[i]));
    return s;
}

LossTable build_loss_table(const SegMask& source, const SegMask& target, const ControlGrid& grid,
                           const DisplacementLabelSet& labels, ClassId c)
{
    LossTable t;
    t.nodes = grid.node_count();
    t.labels = labels.size();
    t.values.assign(t.nodes * t.labels, 0.0);
    t.node_offsets.assign(t.nodes, 0.0);
    const double denom = loss_denominator(source, target, grid, labels, c);
    if (denom == 0.0)
        return t;
    const auto mism = cell_mismatch(source, target, grid, labels, c);
    for (std::size_t i = 0; i < t.nodes; ++i) {
        double lo = 0.0;
        for (std::size_t l = 0; l < t.labels; ++l) {
            const double val = static_cast<double>(mism[i * t.labels + l]) / denom;
            t.values[i * t.labels + l] = val;
            lo = l == 0 ? val : std::min(lo, val);
        }
        for (std::size_t l = 0; l < t.labels; ++l)
            t.values[i * t.labels + l] -= lo;
        t.node_offsets[i] = lo;
        t.offset += lo;
    }
    return t;
}

} // namespace mwreg
