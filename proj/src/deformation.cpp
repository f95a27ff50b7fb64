#include "mwreg/deformation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mwreg/parallel.hpp"

namespace mwreg {

ControlGrid build_grid(const Geometry& g, double spacing_mm, int margin)
{
    if (!(spacing_mm > 0.0))
        throw std::invalid_argument("control spacing must be > 0");
    if (margin < 0)
        throw std::invalid_argument("grid margin must be >= 0");
    ControlGrid grid;
    grid.spacing_mm = spacing_mm;
    grid.margin = margin;
    const Vec3 extent = g.extent();
    for (int a = 0; a < 3; ++a) {
        const int interior = extent[a] <= 0.0 ? 1 : static_cast<int>(std::ceil(extent[a] / spacing_mm - 1e-9)) + 1;
        grid.dims[a] = interior + 2 * margin;
        grid.origin[a] = g.origin[a] - margin * spacing_mm;
    }
    for (int z = 0; z < grid.dims.z; ++z)
        for (int y = 0; y < grid.dims.y; ++y)
            for (int x = 0; x < grid.dims.x; ++x) {
                const int i = grid.index({x, y, z});
                if (x + 1 < grid.dims.x) grid.edges.emplace_back(i, grid.index({x + 1, y, z}));
                if (y + 1 < grid.dims.y) grid.edges.emplace_back(i, grid.index({x, y + 1, z}));
                if (z + 1 < grid.dims.z) grid.edges.emplace_back(i, grid.index({x, y, z + 1}));
            }
    return grid;
}

DisplacementLabelSet build_label_set(double max_step_mm, int per_axis)
{
    if (per_axis < 1 || per_axis % 2 == 0)
        throw std::invalid_argument("labels per axis must be a positive odd integer");
    if (!(max_step_mm >= 0.0))
        throw std::invalid_argument("max step must be >= 0");
    DisplacementLabelSet set;
    set.max_step_mm = max_step_mm;
    std::vector<double> steps(per_axis, 0.0);
    const int half = per_axis / 2;
    for (int k = 0; k < per_axis; ++k)
        steps[k] = half == 0 ? 0.0 : max_step_mm * static_cast<double>(k - half) / half;
    set.vectors.reserve(static_cast<std::size_t>(per_axis) * per_axis * per_axis);
    for (int z = 0; z < per_axis; ++z)
        for (int y = 0; y < per_axis; ++y)
            for (int x = 0; x < per_axis; ++x)
                set.vectors.push_back({steps[x], steps[y], steps[z]});
    set.zero_label = half + per_axis * (half + per_axis * half);
    return set;
}

Labeling zero_labeling(const ControlGrid& grid, const DisplacementLabelSet& labels)
{
    return Labeling(grid.node_count(), labels.zero_label);
}

std::vector<Vec3> node_displacements(const Labeling& d, const DisplacementLabelSet& labels)
{
    std::vector<Vec3> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        out[i] = labels.vectors.at(static_cast<std::size_t>(d[i]));
    return out;
}

std::array<double, 4> bspline_basis(double t)
{
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double mt = 1.0 - t;
    return {mt * mt * mt / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
            t3 / 6.0};
}

namespace {

struct AxisSupport {
    std::array<int, 4> node;
    std::array<double, 4> weight;
};

std::vector<AxisSupport> axis_support(const ControlGrid& grid, const Geometry& target, int axis)
{
    std::vector<AxisSupport> out(static_cast<std::size_t>(target.dims[axis]));
    for (int i = 0; i < target.dims[axis]; ++i) {
        const double u = (target.origin[axis] + i * target.spacing[axis] - grid.origin[axis]) / grid.spacing_mm;
        const double base = std::floor(u);
        const auto w = bspline_basis(u - base);
        AxisSupport& s = out[static_cast<std::size_t>(i)];
        for (int k = 0; k < 4; ++k) {
            s.node[k] = clamp_index(static_cast<int>(base) - 1 + k, grid.dims[axis]);
            s.weight[k] = w[k];
        }
    }
    return out;
}

} // namespace

DenseField densify(const ControlGrid& grid, const std::vector<Vec3>& node_disp, const Geometry& target)
{
    if (node_disp.size() != grid.node_count())
        throw std::invalid_argument("node displacement count does not match grid");
    const auto sx = axis_support(grid, target, 0);
    const auto sy = axis_support(grid, target, 1);
    const auto sz = axis_support(grid, target, 2);
    DenseField field(target);
    const Index3 dims = target.dims;
    parallel_for(static_cast<std::size_t>(dims.z), [&](std::size_t zb, std::size_t ze) {
        for (auto z = static_cast<int>(zb); z < static_cast<int>(ze); ++z)
            for (int y = 0; y < dims.y; ++y)
                for (int x = 0; x < dims.x; ++x) {
                    Vec3 acc;
                    for (int c = 0; c < 4; ++c) {
                        const double wz = sz[z].weight[c];
                        if (wz == 0.0) continue;
                        for (int b = 0; b < 4; ++b) {
                            const double wzy = wz * sy[y].weight[b];
                            if (wzy == 0.0) continue;
                            for (int a = 0; a < 4; ++a) {
                                const double w = wzy * sx[x].weight[a];
                                if (w == 0.0) continue;
                                acc = acc + w * node_disp[grid.index({sx[x].node[a], sy[y].node[b], sz[z].node[c]})];
                            }
                        }
                    }
                    field.set(target.index(x, y, z), acc);
                }
    });
    return field;
}

DenseField densify(const ControlGrid& grid, const Labeling& d, const DisplacementLabelSet& labels,
                   const Geometry& target)
{
    return densify(grid, node_displacements(d, labels), target);
}

DenseField compose(const DenseField& outer, const DenseField& inner)
{
    if (!(outer.geometry() == inner.geometry()))
        throw std::invalid_argument("compose requires fields on the same geometry");
    const Geometry& g = inner.geometry();
    DenseField out(g);
    parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const Vec3 u = inner.get(i);
            const Vec3 p = g.to_mm(g.coords(i)) + u;
            out.set(i, u + outer.sample(g.to_voxel(p)));
        }
    }, 4096);
    return out;
}

Volume warp_image(const Volume& src, const DenseField& field)
{
    const Geometry& g = field.geometry();
    Volume out(g);
    parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const Vec3 p = g.to_mm(g.coords(i)) + field.get(i);
            out[i] = static_cast<float>(sample_trilinear(src, src.geometry().to_voxel(p)));
        }
    }, 4096);
    return out;
}

SegMask warp_mask(const SegMask& src, const DenseField& field)
{
    const Geometry& g = field.geometry();
    SegMask out(g);
    parallel_for(g.voxel_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const Vec3 p = g.to_mm(g.coords(i)) + field.get(i);
            const Index3 v = src.geometry().nearest_voxel(p);
            out[i] = src.at(v.x, v.y, v.z);
        }
    }, 4096);
    return out;
}

double min_jacobian_determinant(const DenseField& field)
{
    const Geometry& g = field.geometry();
    double best = std::numeric_limits<double>::infinity();
    for (int z = 1; z + 1 < g.dims.z; ++z)
        for (int y = 1; y + 1 < g.dims.y; ++y)
            for (int x = 1; x + 1 < g.dims.x; ++x) {
                double j[3][3];
                const Index3 c{x, y, z};
                for (int a = 0; a < 3; ++a) {
                    Index3 lo = c, hi = c;
                    lo[a] -= 1;
                    hi[a] += 1;
                    const Vec3 d = field.get(g.index(hi.x, hi.y, hi.z)) - field.get(g.index(lo.x, lo.y, lo.z));
                    for (int r = 0; r < 3; ++r)
                        j[r][a] = (r == a ? 1.0 : 0.0) + d[r] / (2.0 * g.spacing[a]);
                }
                const double det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
                                   j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                                   j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
                best = std::min(best, det);
            }
    return best;
}

} // namespace mwreg
