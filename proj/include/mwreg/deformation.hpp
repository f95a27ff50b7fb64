#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "mwreg/volume.hpp"

namespace mwreg {

/// Regular lattice of FFD control points with 6-neighbourhood edges.
struct ControlGrid {
    Index3 dims{1, 1, 1};
    double spacing_mm = 25.0;
    Vec3 origin{};  ///< position of node (0,0,0)
    int margin = 1; ///< nodes added beyond each face of the volume
    std::vector<std::pair<int, int>> edges;

    std::size_t node_count() const { return static_cast<std::size_t>(dims.x) * dims.y * dims.z; }
    int index(const Index3& c) const { return c.x + dims.x * (c.y + dims.y * c.z); }
    Index3 coords(int node) const { return {node % dims.x, (node / dims.x) % dims.y, node / (dims.x * dims.y)}; }
    Vec3 position(int node) const
    {
        const Index3 c = coords(node);
        return {origin.x + c.x * spacing_mm, origin.y + c.y * spacing_mm, origin.z + c.z * spacing_mm};
    }
};

/// Lattice covering the volume extent at `spacing_mm`, plus `margin` nodes
/// beyond each face. Axes with a single voxel get a single interior node.
ControlGrid build_grid(const Geometry& g, double spacing_mm, int margin = 1);

struct DisplacementLabelSet {
    std::vector<Vec3> vectors;
    double max_step_mm = 0.0;
    int zero_label = 0;

    std::size_t size() const { return vectors.size(); }
};

/// Dense per_axis^3 lattice spanning [-max_step, max_step] on each axis,
/// x fastest; the zero vector sits at the centre.
DisplacementLabelSet build_label_set(double max_step_mm, int per_axis = 5);

/// One label index per control node.
using Labeling = std::vector<int>;

Labeling zero_labeling(const ControlGrid& grid, const DisplacementLabelSet& labels);
std::vector<Vec3> node_displacements(const Labeling& d, const DisplacementLabelSet& labels);

/// Uniform cubic B-spline basis at fractional offset t in [0,1), for the
/// four nodes at offsets -1, 0, +1, +2.
std::array<double, 4> bspline_basis(double t);

/// Cubic B-spline FFD of per-node displacements, evaluated at every voxel of `target`.
DenseField densify(const ControlGrid& grid, const std::vector<Vec3>& node_disp, const Geometry& target);
DenseField densify(const ControlGrid& grid, const Labeling& d, const DisplacementLabelSet& labels,
                   const Geometry& target);

/// result(x) = inner(x) + outer(x + inner(x)); trilinear, border-clamped.
DenseField compose(const DenseField& outer, const DenseField& inner);

/// Backward warp: out(x) = src(x + u(x)), trilinear with border clamping.
Volume warp_image(const Volume& src, const DenseField& field);
/// Backward warp with nearest-neighbour lookup.
SegMask warp_mask(const SegMask& src, const DenseField& field);

/// Smallest determinant of the deformation Jacobian I + du/dx, by central
/// differences over interior voxels.
double min_jacobian_determinant(const DenseField& field);

} // namespace mwreg
