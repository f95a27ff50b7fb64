#pragma once

#include <cstddef>
#include <vector>

#include "mwreg/deformation.hpp"
#include "mwreg/volume.hpp"

namespace mwreg {

/// 2|A_c ∩ B_c| / (|A_c| + |B_c|); 1 when the class is absent from both.
double exact_dice(const SegMask& a, const SegMask& b, ClassId c);

/// Owning control node of every voxel of `g` (nearest lattice node per
/// axis). Margin nodes own nothing when the grid has a margin.
std::vector<int> partition_cells(const ControlGrid& grid, const Geometry& g);

/// Source mask shifted piecewise-constantly: every voxel x of the target
/// geometry reads source(x + d_i) where i owns x.
SegMask patchwise_shift(const SegMask& source, const Geometry& target, const ControlGrid& grid, const Labeling& d,
                        const DisplacementLabelSet& labels);

/// Fixed normaliser of the surrogate: |S^I_c| + |S^J_c|, raised to the
/// largest attainable mismatch count when shifts can duplicate the class.
double loss_denominator(const SegMask& source, const SegMask& target, const ControlGrid& grid,
                        const DisplacementLabelSet& labels, ClassId c);

/// Node-decomposable dice loss of class c: voxels where the patchwise
/// shifted source and the target disagree on c, over loss_denominator.
/// Equals 1 - dice at the zero labeling and is 0 exactly when the shifted
/// dice is 1.
double surrogate_loss(const SegMask& source, const SegMask& target, const ControlGrid& grid, const Labeling& d,
                      const DisplacementLabelSet& labels, ClassId c);

/// Per-node, per-label loss contributions, shifted so each row's minimum
/// is zero. surrogate_loss(d) == evaluate(d) exactly (up to rounding).
struct LossTable {
    std::size_t nodes = 0;
    std::size_t labels = 0;
    std::vector<double> values;       ///< [node][label], every entry >= 0
    std::vector<double> node_offsets; ///< per-row minimum that was subtracted
    double offset = 0.0;              ///< sum of node_offsets

    double at(std::size_t node, std::size_t label) const { return values[node * labels + label]; }
    double evaluate(const Labeling& d) const;
};

LossTable build_loss_table(const SegMask& source, const SegMask& target, const ControlGrid& grid,
                           const DisplacementLabelSet& labels, ClassId c);

} // namespace mwreg
