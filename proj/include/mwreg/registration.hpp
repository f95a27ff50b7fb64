#pragma once

#include <optional>
#include <vector>

#include "mwreg/deformation.hpp"
#include "mwreg/metrics.hpp"
#include "mwreg/mrf.hpp"
#include "mwreg/volume.hpp"

namespace mwreg {

struct RegistrationConfig {
    int pyramid_levels = 2;
    int refine_steps = 5;
    int labels_per_axis = 5;
    double grid_spacing_mm = 25.0;
    /// First-step label extent as a fraction of the control spacing.
    double max_step_fraction = 0.4;
    /// Label extent multiplier between consecutive refinement steps.
    double step_shrink = 0.67;
    int mi_bins = 16;
    /// Dominant class read at p_i + d (true) or at p_i (false).
    bool dominant_at_displaced = true;
    ExpansionOptions solver{};
};

struct StepTrace {
    int level = 0; ///< 0 is the finest level
    int step = 0;
    double max_step_mm = 0.0;
    std::size_t nodes = 0;
    std::vector<double> energies; ///< solver trace: initial then each accepted move
};

struct RegistrationResult {
    DenseField field;               ///< on the target geometry, in mm
    std::vector<Labeling> labelings; ///< one per (level, step), coarse to fine
    std::vector<StepTrace> trace;
};

/// Pyramidal discrete registration of `source` onto `target`.
/// With a multi-column weight matrix the source mask is required to pick
/// each node's column; a single column is applied everywhere.
RegistrationResult register_images(const Volume& source, const Volume& target, const SegMask* source_mask,
                                   const WeightMatrix& weights, const RegistrationConfig& config);

} // namespace mwreg
