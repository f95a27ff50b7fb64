#include "mwreg/registration.hpp"

#include <cmath>
#include <stdexcept>

#include "mwreg/volume_io.hpp"

namespace mwreg {

RegistrationResult register_images(const Volume& source, const Volume& target, const SegMask* source_mask,
                                   const WeightMatrix& weights, const RegistrationConfig& config)
{
    if (config.pyramid_levels < 1 || config.refine_steps < 1)
        throw std::invalid_argument("pyramid levels and refinement steps must be >= 1");
    if (weights.classes() > 1 && source_mask == nullptr)
        throw std::invalid_argument("multi-metric mode requires source segmentation");
    if (source_mask && !(source_mask->geometry() == source.geometry()))
        throw std::invalid_argument("source mask geometry does not match the source image");

    const Geometry& fine = target.geometry();
    RegistrationResult result;
    result.field = DenseField(fine);
    const MetricMask active = weights.active_metrics();

    for (int level = config.pyramid_levels - 1; level >= 0; --level) {
        const int factor = 1 << level;
        const Volume target_l = downsample(target, factor);
        const Geometry& g = target_l.geometry();
        const ControlGrid grid = build_grid(g, config.grid_spacing_mm);

        UnaryTableOptions opts;
        opts.half_extent = patch_half_extent_for(g, config.grid_spacing_mm);
        opts.mi_bins = config.mi_bins;
        opts.active = active;

        double max_step = config.max_step_fraction * config.grid_spacing_mm;
        for (int step = 0; step < config.refine_steps; ++step, max_step *= config.step_shrink) {
            const DisplacementLabelSet labels = build_label_set(max_step, config.labels_per_axis);
            const Volume warped = downsample(warp_image(source, result.field), factor);
            const UnaryFeatureTable table = build_unary_table(warped, target_l, grid, labels, opts);

            std::vector<double> unary;
            if (weights.classes() == 1) {
                unary = combine_unaries(table, weights.column(0));
            } else {
                const SegMask warped_mask = downsample(warp_mask(*source_mask, result.field), factor);
                const auto dominant = dominant_classes(warped_mask, grid, labels,
                                                       opts.half_extent, weights.classes(),
                                                       config.dominant_at_displaced);
                unary = combine_unaries(table, weights, dominant);
            }

            const EnergyModel model(grid, labels, std::move(unary), weights.pairwise_weight());
            SolveResult solved = solve_expansion(model, zero_labeling(grid, labels), config.solver);

            StepTrace t;
            t.level = level;
            t.step = step;
            t.max_step_mm = max_step;
            t.nodes = grid.node_count();
            t.energies = std::move(solved.trace);
            result.trace.push_back(std::move(t));

            const DenseField update = densify(grid, solved.labeling, labels, fine);
            result.field = compose(result.field, update);
            result.labelings.push_back(std::move(solved.labeling));
        }
    }
    return result;
}

} // namespace mwreg
