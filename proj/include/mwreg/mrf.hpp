#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "mwreg/deformation.hpp"
#include "mwreg/metrics.hpp"
#include "mwreg/volume.hpp"

namespace mwreg {

/// Class-based parameters: metric weights w_c (SAD, MI, NCC, DWT) and the
/// pairwise weight w_p >= 0.
struct WeightVector {
    std::array<double, kNumMetrics> metric{};
    double pairwise = 0.0;

    friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

/// One column per class id, in id order.
class WeightMatrix {
public:
    WeightMatrix() = default;
    explicit WeightMatrix(std::vector<WeightVector> columns);

    std::size_t classes() const { return columns_.size(); }
    const WeightVector& column(std::size_t c) const { return columns_.at(c); }
    const std::vector<WeightVector>& columns() const { return columns_; }
    /// Metrics with a non-zero weight in at least one column.
    MetricMask active_metrics() const;
    /// Pairwise weight used at prediction: mean over classes.
    double pairwise_weight() const;

    friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

private:
    std::vector<WeightVector> columns_;
};

/// Normalised L1 label distance ||d_l - d_m||_1 / max_step (raw mm when the
/// label set has zero extent).
double label_distance(const DisplacementLabelSet& labels, std::size_t l, std::size_t m);

/// Sum over grid nodes of unary[node][label] plus w_p * label_distance over edges.
class EnergyModel {
public:
    EnergyModel(const ControlGrid& grid, const DisplacementLabelSet& labels, std::vector<double> unary,
                double pairwise_weight);
    /// Generic form over an arbitrary graph with a label distance table.
    EnergyModel(std::size_t nodes, std::vector<std::pair<int, int>> edges, std::vector<double> distances,
                std::vector<double> unary, double pairwise_weight);

    std::size_t nodes() const { return nodes_; }
    std::size_t labels() const { return labels_; }
    double pairwise_weight() const { return pairwise_weight_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<std::vector<int>>& neighbours() const { return adjacency_; }

    double unary(std::size_t node, std::size_t label) const { return unary_[node * labels_ + label]; }
    std::vector<double>& unaries() { return unary_; }
    const std::vector<double>& unaries() const { return unary_; }
    double distance(std::size_t l, std::size_t m) const { return distance_[l * labels_ + m]; }
    double pairwise(std::size_t l, std::size_t m) const { return pairwise_weight_ * distance(l, m); }

    double energy(const Labeling& d) const;

private:
    void finish();

    std::size_t nodes_ = 0;
    std::size_t labels_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<double> distance_;
    std::vector<double> unary_;
    double pairwise_weight_ = 0.0;
    std::vector<std::vector<int>> adjacency_;
};

struct SolveResult {
    Labeling labeling;
    double energy = 0.0;
    /// Energy of the initial labeling, then after every accepted move.
    std::vector<double> trace;
    int sweeps = 0;
};

/// Global optimum by enumeration; throws when labels^nodes exceeds the limit.
SolveResult solve_exact(const EnergyModel& model, std::size_t max_configurations = 1'000'000);

struct ExpansionOptions {
    int max_sweeps = 30;
    bool icm_polish = true;
};

/// Alpha-expansion with exact binary min-cut moves, then ICM.
SolveResult solve_expansion(const EnergyModel& model, Labeling init, const ExpansionOptions& opts = {});

/// Iterated conditional modes from `init` until no node changes.
SolveResult solve_icm(const EnergyModel& model, Labeling init, int max_iterations = 50);

/// Most frequent class in the patch; ties go to the lowest id.
ClassId dominant_class(const MaskPatch& patch, std::size_t num_classes);

/// w_c . U for every (node, label) with one weight column for all nodes.
std::vector<double> combine_unaries(const UnaryFeatureTable& table, const WeightVector& w);

/// Dominant class per (node, label), taken from the source mask patch at
/// the displaced node position (or at the node itself when `displaced` is false).
std::vector<ClassId> dominant_classes(const SegMask& source_mask, const ControlGrid& grid,
                                      const DisplacementLabelSet& labels, const Index3& half_extent,
                                      std::size_t num_classes, bool displaced = true);

/// w(c̄)ᵀU per (node, label), with c̄ from `dominant` (as produced by dominant_classes).
std::vector<double> combine_unaries(const UnaryFeatureTable& table, const WeightMatrix& w,
                                    const std::vector<ClassId>& dominant);

} // namespace mwreg
