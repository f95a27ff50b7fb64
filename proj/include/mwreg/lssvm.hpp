#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mwreg/deformation.hpp"
#include "mwreg/dice.hpp"
#include "mwreg/metrics.hpp"
#include "mwreg/mrf.hpp"
#include "mwreg/volume.hpp"

namespace mwreg {

/// w = (w_c, w_p) and Psi live in R^{n+1}; the pairwise entry is last.
inline constexpr int kParamDim = kNumMetrics + 1;
using ParamVector = std::array<double, kParamDim>;

ParamVector to_params(const WeightVector& w);
WeightVector from_params(const ParamVector& p);
double dot(const ParamVector& a, const ParamVector& b);

/// Default initial weights for (SAD, MI, NCC, DWT) with the pairwise weight.
WeightVector default_w0();

struct TrainSample {
    std::string id;
    Volume source;
    Volume target;
    SegMask source_mask;
    SegMask target_mask;
};

struct Hyperparams {
    double C = 100.0;
    double alpha = 1.0;
    double eta = 10.0;
    double epsilon = 1e-3;
    WeightVector w0 = default_w0();
    double cut_tol = 1e-4;
    double qp_tol = 1e-8;
    int max_outer = 50;
    int max_inner = 100;
    int max_qp_iterations = 50000;
};

struct InferenceOptions {
    ExpansionOptions expansion{};
    /// Instances with labels^nodes at or below this are solved exhaustively.
    std::size_t exact_limit = 0;
};

struct TrainingConfig {
    double grid_spacing_mm = 25.0;
    int labels_per_axis = 5;
    double max_step_fraction = 0.4;
    int mi_bins = 16;
    int grid_margin = 1;
    /// Training images are block-downsampled by this factor first.
    int downsample_factor = 1;
    InferenceOptions inference{};
};

/// Everything inference needs for one (sample, class) pair at a single
/// level: the graph, the label set, the per-node features and the loss table.
struct TrainingInstance {
    std::string id;
    ClassId class_id = 0;
    ControlGrid grid;
    DisplacementLabelSet labels;
    UnaryFeatureTable features;
    LossTable loss;
    /// Psi is averaged over the nodes: 1 / node count from prepare_instance.
    double feature_scale = 1.0;
};

TrainingInstance prepare_instance(const TrainSample& sample, ClassId c, const TrainingConfig& config);

/// (sum_i U_i^1(d_i), ..., sum_i U_i^n(d_i), sum_(i,j) V(d_i, d_j)) times feature_scale.
ParamVector joint_feature_map(const TrainingInstance& inst, const Labeling& d);

/// Class-based energy assembled as an MRF: unaries w_c.U_i plus w_p-weighted pairwise.
EnergyModel class_energy_model(const TrainingInstance& inst, const WeightVector& w);
/// Same model with loss_scale * LossTable added to the unaries.
EnergyModel augmented_model(const TrainingInstance& inst, const WeightVector& w, double loss_scale);

/// Surrogate dice loss of a labeling, from the instance's loss table.
double instance_loss(const TrainingInstance& inst, const Labeling& d);

Labeling solve_augmented(const TrainingInstance& inst, const WeightVector& w, double loss_scale, const Labeling& init,
                         const InferenceOptions& opts);

/// argmin_D w.Psi(D) + eta * loss(D).
Labeling impute_latent(const TrainingInstance& inst, const WeightVector& w, double eta, const InferenceOptions& opts,
                       const Labeling* warm_start = nullptr);

struct Constraint {
    ParamVector psi{};
    double loss = 0.0;
};

struct ViolatedConstraint {
    Constraint constraint;
    Labeling labeling;
};

/// argmin_D w.Psi(D) - loss(D).
ViolatedConstraint most_violated(const TrainingInstance& inst, const WeightVector& w, const InferenceOptions& opts,
                                 const Labeling* warm_start = nullptr);

struct SampleWorkingSet {
    ParamVector psi_hat{};
    std::vector<Constraint> constraints;

    /// Adds unless an equal feature vector (within 1e-12) is already stored.
    bool add(const Constraint& c);
};

/// max(0, max_k w.(psi_hat - psi_k) + loss_k).
double slack(const SampleWorkingSet& ws, const WeightVector& w);

struct SsvmResult {
    WeightVector w;
    std::vector<double> slacks;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// min 1/2|w|^2 + alpha|w - w0|^2 + C/N sum_i xi_i over the working sets,
/// subject to w_p >= 0.
SsvmResult ssvm_step(const std::vector<SampleWorkingSet>& sets, const Hyperparams& hp);

double ssvm_objective(const std::vector<SampleWorkingSet>& sets, const WeightVector& w, const Hyperparams& hp);

struct OuterRecord {
    int iter = 0;
    double objective = 0.0;
    std::size_t constraints_total = 0;
    double mean_imputed_loss = 0.0;
    int inner_iterations = 0;
    WeightVector w;
};

struct TrainReport {
    ClassId class_id = 0;
    WeightVector w;
    std::vector<OuterRecord> records;
    bool converged = false;
};

using TrainLogger = std::function<void(const OuterRecord&)>;

TrainReport cccp_train(const std::vector<TrainingInstance>& instances, const Hyperparams& hp,
                       const InferenceOptions& opts, const TrainLogger& log = {});

/// Prepares every sample for class c, then runs cccp_train.
TrainReport train_class(const std::vector<TrainSample>& samples, ClassId c, const TrainingConfig& config,
                        const Hyperparams& hp, const TrainLogger& log = {});

/// Columns in class-id order; throws if an id in [0, num_classes) is missing.
WeightMatrix assemble_weight_matrix(const std::vector<std::pair<ClassId, WeightVector>>& per_class,
                                    std::size_t num_classes);

} // namespace mwreg
