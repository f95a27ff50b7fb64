#pragma once

#include <array>
#include <string>
#include <vector>

#include "mwreg/lssvm.hpp"
#include "mwreg/mrf.hpp"
#include "mwreg/registration.hpp"

namespace mwreg {

/// SAD, MI, NCC, DWT, then the multi-metric (MW) registration.
inline constexpr int kNumMethods = kNumMetrics + 1;
inline constexpr int kMultiMetric = kNumMetrics;
std::string_view method_name(int method);

/// One-column matrix with a single active metric.
WeightMatrix single_metric_weights(Metric m, double metric_weight, double pairwise_weight);

struct EvalOptions {
    RegistrationConfig registration{};
    double single_metric_weight = 1.0;
    double single_pairwise_weight = 0.1;
    /// Single-metric baselines to run; skipped ones are reported as nan.
    MetricMask baselines = kAllMetricsMask;
    /// Classes reported; empty means every class except background (0).
    std::vector<ClassId> classes;
};

struct EvalRow {
    std::string pair_id;
    ClassId class_id = 0;
    std::array<double, kNumMethods> dice{};
};

/// Registers every pair with each single metric and with `mw`, then scores
/// the warped source mask against the target mask per class.
std::vector<EvalRow> evaluate_pairs(const std::vector<TrainSample>& pairs, std::size_t num_classes,
                                    const WeightMatrix& mw, const EvalOptions& opts);

/// Per-class mean dice for each method, in the order classes first appear.
std::vector<EvalRow> class_means(const std::vector<EvalRow>& rows);

/// pair_id,class,sad,mi,ncc,dwt,mw with "mean" summary rows at the end.
std::string eval_csv(const std::vector<EvalRow>& rows);

/// Box plot per class and method; red square = mean, red bar = median.
std::string eval_svg(const std::vector<EvalRow>& rows);

} // namespace mwreg
