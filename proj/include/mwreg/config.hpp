#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mwreg/evaluation.hpp"
#include "mwreg/lssvm.hpp"
#include "mwreg/registration.hpp"

namespace mwreg {

struct RunConfig {
    RegistrationConfig registration{};
    TrainingConfig training{};
    Hyperparams hyper{};
    EvalOptions eval{};
    /// Single-metric baselines run by evaluate; the others are reported as nan.
    std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& c);

} // namespace mwreg
