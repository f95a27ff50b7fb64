#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mwreg/lssvm.hpp"
#include "mwreg/mrf.hpp"
#include "mwreg/registration.hpp"

namespace mwreg {

// Weight file: {"<class_id>": {"metric_weights": [sad, mi, ncc, dwt], "pairwise_weight": w_p}, ...}
std::string weights_to_json(const WeightMatrix& w);
/// Only the listed classes; used when a subset of classes was trained.
std::string weights_to_json(const std::vector<std::pair<ClassId, WeightVector>>& per_class);
WeightMatrix weights_from_json(const std::string& text);
void save_weights(const std::filesystem::path& path, const WeightMatrix& w);
WeightMatrix load_weights(const std::filesystem::path& path);

/// One JSON line: {iter, objective, constraints_total, mean_imputed_loss}.
std::string outer_record_jsonl(const OuterRecord& rec);

/// Per-step solver energies and labelings of a registration run.
std::string registration_trace_json(const RegistrationResult& r);

} // namespace mwreg
