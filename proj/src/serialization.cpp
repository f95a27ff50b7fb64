#include "mwreg/serialization.hpp"

#include <stdexcept>

#include "json.hpp"
#include "mwreg/volume_io.hpp"

namespace mwreg {

using ojson = nlohmann::ordered_json;

std::string weights_to_json(const std::vector<std::pair<ClassId, WeightVector>>& per_class)
{
    ojson j = ojson::object();
    for (const auto& [c, col] : per_class) {
        ojson e;
        e["metric_weights"] = col.metric;
        e["pairwise_weight"] = col.pairwise;
        j[std::to_string(c)] = e;
    }
    return j.dump(2) + "\n";
}

std::string weights_to_json(const WeightMatrix& w)
{
    std::vector<std::pair<ClassId, WeightVector>> cols;
    for (std::size_t c = 0; c < w.classes(); ++c)
        cols.emplace_back(static_cast<ClassId>(c), w.column(c));
    return weights_to_json(cols);
}

WeightMatrix weights_from_json(const std::string& text)
{
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("weight file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.empty())
        throw FormatError("weight file must be a non-empty object keyed by class id");
    std::vector<std::pair<ClassId, WeightVector>> cols;
    try {
        for (const auto& [key, val] : j.items()) {
            std::size_t used = 0;
            const int id = std::stoi(key, &used);
            if (used != key.size() || id < 0 || id > 255)
                throw FormatError("weight file: bad class id '" + key + "'");
            const auto& mw = val.at("metric_weights");
            if (!mw.is_array() || mw.size() != kNumMetrics)
                throw FormatError("weight file: metric_weights must have 4 entries (sad, mi, ncc, dwt)");
            WeightVector w;
            for (int k = 0; k < kNumMetrics; ++k)
                w.metric[k] = mw[k].get<double>();
            w.pairwise = val.at("pairwise_weight").get<double>();
            cols.emplace_back(static_cast<ClassId>(id), w);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("weight file: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw FormatError("weight file: class ids must be integers");
    }
    try {
        return assemble_weight_matrix(cols, cols.size());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("weight file: ") + e.what());
    }
}

void save_weights(const std::filesystem::path& path, const WeightMatrix& w)
{
    write_file_atomic(path, weights_to_json(w));
}

WeightMatrix load_weights(const std::filesystem::path& path) { return weights_from_json(read_file(path)); }

std::string outer_record_jsonl(const OuterRecord& rec)
{
    ojson j;
    j["iter"] = rec.iter;
    j["objective"] = rec.objective;
    j["constraints_total"] = rec.constraints_total;
    j["mean_imputed_loss"] = rec.mean_imputed_loss;
    return j.dump();
}

std::string registration_trace_json(const RegistrationResult& r)
{
    ojson steps = ojson::array();
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        const StepTrace& t = r.trace[k];
        ojson s;
        s["level"] = t.level;
        s["step"] = t.step;
        s["max_step_mm"] = t.max_step_mm;
        s["nodes"] = t.nodes;
        s["energies"] = t.energies;
        if (k < r.labelings.size())
            s["labeling"] = r.labelings[k];
        steps.push_back(std::move(s));
    }
    ojson j;
    j["steps"] = std::move(steps);
    return j.dump(2) + "\n";
}

} // namespace mwreg
