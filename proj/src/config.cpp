#include "mwreg/config.hpp"

#include <set>
#include <stdexcept>

#include "json.hpp"
#include "mwreg/volume_io.hpp"

namespace mwreg {

using ojson = nlohmann::ordered_json;

namespace {

void check_keys(const ojson& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
        throw FormatError("config: " + where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k))
            throw FormatError("config: unknown key '" + where + k + "'");
    }
}

template <typename T>
void take(const ojson& j, const char* key, T& out)
{
    if (j.contains(key))
        out = j[key].get<T>();
}

} // namespace

RunConfig parse_run_config(const std::string& json_text)
{
    RunConfig c;
    try {
        const ojson j = ojson::parse(json_text);
        check_keys(j,
                   {"pyramid_levels", "refine_steps", "labels_per_axis", "grid_spacing_mm", "max_step_fraction",
                    "step_shrink", "mi_bins", "metrics", "seed", "threads", "hyperparams", "training", "evaluation"},
                   "");
        RegistrationConfig& r = c.registration;
        take(j, "pyramid_levels", r.pyramid_levels);
        take(j, "refine_steps", r.refine_steps);
        take(j, "labels_per_axis", r.labels_per_axis);
        take(j, "grid_spacing_mm", r.grid_spacing_mm);
        take(j, "max_step_fraction", r.max_step_fraction);
        take(j, "step_shrink", r.step_shrink);
        take(j, "mi_bins", r.mi_bins);
        take(j, "seed", c.seed);
        take(j, "threads", c.threads);
        if (j.contains("metrics")) {
            c.metrics.clear();
            for (const auto& m : j["metrics"]) {
                const auto parsed = parse_metric(m.get<std::string>());
                if (!parsed)
                    throw FormatError("config: unknown metric '" + m.get<std::string>() + "'");
                c.metrics.push_back(*parsed);
            }
        }
        c.training.grid_spacing_mm = r.grid_spacing_mm;
        c.training.labels_per_axis = r.labels_per_axis;
        c.training.max_step_fraction = r.max_step_fraction;
        c.training.mi_bins = r.mi_bins;

        if (j.contains("hyperparams")) {
            const ojson& h = j["hyperparams"];
            check_keys(h, {"C", "alpha", "eta", "epsilon", "cut_tol", "qp_tol", "max_outer", "max_inner", "w0"},
                       "hyperparams.");
            take(h, "C", c.hyper.C);
            take(h, "alpha", c.hyper.alpha);
            take(h, "eta", c.hyper.eta);
            take(h, "epsilon", c.hyper.epsilon);
            take(h, "cut_tol", c.hyper.cut_tol);
            take(h, "qp_tol", c.hyper.qp_tol);
            take(h, "max_outer", c.hyper.max_outer);
            take(h, "max_inner", c.hyper.max_inner);
            if (h.contains("w0")) {
                const ojson& w = h["w0"];
                check_keys(w, {"metric_weights", "pairwise_weight"}, "hyperparams.w0.");
                take(w, "metric_weights", c.hyper.w0.metric);
                take(w, "pairwise_weight", c.hyper.w0.pairwise);
            }
        }
        if (j.contains("training")) {
            const ojson& t = j["training"];
            check_keys(t, {"grid_margin", "downsample_factor"}, "training.");
            take(t, "grid_margin", c.training.grid_margin);
            take(t, "downsample_factor", c.training.downsample_factor);
        }
        if (j.contains("evaluation")) {
            const ojson& e = j["evaluation"];
            check_keys(e, {"single_metric_weight", "single_pairwise_weight"}, "evaluation.");
            take(e, "single_metric_weight", c.eval.single_metric_weight);
            take(e, "single_pairwise_weight", c.eval.single_pairwise_weight);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    if (c.registration.pyramid_levels < 1 || c.registration.refine_steps < 1 || c.registration.labels_per_axis < 1 ||
        !(c.registration.grid_spacing_mm > 0.0))
        throw FormatError("config: pyramid_levels, refine_steps, labels_per_axis and grid_spacing_mm must be positive");
    if (c.threads < 0)
        throw FormatError("config: threads must be >= 0");
    c.eval.registration = c.registration;
    c.eval.baselines = MetricMask{};
    for (Metric m : c.metrics)
        c.eval.baselines[static_cast<int>(m)] = true;
    return c;
}

std::string run_config_to_json(const RunConfig& c)
{
    ojson j;
    j["pyramid_levels"] = c.registration.pyramid_levels;
    j["refine_steps"] = c.registration.refine_steps;
    j["labels_per_axis"] = c.registration.labels_per_axis;
    j["grid_spacing_mm"] = c.registration.grid_spacing_mm;
    j["max_step_fraction"] = c.registration.max_step_fraction;
    j["step_shrink"] = c.registration.step_shrink;
    j["mi_bins"] = c.registration.mi_bins;
    ojson metrics = ojson::array();
    for (Metric m : c.metrics)
        metrics.push_back(std::string(metric_name(m)));
    j["metrics"] = metrics;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["hyperparams"] = {{"C", c.hyper.C},
                        {"alpha", c.hyper.alpha},
                        {"eta", c.hyper.eta},
                        {"epsilon", c.hyper.epsilon},
                        {"cut_tol", c.hyper.cut_tol},
                        {"qp_tol", c.hyper.qp_tol},
                        {"max_outer", c.hyper.max_outer},
                        {"max_inner", c.hyper.max_inner},
                        {"w0", {{"metric_weights", c.hyper.w0.metric}, {"pairwise_weight", c.hyper.w0.pairwise}}}};
    j["training"] = {{"grid_margin", c.training.grid_margin}, {"downsample_factor", c.training.downsample_factor}};
    j["evaluation"] = {{"single_metric_weight", c.eval.single_metric_weight},
                       {"single_pairwise_weight", c.eval.single_pairwise_weight}};
    return j.dump(2) + "\n";
}

} // namespace mwreg
