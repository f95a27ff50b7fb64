#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mwreg/config.hpp"
#include "mwreg/dataset.hpp"
#include "mwreg/deformation.hpp"
#include "mwreg/evaluation.hpp"
#include "mwreg/lssvm.hpp"
#include "mwreg/parallel.hpp"
#include "mwreg/phantom.hpp"
#include "mwreg/registration.hpp"
#include "mwreg/serialization.hpp"
#include "mwreg/volume_io.hpp"

using namespace mwreg;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kError = 1, kSpecError = 2, kNotConverged = 3, kGeometry = 4, kMissingPairs = 5 };

struct ExitError : std::runtime_error {
    ExitError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
    int code;
};

RunConfig load_config(const std::string& path, int threads_flag)
{
    RunConfig c = path.empty() ? parse_run_config("{}") : parse_run_config(read_file(path));
    if (threads_flag >= 0)
        c.threads = threads_flag;
    set_thread_count(c.threads);
    return c;
}

bool is_nifti(const fs::path& p) { return p.extension() == ".nii"; }
Volume read_volume(const fs::path& p) { return is_nifti(p) ? import_nifti_volume(p) : load_volume(p); }
SegMask read_mask(const fs::path& p) { return is_nifti(p) ? import_nifti_mask(p) : load_mask(p); }

int cmd_synth(const std::string& spec_path, const fs::path& out_dir)
{
    SynthSpec spec;
    try {
        spec = parse_synth_spec(read_file(spec_path));
    } catch (const PhantomSpecError& e) {
        throw ExitError(kSpecError, std::string("invalid spec: ") + e.what());
    } catch (const FormatError& e) {
        throw ExitError(kSpecError, std::string("invalid spec: ") + e.what());
    }
    const Manifest m = write_dataset(out_dir, spec);
    std::cout << "wrote " << m.samples.size() << " pairs and " << (out_dir / "manifest.json").string() << "\n";
    return kOk;
}

int cmd_train(const fs::path& manifest_path, const std::string& which, const RunConfig& cfg, const fs::path& out,
              const std::string& report_path, bool strict)
{
    const Manifest m = read_manifest(manifest_path);
    const std::vector<TrainSample> samples = load_samples(m);
    if (samples.empty())
        throw ExitError(kMissingPairs, "manifest lists no samples");

    std::vector<ClassId> classes;
    if (which == "all") {
        for (const auto& e : m.classes.entries())
            classes.push_back(e.id);
    } else {
        const int id = std::stoi(which);
        if (!m.classes.contains(id))
            throw std::invalid_argument("class " + which + " is not declared in the manifest");
        classes.push_back(static_cast<ClassId>(id));
    }

    std::string report;
    ojson header;
    header["w0"] = {{"metric_weights", cfg.hyper.w0.metric}, {"pairwise_weight", cfg.hyper.w0.pairwise}};
    header["hyperparams"] = {{"C", cfg.hyper.C}, {"alpha", cfg.hyper.alpha}, {"eta", cfg.hyper.eta},
                             {"epsilon", cfg.hyper.epsilon}, {"cut_tol", cfg.hyper.cut_tol}};
    header["classes"] = classes;
    header["samples"] = samples.size();
    report += ojson{{"header", header}}.dump() + "\n";

    std::vector<std::pair<ClassId, WeightVector>> learned;
    bool all_converged = true;
    for (ClassId c : classes) {
        std::cerr << "training class " << int(c) << " (" << m.classes.name(c) << ")\n";
        const TrainReport r = train_class(samples, c, cfg.training, cfg.hyper, [&](const OuterRecord& rec) {
            ojson line = ojson::parse(outer_record_jsonl(rec));
            ojson withclass;
            withclass["class"] = c;
            for (const auto& [k, v] : line.items())
                withclass[k] = v;
            report += withclass.dump() + "\n";
            std::cerr << "  iter " << rec.iter << " objective " << rec.objective << " constraints "
                      << rec.constraints_total << "\n";
        });
        if (!r.converged) {
            all_converged = false;
            std::cerr << "warning: class " << int(c) << " did not converge within " << cfg.hyper.max_outer
                      << " outer iterations\n";
        }
        learned.emplace_back(c, r.w);
    }
    write_file_atomic(out, weights_to_json(learned));
    if (!report_path.empty())
        write_file_atomic(report_path, report);
    if (strict && !all_converged)
        throw ExitError(kNotConverged, "training did not converge");
    return kOk;
}

int cmd_register(const fs::path& source_path, const fs::path& target_path, const std::string& seg_path,
                 const std::string& weights_path, const std::string& metric, double metric_weight,
                 double pairwise_weight, const RunConfig& cfg, const fs::path& out_dir)
{
    const Volume source_raw = read_volume(source_path);
    const Volume source = normalize_minmax(source_raw);
    const Volume target = normalize_minmax(read_volume(target_path));
    if (!(source.geometry() == target.geometry()))
        throw ExitError(kGeometry, "source and target geometries differ");
    std::optional<SegMask> seg;
    if (!seg_path.empty()) {
        seg = read_mask(seg_path);
        if (!(seg->geometry() == source.geometry()))
            throw ExitError(kGeometry, "source segmentation geometry differs from the source image");
    }

    WeightMatrix w;
    if (!metric.empty()) {
        const auto m = parse_metric(metric);
        if (!m)
            throw std::invalid_argument("unknown metric '" + metric + "'");
        w = single_metric_weights(*m, metric_weight, pairwise_weight);
    } else {
        w = load_weights(weights_path);
        if (w.classes() > 1 && !seg)
            throw std::invalid_argument("multi-metric mode requires source segmentation");
        if (w.classes() > 1)
            std::cerr << "pairwise weight (mean over classes): " << w.pairwise_weight() << "\n";
    }

    const RegistrationResult r = register_images(source, target, seg ? &*seg : nullptr, w, cfg.registration);
    fs::create_directories(out_dir);
    save_native(out_dir / "field.vvol", r.field);
    save_native(out_dir / "warped.vvol", warp_image(source_raw, r.field));
    if (seg)
        save_native(out_dir / "warped_seg.vvol", warp_mask(*seg, r.field));
    write_file_atomic(out_dir / "trace.json", registration_trace_json(r));
    std::cout << "wrote " << (out_dir / "field.vvol").string() << "\n";
    return kOk;
}

int cmd_evaluate(const fs::path& manifest_path, const fs::path& weights_path, const RunConfig& cfg,
                 const fs::path& csv_path, const std::string& svg_path)
{
    if (!fs::exists(manifest_path))
        throw ExitError(kMissingPairs, "manifest not found: " + manifest_path.string());
    const Manifest m = read_manifest(manifest_path);
    if (m.samples.empty())
        throw ExitError(kMissingPairs, "manifest lists no pairs");
    for (const auto& e : m.samples) {
        for (const fs::path& p : {e.source, e.target, e.source_seg, e.target_seg}) {
            if (!fs::exists(p))
                throw ExitError(kMissingPairs, "pair " + e.id + ": missing file " + p.string());
        }
    }
    const WeightMatrix w = load_weights(weights_path);
    if (w.classes() != m.classes.size())
        throw std::invalid_argument("weight file has " + std::to_string(w.classes()) + " classes, manifest declares " +
                                    std::to_string(m.classes.size()));
    const std::vector<TrainSample> pairs = load_samples(m);
    const std::vector<EvalRow> rows = evaluate_pairs(pairs, m.classes.size(), w, cfg.eval);
    write_file_atomic(csv_path, eval_csv(rows));
    if (!svg_path.empty())
        write_file_atomic(svg_path, eval_svg(rows));
    for (const auto& r : class_means(rows)) {
        std::cout << "class " << int(r.class_id);
        for (int k = 0; k < kNumMethods; ++k)
            std::cout << "  " << method_name(k) << " " << r.dice[k];
        std::cout << "\n";
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-metric deformable registration with learned per-class weights"};
    app.require_subcommand(1);
    int threads = -1;
    std::string config_path;

    auto* synth = app.add_subcommand("synth", "generate a phantom dataset");
    std::string spec_path, out_dir;
    synth->add_option("--spec", spec_path, "phantom spec JSON")->required();
    synth->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "learn per-class weights");
    std::string manifest, which = "all", weights_out, report_path;
    bool strict = false;
    train->add_option("--manifest", manifest)->required();
    train->add_option("--class", which, "class id or 'all'");
    train->add_option("--out", weights_out, "weights JSON")->required();
    train->add_option("--report", report_path, "JSONL training report");
    train->add_flag("--fail-on-nonconvergence", strict, "exit 3 when a class does not converge");

    auto* reg = app.add_subcommand("register", "register a source image onto a target");
    std::string source, target, seg, weights, metric, reg_out;
    double metric_weight = 1.0, pairwise_weight = 0.1;
    reg->add_option("--source", source)->required();
    reg->add_option("--target", target)->required();
    reg->add_option("--source-seg", seg);
    auto* wopt = reg->add_option("--weights", weights, "learned weight JSON");
    auto* mopt = reg->add_option("--metric", metric, "single-metric mode: sad, mi, ncc or dwt");
    wopt->excludes(mopt);
    reg->add_option("--metric-weight", metric_weight);
    reg->add_option("--pairwise-weight", pairwise_weight);
    reg->add_option("--out", reg_out, "output directory")->required();

    auto* eval = app.add_subcommand("evaluate", "dice table and box plot over a manifest");
    std::string eval_manifest, eval_weights, csv_path, svg_path;
    eval->add_option("--manifest", eval_manifest)->required();
    eval->add_option("--weights", eval_weights)->required();
    eval->add_option("--csv", csv_path)->required();
    eval->add_option("--svg", svg_path);

    for (auto* sub : {train, reg, eval}) {
        sub->add_option("--config", config_path, "run config JSON");
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(spec_path, out_dir);
        const RunConfig cfg = load_config(config_path, threads);
        if (train->parsed())
            return cmd_train(manifest, which, cfg, weights_out, report_path, strict);
        if (reg->parsed()) {
            if (weights.empty() && metric.empty())
                throw std::invalid_argument("register needs --weights or --metric");
            return cmd_register(source, target, seg, weights, metric, metric_weight, pairwise_weight, cfg, reg_out);
        }
        if (eval->parsed())
            return cmd_evaluate(eval_manifest, eval_weights, cfg, csv_path, svg_path);
    } catch (const ExitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}
