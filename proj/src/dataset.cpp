#include "mwreg/dataset.hpp"

#include "json.hpp"
#include "mwreg/volume_io.hpp"

namespace mwreg {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string rel(const fs::path& p, const fs::path& base)
{
    if (base.empty())
        return p.generic_string();
    return p.lexically_relative(base).generic_string();
}

fs::path resolve(const std::string& s, const fs::path& base)
{
    const fs::path p(s);
    return p.is_absolute() ? p : base / p;
}

bool is_nifti(const fs::path& p)
{
    const std::string s = p.string();
    return s.size() >= 4 && s.compare(s.size() - 4, 4, ".nii") == 0;
}

Volume read_volume(const fs::path& p) { return is_nifti(p) ? import_nifti_volume(p) : load_volume(p); }
SegMask read_mask(const fs::path& p) { return is_nifti(p) ? import_nifti_mask(p) : load_mask(p); }

} // namespace

std::string manifest_to_json(const Manifest& m, const fs::path& base_dir)
{
    ojson j;
    ojson classes = ojson::array();
    for (const auto& c : m.classes.entries())
        classes.push_back({{"id", c.id}, {"name", c.name}});
    j["classes"] = std::move(classes);
    ojson samples = ojson::array();
    for (const auto& e : m.samples) {
        ojson s;
        s["id"] = e.id;
        s["source"] = rel(e.source, base_dir);
        s["target"] = rel(e.target, base_dir);
        s["source_seg"] = rel(e.source_seg, base_dir);
        s["target_seg"] = rel(e.target_seg, base_dir);
        if (e.truth_field)
            s["truth_field"] = rel(*e.truth_field, base_dir);
        samples.push_back(std::move(s));
    }
    j["samples"] = std::move(samples);
    return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text, const fs::path& base_dir)
{
    Manifest m;
    try {
        const ojson j = ojson::parse(text);
        std::vector<ClassSet::Entry> classes;
        for (const auto& c : j.at("classes"))
            classes.push_back({static_cast<ClassId>(c.at("id").get<int>()), c.value("name", std::string())});
        m.classes = ClassSet(std::move(classes));
        for (const auto& s : j.at("samples")) {
            ManifestEntry e;
            e.id = s.at("id").get<std::string>();
            e.source = resolve(s.at("source").get<std::string>(), base_dir);
            e.target = resolve(s.at("target").get<std::string>(), base_dir);
            e.source_seg = resolve(s.at("source_seg").get<std::string>(), base_dir);
            e.target_seg = resolve(s.at("target_seg").get<std::string>(), base_dir);
            if (s.contains("truth_field"))
                e.truth_field = resolve(s["truth_field"].get<std::string>(), base_dir);
            m.samples.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return m;
}

void write_manifest(const fs::path& path, const Manifest& m)
{
    write_file_atomic(path, manifest_to_json(m, path.parent_path()));
}

Manifest read_manifest(const fs::path& path) { return manifest_from_json(read_file(path), path.parent_path()); }

TrainSample load_sample(const ManifestEntry& e, const ClassSet& classes)
{
    TrainSample s;
    s.id = e.id;
    s.source = normalize_minmax(read_volume(e.source));
    s.target = normalize_minmax(read_volume(e.target));
    s.source_mask = read_mask(e.source_seg);
    s.target_mask = read_mask(e.target_seg);
    if (!(s.source.geometry() == s.source_mask.geometry()) || !(s.target.geometry() == s.target_mask.geometry()))
        throw FormatError("sample " + e.id + ": image and mask geometries differ");
    classes.check_mask(s.source_mask);
    classes.check_mask(s.target_mask);
    return s;
}

std::vector<TrainSample> load_samples(const Manifest& m)
{
    std::vector<TrainSample> out;
    out.reserve(m.samples.size());
    for (const auto& e : m.samples)
        out.push_back(load_sample(e, m.classes));
    return out;
}

Manifest write_dataset(const fs::path& out_dir, const SynthSpec& spec)
{
    fs::create_directories(out_dir);
    Manifest m;
    m.classes = phantom_classes(spec.phantom);
    for (int k = 0; k < spec.num_samples; ++k) {
        const PhantomSample ps = generate(sample_spec(spec.phantom, k));
        char buf[32];
        std::snprintf(buf, sizeof buf, "pair%03d", k);
        const std::string id = buf;
        ManifestEntry e;
        e.id = id;
        e.source = out_dir / (id + "_source.vvol");
        e.target = out_dir / (id + "_target.vvol");
        e.source_seg = out_dir / (id + "_source_seg.vvol");
        e.target_seg = out_dir / (id + "_target_seg.vvol");
        e.truth_field = out_dir / (id + "_truth.vvol");
        save_native(e.source, ps.sample.source);
        save_native(e.target, ps.sample.target);
        save_native(e.source_seg, ps.sample.source_mask);
        save_native(e.target_seg, ps.sample.target_mask);
        save_native(*e.truth_field, ps.truth);
        if (spec.write_nifti) {
            export_nifti(out_dir / (id + "_source.nii"), ps.sample.source);
            export_nifti(out_dir / (id + "_target.nii"), ps.sample.target);
            export_nifti(out_dir / (id + "_source_seg.nii"), ps.sample.source_mask);
            export_nifti(out_dir / (id + "_target_seg.nii"), ps.sample.target_mask);
        }
        m.samples.push_back(std::move(e));
    }
    write_manifest(out_dir / "manifest.json", m);
    return m;
}

} // namespace mwreg
