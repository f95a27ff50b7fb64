#include "mwreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"
#include "mwreg/deformation.hpp"

namespace mwreg {

std::string_view transform_name(IntensityTransform t)
{
    switch (t) {
    case IntensityTransform::Linear: return "linear";
    case IntensityTransform::Gamma: return "gamma";
    case IntensityTransform::Inverted: return "inverted";
    case IntensityTransform::NoisyMonotone: return "noisy-monotone";
    }
    return "?";
}

IntensityTransform parse_transform(std::string_view name)
{
    for (auto t : {IntensityTransform::Linear, IntensityTransform::Gamma, IntensityTransform::Inverted,
                   IntensityTransform::NoisyMonotone}) {
        if (transform_name(t) == name)
            return t;
    }
    throw PhantomSpecError("transform", "unknown intensity transform '" + std::string(name) + "'");
}

double apply_transform(IntensityTransform t, double v)
{
    switch (t) {
    case IntensityTransform::Linear: return v;
    case IntensityTransform::Gamma: return std::pow(std::clamp(v, 0.0, 1.0), 3.0);
    case IntensityTransform::Inverted: return 1.0 - v;
    case IntensityTransform::NoisyMonotone: return std::sqrt(std::clamp(v, 0.0, 1.0));
    }
    return v;
}

void validate(const PhantomSpec& spec)
{
    try {
        spec.geometry.validate();
    } catch (const std::invalid_argument& e) {
        throw PhantomSpecError("dims/spacing", e.what());
    }
    if (spec.classes.empty())
        throw PhantomSpecError("classes", "at least the background class is required");
    for (std::size_t i = 0; i < spec.classes.size(); ++i) {
        if (spec.classes[i].id != i)
            throw PhantomSpecError("classes", "ids must be contiguous from 0");
        if (!(spec.classes[i].intensity >= 0.0 && spec.classes[i].intensity <= 1.0))
            throw PhantomSpecError("classes", "intensity must lie in [0,1]");
    }
    for (const auto& s : spec.structures) {
        if (s.class_id >= spec.classes.size())
            throw PhantomSpecError("structures", "structure refers to undeclared class " + std::to_string(s.class_id));
        if (!(s.radii_mm.x > 0.0 && s.radii_mm.y > 0.0 && s.radii_mm.z > 0.0))
            throw PhantomSpecError("structures", "ellipsoid radii must be > 0");
    }
    if (!(spec.control_spacing_mm > 0.0))
        throw PhantomSpecError("control_spacing_mm", "must be > 0");
    if (!(spec.deformation_mm >= 0.0) || !(spec.deformation_mm < 0.4 * spec.control_spacing_mm))
        throw PhantomSpecError("deformation_mm", "must lie in [0, 0.4 x control_spacing_mm)");
    if (!(spec.noise_sigma >= 0.0))
        throw PhantomSpecError("noise_sigma", "must be >= 0");
    if (!(spec.jitter_mm >= 0.0))
        throw PhantomSpecError("jitter_mm", "must be >= 0");
    if (!(spec.texture_amplitude >= 0.0))
        throw PhantomSpecError("texture_amplitude", "must be >= 0");
    if (!(spec.texture_spacing_mm > 0.0))
        throw PhantomSpecError("texture_spacing_mm", "must be > 0");
}

ClassSet phantom_classes(const PhantomSpec& spec)
{
    std::vector<ClassSet::Entry> e;
    for (const auto& c : spec.classes)
        e.push_back({c.id, c.name});
    return ClassSet(std::move(e));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Smooth random field: cubic B-spline of i.i.d. uniform node values.
DenseField random_bspline_field(const Geometry& g, double spacing_mm, double amplitude, std::mt19937_64& rng)
{
    const ControlGrid grid = build_grid(g, spacing_mm);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    std::vector<Vec3> nodes(grid.node_count());
    for (auto& n : nodes) {
        n.x = u(rng);
        n.y = u(rng);
        n.z = u(rng);
    }
    return densify(grid, nodes, g);
}

} // namespace

PhantomSpec sample_spec(const PhantomSpec& base, int k)
{
    PhantomSpec s = base;
    s.seed = splitmix64(base.seed ^ splitmix64(static_cast<std::uint64_t>(k) + 1));
    return s;
}

PhantomSample generate(const PhantomSpec& spec)
{
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    const Geometry& g = spec.geometry;

    std::vector<Ellipsoid> shapes = spec.structures;
    if (spec.jitter_mm > 0.0) {
        std::uniform_real_distribution<double> j(-spec.jitter_mm, spec.jitter_mm);
        for (auto& s : shapes)
            s.center_mm = s.center_mm + Vec3{j(rng), j(rng), j(rng)};
    }

    SegMask source_mask(g, 0);
    for (const auto& s : shapes) {
        for (std::size_t i = 0; i < source_mask.size(); ++i) {
            const Vec3 d = g.to_mm(g.coords(i)) - s.center_mm;
            const double r = (d.x * d.x) / (s.radii_mm.x * s.radii_mm.x) + (d.y * d.y) / (s.radii_mm.y * s.radii_mm.y) +
                             (d.z * d.z) / (s.radii_mm.z * s.radii_mm.z);
            if (r <= 1.0)
                source_mask[i] = s.class_id;
        }
    }

    const DenseField texture = random_bspline_field(g, spec.texture_spacing_mm, 1.0, rng);
    Volume source(g);
    for (std::size_t i = 0; i < source.size(); ++i) {
        const double v = spec.classes[source_mask[i]].intensity + spec.texture_amplitude * texture.get(i).x;
        source[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }

    PhantomSample out;
    out.truth = random_bspline_field(g, spec.control_spacing_mm, spec.deformation_mm, rng);
    SegMask target_mask = warp_mask(source_mask, out.truth);
    const Volume warped = warp_image(source, out.truth);

    std::normal_distribution<double> noise(0.0, 1.0);
    Volume target(g);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const PhantomClass& c = spec.classes[target_mask[i]];
        double sigma = spec.noise_sigma;
        if (c.transform == IntensityTransform::NoisyMonotone)
            sigma *= 3.0;
        const double v = apply_transform(c.transform, warped[i]) + sigma * noise(rng);
        target[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }

    out.sample.source = std::move(source);
    out.sample.target = std::move(target);
    out.sample.source_mask = std::move(source_mask);
    out.sample.target_mask = std::move(target_mask);
    return out;
}

namespace {

Vec3 parse_vec3(const nlohmann::json& j, const std::string& field)
{
    if (!j.is_array() || j.size() != 3)
        throw PhantomSpecError(field, "must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

SynthSpec parse_synth_spec(const std::string& json_text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw PhantomSpecError("<root>", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw PhantomSpecError("<root>", "spec must be a JSON object");

    SynthSpec out;
    PhantomSpec& p = out.phantom;
    std::string field;
    try {
        field = "seed";
        p.seed = j.value("seed", std::uint64_t{1});
        field = "num_samples";
        out.num_samples = j.value("num_samples", 1);
        if (out.num_samples < 1)
            throw PhantomSpecError(field, "must be >= 1");
        field = "dims";
        if (j.contains("dims")) {
            const Vec3 d = parse_vec3(j["dims"], field);
            p.geometry.dims = {static_cast<int>(d.x), static_cast<int>(d.y), static_cast<int>(d.z)};
        }
        field = "spacing";
        if (j.contains("spacing"))
            p.geometry.spacing = parse_vec3(j["spacing"], field);
        field = "origin";
        if (j.contains("origin"))
            p.geometry.origin = parse_vec3(j["origin"], field);
        field = "deformation_mm";
        p.deformation_mm = j.value(field, p.deformation_mm);
        field = "noise_sigma";
        p.noise_sigma = j.value(field, p.noise_sigma);
        field = "control_spacing_mm";
        p.control_spacing_mm = j.value(field, p.control_spacing_mm);
        field = "jitter_mm";
        p.jitter_mm = j.value(field, p.jitter_mm);
        field = "texture_amplitude";
        p.texture_amplitude = j.value(field, p.texture_amplitude);
        field = "texture_spacing_mm";
        p.texture_spacing_mm = j.value(field, p.texture_spacing_mm);
        field = "write_nifti";
        out.write_nifti = j.value(field, false);

        field = "classes";
        if (!j.contains("classes") || !j["classes"].is_array())
            throw PhantomSpecError(field, "required array of {id, name, transform, intensity}");
        for (const auto& c : j["classes"]) {
            PhantomClass pc;
            const int id = c.at("id").get<int>();
            if (id < 0 || id > 255)
                throw PhantomSpecError(field, "class id out of range");
            pc.id = static_cast<ClassId>(id);
            pc.name = c.value("name", "class" + std::to_string(id));
            pc.transform = parse_transform(c.value("transform", std::string("linear")));
            pc.intensity = c.value("intensity", 0.5);
            p.classes.push_back(std::move(pc));
        }
        field = "structures";
        if (j.contains("structures")) {
            if (!j["structures"].is_array())
                throw PhantomSpecError(field, "must be an array");
            for (const auto& s : j["structures"]) {
                Ellipsoid e;
                const int id = s.at("class").get<int>();
                if (id < 0 || id > 255)
                    throw PhantomSpecError(field, "class id out of range");
                e.class_id = static_cast<ClassId>(id);
                e.center_mm = parse_vec3(s.at("center"), field + ".center");
                e.radii_mm = parse_vec3(s.at("radii"), field + ".radii");
                p.structures.push_back(e);
            }
        }
    } catch (const PhantomSpecError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw PhantomSpecError(field, e.what());
    }
    validate(p);
    return out;
}

} // namespace mwreg
