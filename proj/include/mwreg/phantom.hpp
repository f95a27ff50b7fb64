#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwreg/lssvm.hpp"
#include "mwreg/volume.hpp"

namespace mwreg {

/// How target intensities of a class relate to the source intensities.
enum class IntensityTransform { Linear, Gamma, Inverted, NoisyMonotone };

std::string_view transform_name(IntensityTransform t);
IntensityTransform parse_transform(std::string_view name);
double apply_transform(IntensityTransform t, double v);

struct PhantomClass {
    ClassId id = 0;
    std::string name;
    IntensityTransform transform = IntensityTransform::Linear;
    double intensity = 0.5; ///< mean source intensity of the class
};

struct Ellipsoid {
    ClassId class_id = 1;
    Vec3 center_mm;
    Vec3 radii_mm;
};

struct PhantomSpec {
    std::uint64_t seed = 1;
    Geometry geometry{{32, 32, 32}, {3.75, 3.75, 3.75}, {}};
    std::vector<PhantomClass> classes;
    std::vector<Ellipsoid> structures; ///< painted in order, later ones on top
    double deformation_mm = 5.0;       ///< max |component| of control-node displacements
    double noise_sigma = 0.02;
    double control_spacing_mm = 25.0;
    double jitter_mm = 0.0;            ///< random per-sample shift of every structure centre
    double texture_amplitude = 0.1;
    double texture_spacing_mm = 10.0;
};

class PhantomSpecError : public std::invalid_argument {
public:
    PhantomSpecError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field)
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Throws PhantomSpecError naming the offending field.
void validate(const PhantomSpec& spec);

ClassSet phantom_classes(const PhantomSpec& spec);

struct PhantomSample {
    TrainSample sample;
    DenseField truth; ///< source(x + truth(x)) corresponds to target(x)
};

/// Deterministic in spec.seed.
PhantomSample generate(const PhantomSpec& spec);

/// Parses the synth spec JSON; also returns how many samples to draw.
struct SynthSpec {
    PhantomSpec phantom;
    int num_samples = 1;
    bool write_nifti = false;
};
SynthSpec parse_synth_spec(const std::string& json_text);

/// Spec for sample k of a dataset (seed derived from the base seed).
PhantomSpec sample_spec(const PhantomSpec& base, int k);

} // namespace mwreg
