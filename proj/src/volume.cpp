#include "mwreg/volume.hpp"

#include <string>

namespace mwreg {

Index3 Geometry::nearest_voxel(const Vec3& p) const
{
    const Vec3 v = to_voxel(p);
    return {clamp_index(static_cast<int>(std::floor(v.x + 0.5)), dims.x),
            clamp_index(static_cast<int>(std::floor(v.y + 0.5)), dims.y),
            clamp_index(static_cast<int>(std::floor(v.z + 0.5)), dims.z)};
}

void Geometry::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1)
            throw std::invalid_argument("dims must be >= 1 along every axis");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw std::invalid_argument("spacing must be finite and > 0");
        if (!std::isfinite(origin[a]))
            throw std::invalid_argument("origin must be finite");
    }
}

ClassSet::ClassSet(std::vector<Entry> classes) : classes_(std::move(classes))
{
    if (classes_.empty())
        throw std::invalid_argument("class set must contain at least the background class");
    if (classes_.size() > 256)
        throw std::invalid_argument("at most 256 classes are supported");
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].id != i)
            throw std::invalid_argument("class ids must be contiguous from 0 (got id " +
                                        std::to_string(classes_[i].id) + " at position " + std::to_string(i) + ")");
    }
}

void ClassSet::check_mask(const SegMask& mask) const
{
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!contains(mask[i]))
            throw std::invalid_argument("mask label " + std::to_string(mask[i]) + " is not a declared class");
    }
}

DenseField::DenseField(const Geometry& g, std::vector<float> interleaved)
    : geometry_(g), data_(std::move(interleaved))
{
    g.validate();
    if (data_.size() != 3 * g.voxel_count())
        throw std::invalid_argument("field payload does not match dims");
}

namespace {

struct TrilinearCell {
    int i0[3];
    int i1[3];
    double f[3];
};

TrilinearCell locate(const Index3& dims, const Vec3& voxel)
{
    TrilinearCell c{};
    for (int a = 0; a < 3; ++a) {
        const int n = dims[a];
        double p = voxel[a];
        if (p <= 0.0) p = 0.0;
        if (p >= n - 1) p = n - 1;
        const int lo = static_cast<int>(std::floor(p));
        c.i0[a] = lo;
        c.i1[a] = lo + 1 < n ? lo + 1 : lo;
        c.f[a] = p - lo;
    }
    return c;
}

} // namespace

Vec3 DenseField::sample(const Vec3& voxel) const
{
    const TrilinearCell c = locate(geometry_.dims, voxel);
    Vec3 out;
    for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? c.f[2] : 1.0 - c.f[2];
        const int z = dz ? c.i1[2] : c.i0[2];
        for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? c.f[1] : 1.0 - c.f[1];
            const int y = dy ? c.i1[1] : c.i0[1];
            for (int dx = 0; dx < 2; ++dx) {
                const double w = wz * wy * (dx ? c.f[0] : 1.0 - c.f[0]);
                if (w == 0.0) continue;
                const int x = dx ? c.i1[0] : c.i0[0];
                out = out + w * get(geometry_.index(x, y, z));
            }
        }
    }
    return out;
}

double sample_trilinear(const Volume& v, const Vec3& voxel)
{
    const TrilinearCell c = locate(v.dims(), voxel);
    double out = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? c.f[2] : 1.0 - c.f[2];
        const int z = dz ? c.i1[2] : c.i0[2];
        for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? c.f[1] : 1.0 - c.f[1];
            const int y = dy ? c.i1[1] : c.i0[1];
            for (int dx = 0; dx < 2; ++dx) {
                const double w = wz * wy * (dx ? c.f[0] : 1.0 - c.f[0]);
                if (w == 0.0) continue;
                out += w * v.at(dx ? c.i1[0] : c.i0[0], y, z);
            }
        }
    }
    return out;
}

} // namespace mwreg
