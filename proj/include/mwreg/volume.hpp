#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mwreg {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
    double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double l1_norm(const Vec3& v) { return std::abs(v.x) + std::abs(v.y) + std::abs(v.z); }
inline double l2_norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

struct Index3 {
    int x = 0;
    int y = 0;
    int z = 0;

    int& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
    int operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
    friend bool operator==(const Index3&, const Index3&) = default;
};

/// Voxel lattice placement in physical (mm) space. Voxel (i,j,k) sits at
/// origin + (i*sx, j*sy, k*sz); no rotation.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{};

    std::size_t voxel_count() const
    {
        return static_cast<std::size_t>(dims.x) * dims.y * dims.z;
    }
    std::size_t index(int x, int y, int z) const
    {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(dims.x) * (y + static_cast<std::size_t>(dims.y) * z);
    }
    Index3 coords(std::size_t idx) const
    {
        const auto nx = static_cast<std::size_t>(dims.x);
        const auto ny = static_cast<std::size_t>(dims.y);
        return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
    }
    Vec3 to_mm(const Index3& v) const
    {
        return {origin.x + v.x * spacing.x, origin.y + v.y * spacing.y, origin.z + v.z * spacing.z};
    }
    /// Continuous voxel coordinates of a physical point.
    Vec3 to_voxel(const Vec3& p) const
    {
        return {(p.x - origin.x) / spacing.x, (p.y - origin.y) / spacing.y, (p.z - origin.z) / spacing.z};
    }
    /// Nearest voxel of a physical point, clamped into the lattice.
    Index3 nearest_voxel(const Vec3& p) const;
    /// Distance between first and last voxel centres along each axis.
    Vec3 extent() const
    {
        return {(dims.x - 1) * spacing.x, (dims.y - 1) * spacing.y, (dims.z - 1) * spacing.z};
    }

    void validate() const;
    friend bool operator==(const Geometry&, const Geometry&) = default;
};

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    explicit Grid(const Geometry& g, T fill = T{})
        : geometry_(g), data_(g.voxel_count(), fill)
    {
        g.validate();
    }
    Grid(const Geometry& g, std::vector<T> data)
        : geometry_(g), data_(std::move(data))
    {
        g.validate();
        if (data_.size() != g.voxel_count())
            throw std::invalid_argument("voxel payload does not match dims");
    }

    const Geometry& geometry() const { return geometry_; }
    const Index3& dims() const { return geometry_.dims; }
    std::size_t size() const { return data_.size(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }
    T& at(int x, int y, int z) { return data_[geometry_.index(x, y, z)]; }
    const T& at(int x, int y, int z) const { return data_[geometry_.index(x, y, z)]; }
    /// Border-clamped access.
    const T& clamped(int x, int y, int z) const
    {
        return data_[geometry_.index(clamp_index(x, geometry_.dims.x), clamp_index(y, geometry_.dims.y),
                                     clamp_index(z, geometry_.dims.z))];
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Geometry geometry_;
    std::vector<T> data_;
};

using Volume = Grid<float>;
using SegMask = Grid<std::uint8_t>;
using ClassId = std::uint8_t;

/// Ordered set of segmentation classes; id 0 is background.
class ClassSet {
public:
    struct Entry {
        ClassId id;
        std::string name;
    };

    ClassSet() = default;
    explicit ClassSet(std::vector<Entry> classes);

    std::size_t size() const { return classes_.size(); }
    const std::vector<Entry>& entries() const { return classes_; }
    bool contains(int id) const { return id >= 0 && static_cast<std::size_t>(id) < classes_.size(); }
    const std::string& name(ClassId id) const { return classes_.at(id).name; }

    /// Throws if any mask voxel carries an undeclared id.
    void check_mask(const SegMask& mask) const;

private:
    std::vector<Entry> classes_;
};

/// Per-voxel displacement field in mm, stored as interleaved float triplets.
class DenseField {
public:
    DenseField() = default;
    explicit DenseField(const Geometry& g) : geometry_(g), data_(3 * g.voxel_count(), 0.0f) { g.validate(); }
    DenseField(const Geometry& g, std::vector<float> interleaved);

    const Geometry& geometry() const { return geometry_; }
    std::size_t voxel_count() const { return geometry_.voxel_count(); }

    Vec3 get(std::size_t i) const { return {data_[3 * i], data_[3 * i + 1], data_[3 * i + 2]}; }
    void set(std::size_t i, const Vec3& v)
    {
        data_[3 * i] = static_cast<float>(v.x);
        data_[3 * i + 1] = static_cast<float>(v.y);
        data_[3 * i + 2] = static_cast<float>(v.z);
    }
    /// Trilinear sample at continuous voxel coordinates, clamped to the border.
    Vec3 sample(const Vec3& voxel) const;

    const std::vector<float>& interleaved() const { return data_; }

    friend bool operator==(const DenseField&, const DenseField&) = default;

private:
    Geometry geometry_;
    std::vector<float> data_;
};

/// Trilinear interpolation at continuous voxel coordinates with border clamping.
double sample_trilinear(const Volume& v, const Vec3& voxel);

} // namespace mwreg
