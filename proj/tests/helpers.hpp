#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "mwreg/volume.hpp"

namespace testing_util {

inline mwreg::Geometry geom(int nx, int ny, int nz, double s = 1.0)
{
    return mwreg::Geometry{{nx, ny, nz}, {s, s, s}, {}};
}

inline mwreg::Volume random_volume(const mwreg::Geometry& g, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    mwreg::Volume v(g);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = u(rng);
    return v;
}

inline mwreg::SegMask random_mask(const mwreg::Geometry& g, int classes, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(0, classes - 1);
    mwreg::SegMask m(g);
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = static_cast<std::uint8_t>(u(rng));
    return m;
}

/// Smooth volume: sum of a few Gaussian blobs, values roughly in [0,1].
inline mwreg::Volume blob_volume(const mwreg::Geometry& g, std::uint64_t seed, int blobs = 6)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    struct B {
        mwreg::Vec3 c;
        double r, a;
    };
    std::vector<B> bs;
    for (int k = 0; k < blobs; ++k) {
        const mwreg::Vec3 e = g.extent();
        bs.push_back({{u(rng) * e.x, u(rng) * e.y, u(rng) * e.z}, (0.1 + 0.15 * u(rng)) * e.x, 0.3 + 0.7 * u(rng)});
    }
    mwreg::Volume v(g);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const mwreg::Vec3 p = g.to_mm(g.coords(i));
        double s = 0.0;
        for (const auto& b : bs) {
            const mwreg::Vec3 d = p - b.c;
            s += b.a * std::exp(-(d.x * d.x + d.y * d.y + d.z * d.z) / (2.0 * b.r * b.r));
        }
        v[i] = static_cast<float>(std::min(1.0, s));
    }
    return v;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace testing_util
