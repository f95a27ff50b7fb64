#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <random>

#include "mwreg/metrics.hpp"

using namespace mwreg;
using testing_util::geom;

namespace {

Patch make_patch(const Index3& h, std::vector<float> v)
{
    Patch p;
    p.half_extent = h;
    p.values = std::move(v);
    return p;
}

Patch random_patch(const Index3& h, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f)
{
    std::uniform_real_distribution<float> u(lo, hi);
    const std::size_t n = std::size_t(2 * h.x + 1) * (2 * h.y + 1) * (2 * h.z + 1);
    std::vector<float> v(n);
    for (float& x : v)
        x = u(rng);
    return make_patch(h, std::move(v));
}

// Haar by explicit 2x2x2 block arithmetic on a zero-padded even cube.
double haar_oracle(const Patch& a, const Patch& b)
{
    const Index3 s = a.side();
    const int px = s.x + s.x % 2, py = s.y + s.y % 2, pz = s.z + s.z % 2;
    std::vector<double> d(std::size_t(px) * py * pz, 0.0);
    auto at = [&](int x, int y, int z) -> double& { return d[x + px * (y + py * z)]; };
    std::size_t k = 0;
    for (int z = 0; z < s.z; ++z)
        for (int y = 0; y < s.y; ++y)
            for (int x = 0; x < s.x; ++x, ++k)
                at(x, y, z) = double(a.values[k]) - b.values[k];
    double total = 0.0;
    for (int z = 0; z < pz; z += 2)
        for (int y = 0; y < py; y += 2)
            for (int x = 0; x < px; x += 2)
                for (int sz = 0; sz < 2; ++sz)
                    for (int sy = 0; sy < 2; ++sy)
                        for (int sx = 0; sx < 2; ++sx) {
                            double c = 0.0;
                            for (int dz = 0; dz < 2; ++dz)
                                for (int dy = 0; dy < 2; ++dy)
                                    for (int dx = 0; dx < 2; ++dx) {
                                        const int sign = ((sx && dx) + (sy && dy) + (sz && dz)) % 2 ? -1 : 1;
                                        c += sign * at(x + dx, y + dy, z + dz);
                                    }
                            total += std::abs(c / std::sqrt(8.0));
                        }
    return total / double(d.size());
}

} // namespace

TEST_CASE("metric names")
{
    for (Metric m : kAllMetrics)
        CHECK(parse_metric(metric_name(m)) == m);
    CHECK_FALSE(parse_metric("ssd").has_value());
}

TEST_CASE("patch extraction matches a clamped scalar lookup")
{
    const Geometry g{{9, 8, 7}, {1.5, 1.0, 2.0}, {3.0, -2.0, 0.0}};
    const Volume v = testing_util::random_volume(g, 1);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-5.0, 20.0);
    for (int t = 0; t < 20; ++t) {
        const Vec3 c{u(rng), u(rng), u(rng)};
        const Index3 h{1, 2, 1};
        const Patch p = extract_patch(v, c, h);
        const Index3 n = g.nearest_voxel(c);
        CHECK(p.center == n);
        CHECK(p.size() == 3 * 5 * 3);
        std::size_t k = 0;
        for (int z = -1; z <= 1; ++z)
            for (int y = -2; y <= 2; ++y)
                for (int x = -1; x <= 1; ++x, ++k) {
                    const int xi = std::clamp(n.x + x, 0, 8), yi = std::clamp(n.y + y, 0, 7), zi = std::clamp(n.z + z, 0, 6);
                    CHECK(p.values[k] == v.at(xi, yi, zi));
                }
    }
}

TEST_CASE("shifted patches agree with plain extraction at lattice shifts")
{
    const Geometry g = geom(12, 12, 12, 2.0);
    const Volume v = testing_util::random_volume(g, 3);
    const Index3 h{2, 2, 2};
    const Patch a = extract_patch(v, {10.0, 12.0, 14.0}, h);
    CHECK(extract_shifted_patch(v, a.center, h, {0, 0, 0}).values == a.values);
    const Patch b = extract_patch(v, {14.0, 10.0, 14.0}, h);
    CHECK(extract_shifted_patch(v, a.center, h, {4.0, -2.0, 0.0}).values == b.values);
    // Half a voxel along x is the average of the two neighbours.
    const Patch c = extract_shifted_patch(v, a.center, h, {1.0, 0.0, 0.0});
    const Patch d = extract_patch(v, {12.0, 12.0, 14.0}, h);
    for (std::size_t k = 0; k < c.size(); ++k)
        CHECK(c.values[k] == doctest::Approx(0.5 * (a.values[k] + d.values[k])).epsilon(1e-6));
}

TEST_CASE("SAD is the mean absolute difference")
{
    std::mt19937_64 rng(4);
    const Patch a = random_patch({2, 1, 3}, rng), b = random_patch({2, 1, 3}, rng);
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += std::abs(double(a.values[k]) - b.values[k]);
    CHECK(sad(a, b) == doctest::Approx(s / a.size()));
    CHECK(sad(a, a) == 0.0);
    CHECK_THROWS_AS(sad(a, random_patch({1, 1, 1}, rng)), std::invalid_argument);
}

TEST_CASE("NCC dissimilarity")
{
    std::mt19937_64 rng(5);
    const Patch a = random_patch({2, 2, 2}, rng);
    Patch lin = a, neg = a;
    for (std::size_t k = 0; k < a.size(); ++k) {
        lin.values[k] = 0.5f * a.values[k] + 0.2f;
        neg.values[k] = 1.0f - a.values[k];
    }
    CHECK(ncc_dissim(a, lin) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(ncc_dissim(a, neg) == doctest::Approx(2.0).epsilon(1e-6));
    const Patch flat = make_patch({2, 2, 2}, std::vector<float>(a.size(), 0.3f));
    CHECK(ncc_dissim(a, flat) == 1.0);
}

TEST_CASE("MI dissimilarity")
{
    std::mt19937_64 rng(6);
    const Index3 big{10, 10, 10};
    const Patch a = random_patch(big, rng), b = random_patch(big, rng);
    CHECK(a.size() > 9000);
    CHECK(mi_dissim(a, b) == doctest::Approx(std::log(16.0)).epsilon(0.1 / std::log(16.0)));
    // A bin-preserving monotone map keeps the joint histogram diagonal.
    Patch inv = a;
    for (float& x : inv.values)
        x = 0.999999f - x;
    CHECK(mi_dissim(a, inv) < 0.02);
    CHECK(mi_dissim(a, a) < 0.02);

    // Counting oracle on a small patch.
    const Patch s = random_patch({1, 1, 1}, rng), t = random_patch({1, 1, 1}, rng);
    double joint[4][4] = {}, pa[4] = {}, pb[4] = {};
    for (std::size_t k = 0; k < s.size(); ++k) {
        const int i = std::min(3, int(s.values[k] * 4)), j = std::min(3, int(t.values[k] * 4));
        joint[i][j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    const double n = double(s.size());
    double mi = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (joint[i][j] > 0)
                mi += joint[i][j] / n * std::log(joint[i][j] * n / (pa[i] * pb[j]));
    CHECK(mi_dissim(s, t, 4) == doctest::Approx(std::max(0.0, std::log(4.0) - mi)));
}

TEST_CASE("DWT dissimilarity matches a direct Haar oracle")
{
    std::mt19937_64 rng(7);
    for (Index3 h : {Index3{1, 1, 1}, Index3{2, 1, 3}, Index3{0, 2, 1}}) {
        const Patch a = random_patch(h, rng), b = random_patch(h, rng);
        CHECK(dwt_dissim(a, b) == doctest::Approx(haar_oracle(a, b)).epsilon(1e-9));
    }
    const Index3 h{1, 1, 1};
    const Patch c1 = make_patch(h, std::vector<float>(27, 0.75f));
    const Patch c2 = make_patch(h, std::vector<float>(27, 0.25f));
    CHECK(dwt_dissim(c1, c2) == doctest::Approx(haar_oracle(c1, c2)));
    CHECK(dwt_dissim(c1, c1) == 0.0);
}

TEST_CASE("unary table on a two-node toy")
{
    const Geometry g = geom(6, 1, 1, 1.0);
    const Volume src = testing_util::random_volume(g, 8);
    const Volume tgt = testing_util::random_volume(g, 9);
    const ControlGrid grid = build_grid(g, 5.0, 0);
    REQUIRE(grid.node_count() == 2 * 1 * 1);
    const auto labels = build_label_set(1.0, 3);
    UnaryTableOptions o;
    o.half_extent = {1, 1, 1};
    o.mi_bins = 8;
    o.normalize = false;
    const UnaryFeatureTable raw = build_unary_table(src, tgt, grid, labels, o);
    o.normalize = true;
    const UnaryFeatureTable norm = build_unary_table(src, tgt, grid, labels, o);

    for (std::size_t i = 0; i < 2; ++i) {
        const Index3 centre = g.nearest_voxel(grid.position(int(i)));
        std::vector<float> tv;
        for (int z = -1; z <= 1; ++z)
            for (int y = -1; y <= 1; ++y)
                for (int x = -1; x <= 1; ++x)
                    tv.push_back(tgt.at(std::clamp(centre.x + x, 0, 5), std::clamp(centre.y + y, 0, 0),
                                        std::clamp(centre.z + z, 0, 0)));
        const Patch tp = make_patch({1, 1, 1}, tv);
        double lo[4], hi[4];
        for (int m = 0; m < 4; ++m) {
            lo[m] = 1e300;
            hi[m] = -1e300;
        }
        for (std::size_t l = 0; l < labels.size(); ++l) {
            const Vec3 d = labels.vectors[l];
            std::vector<float> sv;
            for (int z = -1; z <= 1; ++z)
                for (int y = -1; y <= 1; ++y)
                    for (int x = -1; x <= 1; ++x)
                        sv.push_back(float(sample_trilinear(src, {centre.x + x + d.x, centre.y + y + d.y, centre.z + z + d.z})));
            const Patch sp = make_patch({1, 1, 1}, sv);
            const double expect[4] = {sad(sp, tp), mi_dissim(sp, tp, 8), ncc_dissim(sp, tp), dwt_dissim(sp, tp)};
            for (int m = 0; m < 4; ++m) {
                CHECK(raw.at(i, l, m) == doctest::Approx(expect[m]).epsilon(1e-9));
                lo[m] = std::min(lo[m], expect[m]);
                hi[m] = std::max(hi[m], expect[m]);
            }
        }
        for (std::size_t l = 0; l < labels.size(); ++l)
            for (int m = 0; m < 4; ++m) {
                const double e = hi[m] - lo[m] > 1e-12 ? (raw.at(i, l, m) - lo[m]) / (hi[m] - lo[m]) : 0.0;
                CHECK(norm.at(i, l, m) == doctest::Approx(e).epsilon(1e-9));
            }
    }
}

TEST_CASE("identical images make the zero label optimal for every metric")
{
    const Geometry g = geom(16, 16, 16, 1.0);
    const Volume v = testing_util::blob_volume(g, 10);
    const ControlGrid grid = build_grid(g, 5.0, 0);
    const auto labels = build_label_set(2.0, 5);
    UnaryTableOptions o;
    o.half_extent = patch_half_extent_for(g, 5.0);
    CHECK(o.half_extent == Index3{2, 2, 2});
    const UnaryFeatureTable t = build_unary_table(v, v, grid, labels, o);
    for (std::size_t i = 0; i < t.nodes(); ++i)
        for (int m = 0; m < 4; ++m)
            for (std::size_t l = 0; l < t.labels(); ++l)
                CHECK(t.at(i, std::size_t(labels.zero_label), m) <= t.at(i, l, m) + 1e-12);
}
