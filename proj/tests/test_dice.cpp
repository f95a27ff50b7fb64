#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <random>

#include "mwreg/dice.hpp"

using namespace mwreg;
using testing_util::geom;

namespace {

struct Toy {
    SegMask source, target;
    ControlGrid grid;
    DisplacementLabelSet labels;
};

SegMask box_mask(const Geometry& g, Index3 lo, Index3 hi, ClassId c)
{
    SegMask m(g);
    for (int z = lo.z; z <= hi.z; ++z)
        for (int y = lo.y; y <= hi.y; ++y)
            for (int x = lo.x; x <= hi.x; ++x)
                m.at(x, y, z) = c;
    return m;
}

// Voxel-level shift with the same owner rule, written independently.
SegMask shift_oracle(const Toy& t, const Labeling& d)
{
    const Geometry& g = t.target.geometry();
    SegMask out(g);
    for (int z = 0; z < g.dims.z; ++z)
        for (int y = 0; y < g.dims.y; ++y)
            for (int x = 0; x < g.dims.x; ++x) {
                const Vec3 p = g.to_mm({x, y, z});
                Index3 n;
                for (int a = 0; a < 3; ++a)
                    n[a] = std::clamp(int(std::floor((p[a] - t.grid.origin[a]) / t.grid.spacing_mm + 0.5)), 0,
                                      t.grid.dims[a] - 1);
                const Vec3 q = p + t.labels.vectors[d[t.grid.index(n)]];
                const Index3 s = t.source.geometry().nearest_voxel(q);
                out.at(x, y, z) = t.source.at(s.x, s.y, s.z);
            }
    return out;
}

std::size_t mismatch(const SegMask& a, const SegMask& b, ClassId c)
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        n += (a[i] == c) != (b[i] == c);
    return n;
}

// Largest mismatch any labeling can produce: each node picks its worst label
// independently, so brute force over single-node deviations suffices.
double denominator_oracle(const Toy& t, ClassId c)
{
    std::size_t base = 0;
    for (std::size_t i = 0; i < t.source.size(); ++i)
        base += (t.source[i] == c) + (t.target[i] == c);
    if (base == 0)
        return 0.0;
    const Labeling zero = zero_labeling(t.grid, t.labels);
    const double at_zero = double(mismatch(shift_oracle(t, zero), t.target, c));
    double worst = at_zero;
    for (std::size_t i = 0; i < t.grid.node_count(); ++i) {
        double best_gain = 0.0;
        for (std::size_t l = 0; l < t.labels.size(); ++l) {
            Labeling d = zero;
            d[i] = int(l);
            best_gain = std::max(best_gain, double(mismatch(shift_oracle(t, d), t.target, c)) - at_zero);
        }
        worst += best_gain;
    }
    return std::max(double(base), worst);
}

Toy random_toy(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pos(0, 7);
    const Geometry g = geom(10, 9, 8, 1.0);
    Toy t;
    t.source = SegMask(g);
    t.target = SegMask(g);
    for (int k = 0; k < 3; ++k) {
        const Index3 a{pos(rng), pos(rng), pos(rng)}, b{pos(rng), pos(rng), pos(rng)};
        const auto c = static_cast<ClassId>(1 + k % 2);
        for (int z = a.z; z <= std::min(a.z + 2, 7); ++z)
            for (int y = a.y; y <= std::min(a.y + 3, 8); ++y)
                for (int x = a.x; x <= std::min(a.x + 2, 9); ++x)
                    t.source.at(x, y, z) = c;
        for (int z = b.z; z <= std::min(b.z + 3, 7); ++z)
            for (int y = b.y; y <= std::min(b.y + 2, 8); ++y)
                for (int x = b.x; x <= std::min(b.x + 4, 9); ++x)
                    t.target.at(x, y, z) = c;
    }
    t.grid = build_grid(g, 4.0, 0);
    t.labels = build_label_set(2.0, 3);
    return t;
}

Labeling random_labeling(const Toy& t, std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> u(0, int(t.labels.size()) - 1);
    Labeling d(t.grid.node_count());
    for (int& x : d)
        x = u(rng);
    return d;
}

} // namespace

TEST_CASE("exact dice")
{
    const Geometry g = geom(6, 6, 6);
    const SegMask a = box_mask(g, {0, 0, 0}, {3, 3, 3}, 1);
    const SegMask b = box_mask(g, {2, 0, 0}, {5, 3, 3}, 1);
    CHECK(exact_dice(a, b, 1) == doctest::Approx(2.0 * 32 / 128));
    CHECK(exact_dice(a, a, 1) == 1.0);
    CHECK(exact_dice(a, b, 2) == 1.0);
    CHECK_THROWS_AS(exact_dice(a, SegMask(geom(6, 6, 5)), 1), std::invalid_argument);
}

TEST_CASE("surrogate matches a voxel-level oracle")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const Toy t = random_toy(100 + trial);
        for (ClassId c : {ClassId(1), ClassId(2)}) {
            const double denom = denominator_oracle(t, c);
            CHECK(loss_denominator(t.source, t.target, t.grid, t.labels, c) == doctest::Approx(denom));
            for (int k = 0; k < 5; ++k) {
                const Labeling d = random_labeling(t, rng);
                const SegMask shifted = shift_oracle(t, d);
                CHECK(patchwise_shift(t.source, t.target.geometry(), t.grid, d, t.labels) == shifted);
                const double expect = denom == 0 ? 0.0 : double(mismatch(shifted, t.target, c)) / denom;
                CHECK(surrogate_loss(t.source, t.target, t.grid, d, t.labels, c) == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("zero labeling recovers one minus the dice of the undeformed masks")
{
    for (int trial = 0; trial < 5; ++trial) {
        const Toy t = random_toy(200 + trial);
        const Labeling z = zero_labeling(t.grid, t.labels);
        const LossTable table = build_loss_table(t.source, t.target, t.grid, t.labels, 1);
        const double denom = loss_denominator(t.source, t.target, t.grid, t.labels, 1);
        std::size_t base = 0;
        for (std::size_t i = 0; i < t.source.size(); ++i)
            base += (t.source[i] == 1) + (t.target[i] == 1);
        const double s = surrogate_loss(t.source, t.target, t.grid, z, t.labels, 1);
        CHECK(s * denom / double(base) == doctest::Approx(1.0 - exact_dice(t.source, t.target, 1)).epsilon(1e-12));
        CHECK(table.evaluate(z) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("loss table evaluation equals the surrogate and stays in [0,1]")
{
    std::mt19937_64 rng(12);
    const Toy t = random_toy(300);
    const LossTable table = build_loss_table(t.source, t.target, t.grid, t.labels, 2);
    CHECK(table.nodes == t.grid.node_count());
    for (double v : table.values)
        CHECK(v >= 0.0);
    double offs = 0.0;
    for (double o : table.node_offsets)
        offs += o;
    CHECK(table.offset == doctest::Approx(offs));
    for (int k = 0; k < 100; ++k) {
        const Labeling d = random_labeling(t, rng);
        const double s = surrogate_loss(t.source, t.target, t.grid, d, t.labels, 2);
        CHECK(std::abs(table.evaluate(d) - s) <= 1e-9);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("surrogate stays non-negative when the target structure is larger")
{
    const Geometry g = geom(12, 12, 12);
    Toy t;
    t.source = box_mask(g, {4, 4, 4}, {6, 6, 6}, 1);
    t.target = box_mask(g, {2, 2, 2}, {9, 9, 9}, 1);
    t.grid = build_grid(g, 3.0, 0);
    t.labels = build_label_set(3.0, 5);
    const LossTable table = build_loss_table(t.source, t.target, t.grid, t.labels, 1);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
        const Labeling d = random_labeling(t, rng);
        const double s = table.evaluate(d);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("surrogate is zero exactly when the shifted dice is one")
{
    const Geometry g = geom(12, 10, 8);
    Toy t;
    t.source = box_mask(g, {3, 2, 2}, {6, 5, 4}, 1);
    t.target = box_mask(g, {5, 2, 2}, {8, 5, 4}, 1);
    t.grid = build_grid(g, 4.0, 0);
    t.labels = build_label_set(2.0, 3);
    // Label (-2, 0, 0) undoes the translation everywhere.
    int back = -1;
    for (std::size_t l = 0; l < t.labels.size(); ++l) {
        const Vec3 v = t.labels.vectors[l];
        if (v.x == -2.0 && v.y == 0.0 && v.z == 0.0)
            back = int(l);
    }
    REQUIRE(back >= 0);
    const Labeling d(t.grid.node_count(), back);
    CHECK(surrogate_loss(t.source, t.target, t.grid, d, t.labels, 1) == 0.0);
    CHECK(exact_dice(patchwise_shift(t.source, g, t.grid, d, t.labels), t.target, 1) == 1.0);
    const Labeling z = zero_labeling(t.grid, t.labels);
    CHECK(surrogate_loss(t.source, t.target, t.grid, z, t.labels, 1) > 0.0);

    std::mt19937_64 rng(4);
    for (int k = 0; k < 200; ++k) {
        Labeling r = d;
        std::uniform_int_distribution<std::size_t> node(0, r.size() - 1);
        r[node(rng)] = random_labeling(t, rng)[0];
        const double s = surrogate_loss(t.source, t.target, t.grid, r, t.labels, 1);
        const double dice = exact_dice(patchwise_shift(t.source, g, t.grid, r, t.labels), t.target, 1);
        CHECK((s == 0.0) == (dice == 1.0));
    }
}
