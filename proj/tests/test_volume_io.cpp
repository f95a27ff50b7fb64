#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "mwreg/phantom.hpp"
#include "mwreg/volume_io.hpp"

using namespace mwreg;
using testing_util::geom;
using testing_util::TempDir;

namespace {

std::string vvol_bytes(const std::string& header, std::size_t payload_bytes)
{
    return header + "\n" + std::string(payload_bytes, '\0');
}

// Hand-rolled NIfTI-1 writer, independent of the library's exporter.
std::string nifti_file(int nx, int ny, int nz, short datatype, short bitpix, const std::string& payload,
                       float slope = 0.0f, float inter = 0.0f)
{
    std::string h(352, '\0');
    auto put = [&](std::size_t off, const void* v, std::size_t n) { std::memcpy(h.data() + off, v, n); };
    const int sizeof_hdr = 348;
    put(0, &sizeof_hdr, 4);
    const short dim[8] = {3, short(nx), short(ny), short(nz), 1, 1, 1, 1};
    put(40, dim, sizeof dim);
    put(70, &datatype, 2);
    put(72, &bitpix, 2);
    const float pixdim[8] = {1.0f, 2.0f, 2.0f, 2.0f, 1, 1, 1, 1};
    put(76, pixdim, sizeof pixdim);
    const float vox_offset = 352.0f;
    put(108, &vox_offset, 4);
    put(112, &slope, 4);
    put(116, &inter, 4);
    put(344, "n+1\0", 4);
    return h + payload;
}

} // namespace

TEST_CASE("vvol with a zero payload loads as a zero volume")
{
    TempDir dir("vvol");
    const std::string hdr = R"({"magic":"VVOL1","kind":"volume","dims":[2,2,2],"spacing":[1,1,1],"origin":[0,0,0],"dtype":"float32"})";
    write_file_atomic(dir / "z.vvol", vvol_bytes(hdr, 8 * 4));
    const Volume v = load_volume(dir / "z.vvol");
    CHECK(v.size() == 8);
    for (float x : v.data())
        CHECK(x == 0.0f);

    write_file_atomic(dir / "short.vvol", vvol_bytes(hdr, 7 * 4));
    try {
        load_volume(dir / "short.vvol");
        FAIL("expected an error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("payload size mismatch") != std::string::npos);
    }
}

TEST_CASE("vvol round trips are bit exact")
{
    TempDir dir("vvol");
    Geometry g{{16, 16, 16}, {0.7, 1.3, 2.0}, {-3.25, 4.0, 1e-3}};
    const Volume v = testing_util::random_volume(g, 11);
    save_native(dir / "v.vvol", v);
    const Volume back = load_volume(dir / "v.vvol");
    CHECK(back.geometry() == v.geometry());
    CHECK(std::memcmp(back.data().data(), v.data().data(), 4 * v.size()) == 0);

    const SegMask m = testing_util::random_mask(g, 5, 12);
    save_native(dir / "m.vvol", m);
    CHECK(load_mask(dir / "m.vvol") == m);

    DenseField f(g);
    for (std::size_t i = 0; i < f.voxel_count(); ++i)
        f.set(i, {std::sin(double(i)), 1.0 / (1.0 + i), -0.1 * double(i % 7)});
    save_native(dir / "f.vvol", f);
    CHECK(load_field(dir / "f.vvol") == f);

    // Saving what was loaded reproduces the same file.
    save_native(dir / "v2.vvol", back);
    CHECK(read_file(dir / "v.vvol") == read_file(dir / "v2.vvol"));
}

TEST_CASE("vvol rejects bad headers, kinds and non-finite values")
{
    TempDir dir("vvol");
    write_file_atomic(dir / "bad.vvol", vvol_bytes(R"({"magic":"NOPE","kind":"volume","dims":[1,1,1],"spacing":[1,1,1],"origin":[0,0,0],"dtype":"float32"})", 4));
    CHECK_THROWS_AS(load_volume(dir / "bad.vvol"), FormatError);

    Volume v(geom(2, 1, 1));
    v[1] = std::numeric_limits<float>::quiet_NaN();
    save_native(dir / "nan.vvol", v);
    CHECK_THROWS_AS(load_volume(dir / "nan.vvol"), FormatError);

    save_native(dir / "mask.vvol", SegMask(geom(2, 2, 2)));
    CHECK_THROWS_AS(load_volume(dir / "mask.vvol"), FormatError);
    CHECK(std::holds_alternative<SegMask>(load_native(dir / "mask.vvol")));
}

TEST_CASE("minimal NIfTI with one float voxel")
{
    TempDir dir("nii");
    const float one = 3.5f;
    write_file_atomic(dir / "one.nii", nifti_file(1, 1, 1, 16, 32, std::string(reinterpret_cast<const char*>(&one), 4)));
    const auto obj = import_nifti(dir / "one.nii");
    REQUIRE(std::holds_alternative<Volume>(obj));
    const Volume& v = std::get<Volume>(obj);
    CHECK(v.dims() == Index3{1, 1, 1});
    CHECK(v[0] == 3.5f);
    CHECK(v.geometry().spacing.x == doctest::Approx(2.0));
}

TEST_CASE("NIfTI int16 applies the scale slope")
{
    TempDir dir("nii");
    const std::int16_t raw[2] = {10, -4};
    write_file_atomic(dir / "s.nii", nifti_file(2, 1, 1, 4, 16, std::string(reinterpret_cast<const char*>(raw), 4), 0.5f, 1.0f));
    const Volume v = import_nifti_volume(dir / "s.nii");
    CHECK(v[0] == doctest::Approx(6.0));
    CHECK(v[1] == doctest::Approx(-1.0));
}

TEST_CASE("NIfTI unsupported features are reported")
{
    TempDir dir("nii");
    write_file_atomic(dir / "d.nii", nifti_file(1, 1, 1, 64, 64, std::string(8, '\0')));
    try {
        import_nifti(dir / "d.nii");
        FAIL("expected an error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("unsupported NIfTI feature") != std::string::npos);
    }
    write_file_atomic(dir / "gz.nii", std::string("\x1f\x8b\x08\x00", 4) + std::string(400, '\0'));
    CHECK_THROWS_AS(import_nifti(dir / "gz.nii"), FormatError);
    write_file_atomic(dir / "trunc.nii", nifti_file(4, 4, 4, 16, 32, std::string(10, '\0')));
    CHECK_THROWS_AS(import_nifti(dir / "trunc.nii"), FormatError);
}

TEST_CASE("phantom mask exported as NIfTI imports identically")
{
    TempDir dir("nii");
    PhantomSpec spec;
    spec.geometry = Geometry{{8, 8, 8}, {3.0, 3.0, 3.0}, {1.0, 2.0, 3.0}};
    spec.classes = {{0, "bg", IntensityTransform::Linear, 0.2}, {1, "a", IntensityTransform::Linear, 0.8}};
    spec.structures = {{1, {10.0, 12.0, 13.0}, {7.0, 5.0, 6.0}}};
    spec.deformation_mm = 2.0;
    const PhantomSample ps = generate(spec);
    export_nifti(dir / "seg.nii", ps.sample.source_mask);
    export_nifti(dir / "img.nii", ps.sample.source);
    const SegMask m = import_nifti_mask(dir / "seg.nii");
    CHECK(m.data() == ps.sample.source_mask.data());
    CHECK(m.geometry() == ps.sample.source_mask.geometry());
    const Volume v = import_nifti_volume(dir / "img.nii");
    CHECK(v.data() == ps.sample.source.data());
}

TEST_CASE("downsample identity and arithmetic mean")
{
    const Volume v = testing_util::random_volume(geom(5, 4, 3), 3);
    CHECK(downsample(v, 1) == v);

    Volume c(geom(2, 2, 2));
    for (std::size_t i = 0; i < 8; ++i)
        c[i] = static_cast<float>(i);
    const Volume d = downsample(c, 2);
    CHECK(d.size() == 1);
    CHECK(d[0] == doctest::Approx(3.5));
}

TEST_CASE("downsample matches a scalar block-mean oracle on odd sizes")
{
    const Volume v = testing_util::random_volume(geom(9, 9, 9), 4);
    const Volume d = downsample(v, 2);
    CHECK(d.dims() == Index3{5, 5, 5});
    float lo = 1e9f, hi = -1e9f;
    for (float x : v.data()) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    for (int z = 0; z < 5; ++z)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x) {
                double s = 0;
                int n = 0;
                for (int k = 2 * z; k <= std::min(2 * z + 1, 8); ++k)
                    for (int j = 2 * y; j <= std::min(2 * y + 1, 8); ++j)
                        for (int i = 2 * x; i <= std::min(2 * x + 1, 8); ++i) {
                            s += v.at(i, j, k);
                            ++n;
                        }
                CHECK(d.at(x, y, z) == doctest::Approx(s / n).epsilon(1e-6));
                CHECK(d.at(x, y, z) >= lo);
                CHECK(d.at(x, y, z) <= hi);
            }
    CHECK(d.geometry().spacing.x == doctest::Approx(2.0));
    CHECK(d.geometry().origin.x == doctest::Approx(0.5));
}

TEST_CASE("mask downsampling votes within each block")
{
    const SegMask m = testing_util::random_mask(geom(7, 6, 5), 4, 9);
    const SegMask d = downsample(m, 2);
    for (int z = 0; z < d.dims().z; ++z)
        for (int y = 0; y < d.dims().y; ++y)
            for (int x = 0; x < d.dims().x; ++x) {
                int counts[4] = {};
                for (int k = 2 * z; k < std::min(2 * z + 2, 5); ++k)
                    for (int j = 2 * y; j < std::min(2 * y + 2, 6); ++j)
                        for (int i = 2 * x; i < std::min(2 * x + 2, 7); ++i)
                            ++counts[m.at(i, j, k)];
                const int got = d.at(x, y, z);
                CHECK(counts[got] > 0);
                for (int c = 0; c < 4; ++c)
                    CHECK((counts[c] < counts[got] || (counts[c] == counts[got] && c >= got)));
            }
}

TEST_CASE("min-max normalisation")
{
    Volume v(geom(3, 1, 1));
    v[0] = 2.0f;
    v[1] = 4.0f;
    v[2] = 3.0f;
    const Volume n = normalize_minmax(v);
    CHECK(n[0] == 0.0f);
    CHECK(n[1] == 1.0f);
    CHECK(n[2] == doctest::Approx(0.5));
    Volume flat(geom(2, 2, 1), 7.0f);
    const Volume nf = normalize_minmax(flat);
    for (float x : nf.data())
        CHECK(x == 0.0f);
}
