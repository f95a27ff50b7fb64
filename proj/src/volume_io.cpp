#include "mwreg/volume_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace mwreg {

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw FormatError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw FormatError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

ojson header_for(std::string_view kind, const Geometry& g, std::string_view dtype)
{
    ojson h;
    h["magic"] = kVvolMagic;
    h["kind"] = kind;
    h["dims"] = {g.dims.x, g.dims.y, g.dims.z};
    h["spacing"] = {g.spacing.x, g.spacing.y, g.spacing.z};
    h["origin"] = {g.origin.x, g.origin.y, g.origin.z};
    h["dtype"] = dtype;
    return h;
}

template <typename T>
void write_native(const fs::path& path, std::string_view kind, const Geometry& g, std::string_view dtype,
                  const std::vector<T>& payload)
{
    std::string bytes = header_for(kind, g, dtype).dump();
    bytes.push_back('\n');
    const std::size_t head = bytes.size();
    bytes.resize(head + payload.size() * sizeof(T));
    if (!payload.empty())
        std::memcpy(bytes.data() + head, payload.data(), payload.size() * sizeof(T));
    write_file_atomic(path, bytes);
}

struct ParsedNative {
    std::string kind;
    Geometry geometry;
    std::string dtype;
    std::string_view payload;
};

Vec3 vec3_field(const ojson& h, const char* key)
{
    const auto& a = h.at(key);
    if (!a.is_array() || a.size() != 3)
        throw FormatError(std::string("header field '") + key + "' must be a 3-element array");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

ParsedNative parse_native(const std::string& bytes)
{
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos)
        throw FormatError("malformed header: missing newline terminator");
    ojson h;
    try {
        h = ojson::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed header: ") + e.what());
    }
    ParsedNative p;
    try {
        if (h.at("magic").get<std::string>() != kVvolMagic)
            throw FormatError("malformed header: bad magic");
        p.kind = h.at("kind").get<std::string>();
        p.dtype = h.at("dtype").get<std::string>();
        const auto& d = h.at("dims");
        if (!d.is_array() || d.size() != 3)
            throw FormatError("malformed header: dims must have 3 entries");
        for (int a = 0; a < 3; ++a) {
            const auto n = d[a].get<long long>();
            if (n < 1 || n > (1 << 20))
                throw FormatError("malformed header: dims out of range");
            p.geometry.dims[a] = static_cast<int>(n);
        }
        p.geometry.spacing = vec3_field(h, "spacing");
        p.geometry.origin = vec3_field(h, "origin");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed header: ") + e.what());
    }
    try {
        p.geometry.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("malformed header: ") + e.what());
    }
    p.payload = std::string_view(bytes).substr(nl + 1);
    return p;
}

template <typename T>
std::vector<T> decode_payload(const ParsedNative& p, std::size_t count)
{
    if (p.payload.size() != count * sizeof(T))
        throw FormatError("payload size mismatch: expected " + std::to_string(count * sizeof(T)) + " bytes, got " +
                          std::to_string(p.payload.size()));
    std::vector<T> out(count);
    if (count)
        std::memcpy(out.data(), p.payload.data(), count * sizeof(T));
    return out;
}

void require_finite(const std::vector<float>& values)
{
    for (float v : values) {
        if (!std::isfinite(v))
            throw FormatError("non-finite value in payload");
    }
}

} // namespace

void save_native(const fs::path& path, const Volume& v)
{
    write_native(path, "volume", v.geometry(), "float32", v.data());
}

void save_native(const fs::path& path, const SegMask& m)
{
    write_native(path, "mask", m.geometry(), "uint8", m.data());
}

void save_native(const fs::path& path, const DenseField& f)
{
    write_native(path, "field", f.geometry(), "float32", f.interleaved());
}

NativeObject load_native(const fs::path& path)
{
    const std::string bytes = read_file(path);
    const ParsedNative p = parse_native(bytes);
    const std::size_t n = p.geometry.voxel_count();
    if (p.kind == "volume") {
        if (p.dtype != "float32")
            throw FormatError("malformed header: volume dtype must be float32");
        auto values = decode_payload<float>(p, n);
        require_finite(values);
        return Volume(p.geometry, std::move(values));
    }
    if (p.kind == "mask") {
        if (p.dtype != "uint8")
            throw FormatError("malformed header: mask dtype must be uint8");
        return SegMask(p.geometry, decode_payload<std::uint8_t>(p, n));
    }
    if (p.kind == "field") {
        if (p.dtype != "float32")
            throw FormatError("malformed header: field dtype must be float32");
        auto values = decode_payload<float>(p, 3 * n);
        require_finite(values);
        return DenseField(p.geometry, std::move(values));
    }
    throw FormatError("malformed header: unknown kind '" + p.kind + "'");
}

namespace {

template <typename T>
T load_kind(const fs::path& path, const char* what)
{
    NativeObject obj = load_native(path);
    if (auto* v = std::get_if<T>(&obj))
        return std::move(*v);
    throw FormatError(path.string() + " does not contain a " + what);
}

} // namespace

Volume load_volume(const fs::path& path) { return load_kind<Volume>(path, "volume"); }
SegMask load_mask(const fs::path& path) { return load_kind<SegMask>(path, "mask"); }
DenseField load_field(const fs::path& path) { return load_kind<DenseField>(path, "field"); }

// ---------------------------------------------------------------------------
// NIfTI-1

namespace {

constexpr std::size_t kNiftiHeaderSize = 348;

template <typename T>
T read_le(const std::string& b, std::size_t off)
{
    T v;
    std::memcpy(&v, b.data() + off, sizeof(T));
    return v;
}

template <typename T>
void write_le(std::string& b, std::size_t off, T v)
{
    std::memcpy(b.data() + off, &v, sizeof(T));
}

struct NiftiRaw {
    Geometry geometry;
    short datatype = 0;
    float slope = 0.0f;
    float inter = 0.0f;
    std::string_view payload;
};

NiftiRaw parse_nifti(const std::string& bytes)
{
    if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f && static_cast<unsigned char>(bytes[1]) == 0x8b)
        throw FormatError("unsupported NIfTI feature: gzip compression");
    if (bytes.size() < kNiftiHeaderSize)
        throw FormatError("malformed NIfTI: file shorter than header");
    const int sizeof_hdr = read_le<int>(bytes, 0);
    if (sizeof_hdr != 348) {
        if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == 348u)
            throw FormatError("unsupported NIfTI feature: big-endian byte order");
        throw FormatError("malformed NIfTI: sizeof_hdr != 348");
    }
    if (std::memcmp(bytes.data() + 344, "n+1", 4) != 0) {
        if (std::memcmp(bytes.data() + 344, "ni1", 4) == 0)
            throw FormatError("unsupported NIfTI feature: detached header/image pair");
        throw FormatError("malformed NIfTI: bad magic");
    }

    NiftiRaw r;
    const short ndim = read_le<short>(bytes, 40);
    if (ndim < 1 || ndim > 7)
        throw FormatError("malformed NIfTI: dim[0] out of range");
    for (int a = 0; a < 3; ++a) {
        const short n = a < ndim ? read_le<short>(bytes, 42 + 2 * a) : short{1};
        if (n < 1)
            throw FormatError("malformed NIfTI: non-positive dimension");
        r.geometry.dims[a] = n;
    }
    for (int a = 3; a < ndim; ++a) {
        if (read_le<short>(bytes, 42 + 2 * a) > 1)
            throw FormatError("unsupported NIfTI feature: more than 3 non-trivial dimensions");
    }
    r.datatype = read_le<short>(bytes, 70);
    for (int a = 0; a < 3; ++a) {
        const float s = read_le<float>(bytes, 80 + 4 * a);
        if (!(s > 0.0f) || !std::isfinite(s))
            throw FormatError("malformed NIfTI: pixdim must be positive");
        r.geometry.spacing[a] = s;
        r.geometry.origin[a] = read_le<float>(bytes, 268 + 4 * a);
    }
    r.slope = read_le<float>(bytes, 112);
    r.inter = read_le<float>(bytes, 116);

    const float vox_offset = read_le<float>(bytes, 108);
    std::size_t offset = vox_offset >= static_cast<float>(kNiftiHeaderSize) ? static_cast<std::size_t>(vox_offset)
                                                                           : kNiftiHeaderSize;
    if (offset > bytes.size())
        throw FormatError("payload size mismatch: vox_offset beyond end of file");
    r.payload = std::string_view(bytes).substr(offset);
    return r;
}

std::size_t nifti_bytes_per_voxel(short datatype)
{
    switch (datatype) {
    case 2: return 1;
    case 4: return 2;
    case 16: return 4;
    default:
        throw FormatError("unsupported NIfTI feature: datatype code " + std::to_string(datatype));
    }
}

std::vector<float> nifti_values(const NiftiRaw& r)
{
    const std::size_t n = r.geometry.voxel_count();
    const std::size_t bpv = nifti_bytes_per_voxel(r.datatype);
    if (r.payload.size() < n * bpv)
        throw FormatError("payload size mismatch: NIfTI image data truncated");
    std::vector<float> out(n);
    const char* p = r.payload.data();
    for (std::size_t i = 0; i < n; ++i) {
        switch (r.datatype) {
        case 2: out[i] = static_cast<unsigned char>(p[i]); break;
        case 4: {
            std::int16_t v;
            std::memcpy(&v, p + 2 * i, 2);
            out[i] = v;
            break;
        }
        default: std::memcpy(&out[i], p + 4 * i, 4); break;
        }
    }
    if (r.slope != 0.0f && std::isfinite(r.slope) && !(r.slope == 1.0f && r.inter == 0.0f)) {
        for (float& v : out)
            v = v * r.slope + r.inter;
    }
    require_finite(out);
    return out;
}

std::string nifti_header(const Geometry& g, short datatype, short bitpix)
{
    std::string b(352, '\0');
    write_le<int>(b, 0, 348);
    write_le<short>(b, 40, 3);
    write_le<short>(b, 42, static_cast<short>(g.dims.x));
    write_le<short>(b, 44, static_cast<short>(g.dims.y));
    write_le<short>(b, 46, static_cast<short>(g.dims.z));
    for (int a = 4; a < 8; ++a)
        write_le<short>(b, 40 + 2 * a, 1);
    write_le<short>(b, 70, datatype);
    write_le<short>(b, 72, bitpix);
    write_le<float>(b, 76, 1.0f);
    write_le<float>(b, 80, static_cast<float>(g.spacing.x));
    write_le<float>(b, 84, static_cast<float>(g.spacing.y));
    write_le<float>(b, 88, static_cast<float>(g.spacing.z));
    write_le<float>(b, 108, 352.0f);
    write_le<float>(b, 112, 1.0f);
    write_le<char>(b, 123, 2); // xyzt_units: mm
    write_le<short>(b, 252, 1);
    write_le<float>(b, 268, static_cast<float>(g.origin.x));
    write_le<float>(b, 272, static_cast<float>(g.origin.y));
    write_le<float>(b, 276, static_cast<float>(g.origin.z));
    std::memcpy(b.data() + 344, "n+1", 4);
    return b;
}

void check_nifti_dims(const Geometry& g)
{
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] > std::numeric_limits<short>::max())
            throw FormatError("dimension too large for NIfTI-1");
    }
}

} // namespace

std::variant<Volume, SegMask> import_nifti(const fs::path& path)
{
    const std::string bytes = read_file(path);
    const NiftiRaw r = parse_nifti(bytes);
    if (r.datatype == 2) {
        const std::size_t n = r.geometry.voxel_count();
        if (r.payload.size() < n)
            throw FormatError("payload size mismatch: NIfTI image data truncated");
        std::vector<std::uint8_t> labels(n);
        std::memcpy(labels.data(), r.payload.data(), n);
        return SegMask(r.geometry, std::move(labels));
    }
    return Volume(r.geometry, nifti_values(r));
}

Volume import_nifti_volume(const fs::path& path)
{
    const std::string bytes = read_file(path);
    const NiftiRaw r = parse_nifti(bytes);
    return Volume(r.geometry, nifti_values(r));
}

SegMask import_nifti_mask(const fs::path& path)
{
    auto obj = import_nifti(path);
    if (auto* m = std::get_if<SegMask>(&obj))
        return std::move(*m);
    throw FormatError("NIfTI mask import requires datatype uint8 (2)");
}

void export_nifti(const fs::path& path, const Volume& v)
{
    check_nifti_dims(v.geometry());
    std::string b = nifti_header(v.geometry(), 16, 32);
    const std::size_t head = b.size();
    b.resize(head + 4 * v.size());
    std::memcpy(b.data() + head, v.data().data(), 4 * v.size());
    write_file_atomic(path, b);
}

void export_nifti(const fs::path& path, const SegMask& m)
{
    check_nifti_dims(m.geometry());
    std::string b = nifti_header(m.geometry(), 2, 8);
    const std::size_t head = b.size();
    b.resize(head + m.size());
    std::memcpy(b.data() + head, m.data().data(), m.size());
    write_file_atomic(path, b);
}

// ---------------------------------------------------------------------------
// Pyramid support

Geometry downsample_geometry(const Geometry& g, int factor)
{
    if (factor < 1)
        throw std::invalid_argument("downsample factor must be >= 1");
    Geometry out = g;
    for (int a = 0; a < 3; ++a) {
        out.dims[a] = (g.dims[a] + factor - 1) / factor;
        out.spacing[a] = g.spacing[a] * factor;
        out.origin[a] = g.origin[a] + 0.5 * (factor - 1) * g.spacing[a];
    }
    return out;
}

Volume downsample(const Volume& v, int factor)
{
    if (factor == 1)
        return v;
    const Geometry og = downsample_geometry(v.geometry(), factor);
    const Index3 in = v.dims();
    Volume out(og);
    for (int z = 0; z < og.dims.z; ++z)
        for (int y = 0; y < og.dims.y; ++y)
            for (int x = 0; x < og.dims.x; ++x) {
                double sum = 0.0;
                int count = 0;
                for (int k = z * factor; k < std::min((z + 1) * factor, in.z); ++k)
                    for (int j = y * factor; j < std::min((y + 1) * factor, in.y); ++j)
                        for (int i = x * factor; i < std::min((x + 1) * factor, in.x); ++i) {
                            sum += v.at(i, j, k);
                            ++count;
                        }
                out.at(x, y, z) = static_cast<float>(sum / count);
            }
    return out;
}

SegMask downsample(const SegMask& m, int factor)
{
    if (factor == 1)
        return m;
    const Geometry og = downsample_geometry(m.geometry(), factor);
    const Index3 in = m.dims();
    SegMask out(og);
    std::array<int, 256> counts{};
    for (int z = 0; z < og.dims.z; ++z)
        for (int y = 0; y < og.dims.y; ++y)
            for (int x = 0; x < og.dims.x; ++x) {
                counts.fill(0);
                for (int k = z * factor; k < std::min((z + 1) * factor, in.z); ++k)
                    for (int j = y * factor; j < std::min((y + 1) * factor, in.y); ++j)
                        for (int i = x * factor; i < std::min((x + 1) * factor, in.x); ++i)
                            ++counts[m.at(i, j, k)];
                int best = 0;
                for (int c = 1; c < 256; ++c) {
                    if (counts[c] > counts[best])
                        best = c;
                }
                out.at(x, y, z) = static_cast<std::uint8_t>(best);
            }
    return out;
}

Volume normalize_minmax(const Volume& v)
{
    Volume out = v;
    if (v.size() == 0)
        return out;
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    const double mn = *lo;
    const double range = static_cast<double>(*hi) - mn;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = range > 0.0 ? static_cast<float>((v[i] - mn) / range) : 0.0f;
    return out;
}

} // namespace mwreg
