#include "rgs/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rgs {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

template <typename T>
void append_le(std::string& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffU));
}

template <typename T>
T load_le(const char* p) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
        bits |= static_cast<U>(static_cast<unsigned char>(p[b])) << (8 * b);
    return std::bit_cast<T>(bits);
}

void write_bytes(const fs::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing " + path.string());
}

std::string read_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct Framed {
    json header;
    std::string_view payload;
};

// Splits header line and payload; `bytes` must outlive the result.
Framed split_frame(const std::string& bytes, const fs::path& path, const char* format) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw InputError(path.string() + ": missing header line");
    Framed f;
    try {
        f.header = json::parse(bytes.substr(0, nl));
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": malformed header: " + e.what());
    }
    if (!f.header.is_object() || f.header.value("format", "") != format)
        throw InputError(path.string() + ": not a " + format + " file");
    if (f.header.value("version", 0) != kFormatVersion)
        throw InputError(path.string() + ": unsupported format version");
    f.payload = std::string_view(bytes).substr(nl + 1);
    return f;
}

std::string frame(const json& header) { return header.dump() + '\n'; }

template <typename T>
T field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw InputError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError(where + ": field '" + key + "' has the wrong type");
    }
}

Vec3 vec3_field(const json& obj, const std::string& key, const std::string& where) {
    const auto v = field<std::vector<double>>(obj, key, where);
    if (v.size() != 3) throw InputError(where + ": field '" + key + "' must have 3 numbers");
    return Vec3(v[0], v[1], v[2]);
}

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

void check_payload(std::string_view payload, std::size_t expected, const fs::path& path) {
    if (payload.size() != expected)
        throw InputError(path.string() + ": payload has " + std::to_string(payload.size()) +
                         " bytes, header implies " + std::to_string(expected));
}

json geometry_json(const ConeBeamGeometry& g) {
    return json{{"format", "rgs-geometry"},
                {"version", kFormatVersion},
                {"sad", g.sad},
                {"sdd", g.sdd},
                {"detector_rows", g.detector_rows},
                {"detector_cols", g.detector_cols},
                {"pixel_pitch_u", g.pixel_pitch_u},
                {"pixel_pitch_v", g.pixel_pitch_v},
                {"detector_offset_u", g.detector_offset_u},
                {"detector_offset_v", g.detector_offset_v},
                {"angles", g.angles}};
}

ConeBeamGeometry geometry_from_json(const json& j, const std::string& where) {
    ConeBeamGeometry g;
    g.sad = field<double>(j, "sad", where);
    g.sdd = field<double>(j, "sdd", where);
    g.detector_rows = field<std::size_t>(j, "detector_rows", where);
    g.detector_cols = field<std::size_t>(j, "detector_cols", where);
    g.pixel_pitch_u = field<double>(j, "pixel_pitch_u", where);
    g.pixel_pitch_v = field<double>(j, "pixel_pitch_v", where);
    g.detector_offset_u = j.value("detector_offset_u", 0.0);
    g.detector_offset_v = j.value("detector_offset_v", 0.0);
    g.angles = field<std::vector<double>>(j, "angles", where);
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(where + ": " + e.what());
    }
    return g;
}

}  // namespace

void write_volume(const fs::path& path, const VoxelVolume& volume) {
    volume.grid.validate();
    const GridSpec& g = volume.grid;
    std::string bytes = frame(json{{"format", "rgs-volume"},
                                   {"version", kFormatVersion},
                                   {"dims", g.dims},
                                   {"spacing", vec_json(g.spacing)},
                                   {"origin", vec_json(g.origin)},
                                   {"dtype", "float32"},
                                   {"order", "x-fastest"}});
    bytes.reserve(bytes.size() + 4 * volume.values.size());
    for (double v : volume.values) append_le(bytes, static_cast<float>(v));
    write_bytes(path, bytes);
}

VoxelVolume read_volume(const fs::path& path) {
    const std::string bytes = read_bytes(path);
    const Framed f = split_frame(bytes, path, "rgs-volume");
    const std::string where = path.string();
    if (f.header.value("dtype", "") != "float32") throw InputError(where + ": dtype must be float32");
    GridSpec g;
    g.dims = field<std::array<std::size_t, 3>>(f.header, "dims", where);
    g.spacing = vec3_field(f.header, "spacing", where);
    g.origin = vec3_field(f.header, "origin", where);
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(where + ": " + e.what());
    }
    check_payload(f.payload, 4 * g.voxel_count(), path);
    VoxelVolume v(g);
    for (std::size_t i = 0; i < v.values.size(); ++i) v.values[i] = load_le<float>(f.payload.data() + 4 * i);
    return v;
}

fs::path geometry_sidecar(const fs::path& projections) {
    fs::path p = projections;
    p += ".geom.json";
    return p;
}

void write_geometry(const fs::path& path, const ConeBeamGeometry& geom) {
    geom.validate();
    write_bytes(path, geometry_json(geom).dump(2) + '\n');
}

ConeBeamGeometry read_geometry(const fs::path& path) {
    const std::string text = read_bytes(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return geometry_from_json(j, path.string());
}

void write_projections(const fs::path& path, const ProjectionStack& stack) {
    stack.validate_shape();
    const ConeBeamGeometry& g = stack.geometry;
    std::string bytes = frame(json{{"format", "rgs-projections"},
                                   {"version", kFormatVersion},
                                   {"views", g.views()},
                                   {"rows", g.detector_rows},
                                   {"cols", g.detector_cols},
                                   {"dtype", "float64"},
                                   {"geometry", geometry_sidecar(path).filename().string()}});
    bytes.reserve(bytes.size() + 8 * stack.pixel_count());
    for (const Image2D& img : stack.views)
        for (double v : img.data) append_le(bytes, v);
    write_bytes(path, bytes);
    write_geometry(geometry_sidecar(path), g);
}

ProjectionStack read_projections(const fs::path& path) {
    const std::string bytes = read_bytes(path);
    const Framed f = split_frame(bytes, path, "rgs-projections");
    const std::string where = path.string();
    if (f.header.value("dtype", "") != "float64") throw InputError(where + ": dtype must be float64");
    const auto views = field<std::size_t>(f.header, "views", where);
    const auto rows = field<std::size_t>(f.header, "rows", where);
    const auto cols = field<std::size_t>(f.header, "cols", where);
    const fs::path sidecar = path.parent_path() / field<std::string>(f.header, "geometry", where);
    ProjectionStack stack;
    stack.geometry = read_geometry(sidecar);
    if (stack.geometry.views() != views || stack.geometry.detector_rows != rows ||
        stack.geometry.detector_cols != cols)
        throw InputError(where + ": header disagrees with geometry sidecar " + sidecar.string());
    check_payload(f.payload, 8 * views * rows * cols, path);
    const char* p = f.payload.data();
    stack.views.reserve(views);
    for (std::size_t v = 0; v < views; ++v) {
        Image2D img(rows, cols);
        for (double& x : img.data) {
            x = load_le<double>(p);
            p += 8;
        }
        stack.views.push_back(std::move(img));
    }
    return stack;
}

void write_gaussians(const fs::path& path, const GaussianSet& set) {
    std::string bytes = frame(json{{"format", "rgs-gaussians"},
                                   {"version", kFormatVersion},
                                   {"tag", std::string(to_string(set.tag))},
                                   {"count", set.size()},
                                   {"dtype", "float64"},
                                   {"layout", "cx cy cz sx sy sz qw qx qy qz density"}});
    bytes.reserve(bytes.size() + 88 * set.size());
    for (const GaussianPrimitive& p : set.primitives) {
        for (int a = 0; a < 3; ++a) append_le(bytes, p.center[a]);
        for (int a = 0; a < 3; ++a) append_le(bytes, p.scales[a]);
        for (int a = 0; a < 4; ++a) append_le(bytes, p.rotation[a]);
        append_le(bytes, p.density);
    }
    write_bytes(path, bytes);
}

GaussianSet read_gaussians(const fs::path& path) {
    const std::string bytes = read_bytes(path);
    const Framed f = split_frame(bytes, path, "rgs-gaussians");
    const std::string where = path.string();
    GaussianSet set;
    try {
        set.tag = component_tag_from_string(field<std::string>(f.header, "tag", where));
    } catch (const std::invalid_argument& e) {
        throw InputError(where + ": " + e.what());
    }
    const auto count = field<std::size_t>(f.header, "count", where);
    check_payload(f.payload, 88 * count, path);
    const char* p = f.payload.data();
    auto next = [&] {
        const double v = load_le<double>(p);
        p += 8;
        return v;
    };
    set.primitives.resize(count);
    for (GaussianPrimitive& g : set.primitives) {
        for (int a = 0; a < 3; ++a) g.center[a] = next();
        for (int a = 0; a < 3; ++a) g.scales[a] = next();
        for (int a = 0; a < 4; ++a) g.rotation[a] = next();
        g.density = next();
    }
    return set;
}

AnalyticPhantom parse_phantom(const std::string& text, const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // Report the line of the byte offset the parser stopped at.
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw InputError(source + ":" + std::to_string(line) + ": " + e.what());
    }
    AnalyticPhantom ph;
    if (!j.is_object() || !j.contains("ellipsoids") || !j["ellipsoids"].is_array())
        throw InputError(source + ": expected an object with an 'ellipsoids' array");
    const json& list = j["ellipsoids"];
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = source + ": ellipsoids[" + std::to_string(i) + "]";
        const json& e = list[i];
        Ellipsoid el;
        el.center = vec3_field(e, "center", where);
        el.semi_axes = vec3_field(e, "semi_axes", where);
        el.delta = field<double>(e, "delta", where);
        if (e.contains("rotation")) {
            const auto q = field<std::vector<double>>(e, "rotation", where);
            if (q.size() != 4) throw InputError(where + ": field 'rotation' must have 4 numbers (w, x, y, z)");
            el.rotation = Vec4(q[0], q[1], q[2], q[3]);
        }
        if ((el.semi_axes.array() <= 0.0).any())
            throw InputError(where + ": semi_axes must be positive");
        if (el.rotation.norm() == 0.0) throw InputError(where + ": rotation must be non-zero");
        ph.ellipsoids.push_back(el);
    }
    if (j.contains("bbox")) {
        ph.bbox.lo = vec3_field(j["bbox"], "lo", source + ": bbox");
        ph.bbox.hi = vec3_field(j["bbox"], "hi", source + ": bbox");
    } else {
        // Axis-aligned hull of the ellipsoid bounding spheres.
        ph.bbox.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        ph.bbox.hi = -ph.bbox.lo;
        for (const Ellipsoid& e : ph.ellipsoids) {
            const double r = e.semi_axes.maxCoeff();
            ph.bbox.lo = ph.bbox.lo.cwiseMin(e.center - Vec3::Constant(r));
            ph.bbox.hi = ph.bbox.hi.cwiseMax(e.center + Vec3::Constant(r));
        }
        if (ph.ellipsoids.empty()) ph.bbox = Box3{};
    }
    return ph;
}

AnalyticPhantom read_phantom(const fs::path& path) {
    return parse_phantom(read_bytes(path), path.string());
}

void write_phantom(const fs::path& path, const AnalyticPhantom& phantom) {
    json list = json::array();
    for (const Ellipsoid& e : phantom.ellipsoids)
        list.push_back(json{{"center", vec_json(e.center)},
                            {"semi_axes", vec_json(e.semi_axes)},
                            {"rotation", vec_json(e.rotation)},
                            {"delta", e.delta}});
    const json j{{"bbox", {{"lo", vec_json(phantom.bbox.lo)}, {"hi", vec_json(phantom.bbox.hi)}}},
                 {"ellipsoids", list}};
    write_bytes(path, j.dump(2) + '\n');
}

void write_pgm(const fs::path& path, const Image2D& image, double lo, double hi) {
    std::string bytes = "P5\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    for (double v : image.data) {
        const double t = std::clamp((v - lo) / span, 0.0, 1.0);
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
    write_bytes(path, bytes);
}

void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text); }

std::string read_text(const fs::path& path) { return read_bytes(path); }

}  // namespace rgs
