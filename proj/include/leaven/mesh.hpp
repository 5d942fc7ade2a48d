#ifndef LEAVEN_MESH_HPP
#define LEAVEN_MESH_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "leaven/core.hpp"

namespace leaven {

struct Aabb {
    Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()};
    Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};

    void extend(const Vec3& p) {
        min = cwiseMin(min, p);
        max = cwiseMax(max, p);
    }

    bool empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
    Vec3 extent() const { return max - min; }
    Vec3 center() const { return (min + max) * 0.5; }
    double diagonal() const { return norm(extent()); }
    double longestSide() const {
        const Vec3 e = extent();
        return std::max({e.x, e.y, e.z});
    }

    Aabb expanded(double margin) const {
        return {min - Vec3{margin, margin, margin}, max + Vec3{margin, margin, margin}};
    }

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.y >= min.y && p.z >= min.z && p.x <= max.x && p.y <= max.y &&
               p.z <= max.z;
    }
};

using Triangle = std::array<std::uint32_t, 3>;

enum class MeshFormat { Obj, Stl };

/// Indexed triangle surface. Areas and normals are derived on construction and
/// the mesh is immutable afterwards.
class TriangleMesh {
public:
    /// Triangles with area below this are degenerate: kept, never sampled.
    static constexpr double kDegenerateArea = 1e-12;

    TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
        : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
        if (triangles_.empty()) throw Error(ErrorKind::EmptyMesh, "mesh has no triangles");
        normals_.reserve(triangles_.size());
        areas_.reserve(triangles_.size());
        for (const auto& t : triangles_) {
            for (auto index : t) {
                if (index >= vertices_.size())
                    throw Error(ErrorKind::ParseError,
                                "triangle references vertex " + std::to_string(index) + " of " +
                                    std::to_string(vertices_.size()));
            }
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
                throw Error(ErrorKind::ParseError, "triangle with repeated vertex index");
            const Vec3 n = cross(vertices_[t[1]] - vertices_[t[0]], vertices_[t[2]] - vertices_[t[0]]);
            const double twiceArea = norm(n);
            areas_.push_back(0.5 * twiceArea);
            normals_.push_back(0.5 * twiceArea < kDegenerateArea ? Vec3{} : n / twiceArea);
        }
        for (const auto& v : vertices_) bounds_.extend(v);
        for (double a : areas_) totalArea_ += a;
    }

    std::span<const Vec3> vertices() const { return vertices_; }
    std::span<const Triangle> triangles() const { return triangles_; }
    std::span<const Vec3> faceNormals() const { return normals_; }
    std::span<const double> faceAreas() const { return areas_; }

    std::size_t vertexCount() const { return vertices_.size(); }
    std::size_t triangleCount() const { return triangles_.size(); }
    double totalArea() const { return totalArea_; }
    const Aabb& bounds() const { return bounds_; }

    bool isDegenerate(std::size_t triangle) const { return areas_[triangle] < kDegenerateArea; }

    std::array<Vec3, 3> corners(std::size_t triangle) const {
        const auto& t = triangles_[triangle];
        return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
    }

private:
    std::vector<Vec3> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<Vec3> normals_;
    std::vector<double> areas_;
    Aabb bounds_;
    double totalArea_ = 0.0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Splits on spaces and tabs, dropping empty fields.
inline std::vector<std::string_view> splitWords(std::string_view line) {
    std::vector<std::string_view> words;
    std::size_t pos = 0;
    while (pos < line.size()) {
        const auto start = line.find_first_not_of(" \t\r", pos);
        if (start == std::string_view::npos) break;
        auto end = line.find_first_of(" \t\r", start);
        if (end == std::string_view::npos) end = line.size();
        words.push_back(line.substr(start, end - start));
        pos = end;
    }
    return words;
}

inline double parseDouble(std::string_view token, std::string_view what) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        throw Error(ErrorKind::ParseError, "invalid number '" + std::string(token) + "' in " + std::string(what));
    return value;
}

inline long long parseInteger(std::string_view token, std::string_view what) {
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        throw Error(ErrorKind::ParseError, "invalid index '" + std::string(token) + "' in " + std::string(what));
    return value;
}

inline void appendShortest(std::string& out, double value) {
    char buffer[32];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    out.append(buffer, ptr);
}

template <typename T>
T readLittleEndian(const char* data) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    T value;
    std::memcpy(&value, data, sizeof(T));
    return value;
}

struct BitHash {
    std::size_t operator()(const Vec3& p) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (double c : {p.x, p.y, p.z}) {
            h ^= std::bit_cast<std::uint64_t>(c + 0.0);  // +0.0 folds -0.0 into 0.0
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace detail

/// Parses ASCII OBJ text: `v` and `f` records, 1-based (or negative relative)
/// indices, polygons fan-triangulated. Everything else is ignored.
inline TriangleMesh parseObj(std::string_view text) {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::size_t lineNumber = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++lineNumber;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto words = detail::splitWords(line);
        if (words.empty()) continue;
        const std::string where = "OBJ line " + std::to_string(lineNumber);
        if (words[0] == "v") {
            if (words.size() < 4) throw Error(ErrorKind::ParseError, where + ": vertex needs 3 coordinates");
            vertices.push_back({detail::parseDouble(words[1], where), detail::parseDouble(words[2], where),
                                detail::parseDouble(words[3], where)});
        } else if (words[0] == "f") {
            if (words.size() < 4) throw Error(ErrorKind::ParseError, where + ": face needs 3 vertices");
            std::vector<std::uint32_t> polygon;
            for (std::size_t w = 1; w < words.size(); ++w) {
                const auto token = words[w].substr(0, words[w].find('/'));
                long long index = detail::parseInteger(token, where);
                if (index < 0) index += static_cast<long long>(vertices.size()) + 1;
                if (index < 1 || index > static_cast<long long>(vertices.size()))
                    throw Error(ErrorKind::ParseError, where + ": vertex index out of range");
                polygon.push_back(static_cast<std::uint32_t>(index - 1));
            }
            for (std::size_t k = 1; k + 1 < polygon.size(); ++k)
                triangles.push_back({polygon[0], polygon[k], polygon[k + 1]});
        }
    }
    return TriangleMesh(std::move(vertices), std::move(triangles));
}

/// Parses ASCII or little-endian binary STL. Identical coordinates are welded.
inline TriangleMesh parseStl(std::string_view bytes) {
    std::vector<std::array<Vec3, 3>> facets;
    bool binary = false;
    if (bytes.size() >= 84) {
        const auto count = detail::readLittleEndian<std::uint32_t>(bytes.data() + 80);
        binary = bytes.size() == 84 + 50ULL * count;
    }
    if (binary) {
        const auto count = detail::readLittleEndian<std::uint32_t>(bytes.data() + 80);
        facets.reserve(count);
        for (std::uint32_t f = 0; f < count; ++f) {
            const char* record = bytes.data() + 84 + 50ULL * f + 12;  // skip the stored normal
            std::array<Vec3, 3> facet;
            for (int c = 0; c < 3; ++c) {
                facet[c] = {detail::readLittleEndian<float>(record + 12 * c),
                            detail::readLittleEndian<float>(record + 12 * c + 4),
                            detail::readLittleEndian<float>(record + 12 * c + 8)};
            }
            facets.push_back(facet);
        }
    } else {
        const auto head = detail::trim(bytes.substr(0, 5));
        if (head != "solid") throw Error(ErrorKind::ParseError, "not an ASCII STL and binary size mismatch");
        std::array<Vec3, 3> facet;
        int corner = 0;
        std::size_t lineNumber = 0;
        while (!bytes.empty()) {
            const auto eol = bytes.find('\n');
            const std::string_view line = bytes.substr(0, eol);
            bytes = eol == std::string_view::npos ? std::string_view{} : bytes.substr(eol + 1);
            ++lineNumber;
            const auto words = detail::splitWords(line);
            if (words.empty()) continue;
            const std::string where = "STL line " + std::to_string(lineNumber);
            if (words[0] == "facet") {
                corner = 0;
            } else if (words[0] == "vertex") {
                if (words.size() < 4 || corner >= 3) throw Error(ErrorKind::ParseError, where + ": bad vertex");
                facet[corner++] = {detail::parseDouble(words[1], where), detail::parseDouble(words[2], where),
                                   detail::parseDouble(words[3], where)};
            } else if (words[0] == "endfacet") {
                if (corner != 3) throw Error(ErrorKind::ParseError, where + ": facet without 3 vertices");
                facets.push_back(facet);
            }
        }
    }

    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::unordered_map<Vec3, std::uint32_t, detail::BitHash> welded;
    triangles.reserve(facets.size());
    for (const auto& facet : facets) {
        Triangle t{};
        for (int c = 0; c < 3; ++c) {
            const Vec3 key = facet[c] + Vec3{};  // folds -0.0
            auto [it, inserted] = welded.try_emplace(key, static_cast<std::uint32_t>(vertices.size()));
            if (inserted) vertices.push_back(key);
            t[c] = it->second;
        }
        triangles.push_back(t);
    }
    return TriangleMesh(std::move(vertices), std::move(triangles));
}

inline TriangleMesh parseMesh(std::string_view bytes, MeshFormat format) {
    return format == MeshFormat::Obj ? parseObj(bytes) : parseStl(bytes);
}

inline std::string readFile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline MeshFormat formatFromExtension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") return MeshFormat::Obj;
    if (ext == ".stl") return MeshFormat::Stl;
    throw Error(ErrorKind::ParseError, "unknown mesh extension '" + ext + "' (expected .obj or .stl)");
}

inline TriangleMesh loadMesh(const std::filesystem::path& path, MeshFormat format) {
    return parseMesh(readFile(path), format);
}

inline TriangleMesh loadMesh(const std::filesystem::path& path) {
    return loadMesh(path, formatFromExtension(path));
}

/// OBJ text with shortest round-trip coordinates, so reloading is bit-exact.
inline std::string writeObj(const TriangleMesh& mesh) {
    std::string out;
    for (const auto& v : mesh.vertices()) {
        out += "v ";
        detail::appendShortest(out, v.x);
        out += ' ';
        detail::appendShortest(out, v.y);
        out += ' ';
        detail::appendShortest(out, v.z);
        out += '\n';
    }
    for (const auto& t : mesh.triangles()) {
        out += "f " + std::to_string(t[0] + 1) + ' ' + std::to_string(t[1] + 1) + ' ' + std::to_string(t[2] + 1) + '\n';
    }
    return out;
}

inline void saveObj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << writeObj(mesh);
}

/// Uniformly scales and translates so the longest AABB side is 1 and the box
/// is centered at the origin.
inline TriangleMesh normalizeMesh(const TriangleMesh& mesh) {
    const Aabb& box = mesh.bounds();
    const double longest = box.longestSide();
    if (!(longest > 0.0)) throw Error(ErrorKind::DegenerateMesh, "mesh bounding box has zero extent");
    const Vec3 center = box.center();
    std::vector<Vec3> vertices(mesh.vertices().begin(), mesh.vertices().end());
    for (auto& v : vertices) v = (v - center) / longest;
    return TriangleMesh(std::move(vertices), {mesh.triangles().begin(), mesh.triangles().end()});
}

inline TriangleMesh scaleMesh(const TriangleMesh& mesh, const Vec3& factors) {
    for (int axis = 0; axis < 3; ++axis) {
        if (!(factors[axis] > 0.0) || !std::isfinite(factors[axis]))
            throw Error(ErrorKind::InvalidScale, "scale factors must be positive and finite");
    }
    std::vector<Vec3> vertices(mesh.vertices().begin(), mesh.vertices().end());
    for (auto& v : vertices) v = {v.x * factors.x, v.y * factors.y, v.z * factors.z};
    return TriangleMesh(std::move(vertices), {mesh.triangles().begin(), mesh.triangles().end()});
}

/// Optional normalization followed by per-axis scaling.
inline TriangleMesh prepareMesh(const TriangleMesh& mesh, bool normalize, const Vec3& scale) {
    TriangleMesh result = normalize ? normalizeMesh(mesh) : mesh;
    if (scale != Vec3{1.0, 1.0, 1.0}) result = scaleMesh(result, scale);
    return result;
}

struct SurfacePoint {
    Vec3 position;
    std::size_t triangle = 0;
};

/// Barycentric point for the random pair (tau1, tau2):
/// u = 1 - sqrt(tau1), v = tau2 * sqrt(tau1), w = 1 - u - v.
inline Vec3 barycentricPoint(const std::array<Vec3, 3>& corners, double tau1, double tau2) {
    const double root = std::sqrt(tau1);
    const double u = 1.0 - root;
    const double v = tau2 * root;
    const double w = 1.0 - u - v;
    return u * corners[0] + v * corners[1] + w * corners[2];
}

/// Picks triangles with probability proportional to area. Degenerate
/// triangles are absent from the cumulative table.
class AreaWeightedSampler {
public:
    explicit AreaWeightedSampler(const TriangleMesh& mesh) : mesh_(&mesh) {
        double running = 0.0;
        for (std::size_t t = 0; t < mesh.triangleCount(); ++t) {
            if (mesh.isDegenerate(t)) continue;
            running += mesh.faceAreas()[t];
            cumulative_.push_back(running);
            triangles_.push_back(t);
        }
        if (triangles_.empty() || !(running > 0.0))
            throw Error(ErrorKind::DegenerateMesh, "mesh has zero total area");
    }

    std::size_t pickTriangle(double unit) const {
        const double target = unit * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        if (it == cumulative_.end()) --it;
        return triangles_[static_cast<std::size_t>(it - cumulative_.begin())];
    }

    SurfacePoint sample(Rng& rng) const {
        const std::size_t t = pickTriangle(uniform01(rng));
        const double tau1 = uniform01(rng);
        const double tau2 = uniform01(rng);
        return {barycentricPoint(mesh_->corners(t), tau1, tau2), t};
    }

    const TriangleMesh& mesh() const { return *mesh_; }

private:
    const TriangleMesh* mesh_;
    std::vector<double> cumulative_;
    std::vector<std::size_t> triangles_;
};

inline SurfacePoint randomSurfacePoint(const AreaWeightedSampler& sampler, Rng& rng) { return sampler.sample(rng); }

inline SurfacePoint randomSurfacePoint(const TriangleMesh& mesh, Rng& rng) {
    return AreaWeightedSampler(mesh).sample(rng);
}

}  // namespace leaven

#endif  // LEAVEN_MESH_HPP
