#ifndef LEAVEN_SDF_HPP
#define LEAVEN_SDF_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "leaven/core.hpp"
#include "leaven/mesh.hpp"
#include "leaven/spatial_index.hpp"

namespace leaven {

/// Throws OpenMesh when an edge borders one triangle and NonManifold when an
/// edge borders more than two.
inline void requireClosedManifold(const TriangleMesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edgeUse;
    for (const auto& t : mesh.triangles()) {
        for (int e = 0; e < 3; ++e) {
            const auto a = t[e];
            const auto b = t[(e + 1) % 3];
            ++edgeUse[{std::min(a, b), std::max(a, b)}];
        }
    }
    for (const auto& [edge, uses] : edgeUse) {
        if (uses == 1)
            throw Error(ErrorKind::OpenMesh, "boundary edge " + std::to_string(edge.first) + "-" + std::to_string(edge.second));
    }
    for (const auto& [edge, uses] : edgeUse) {
        if (uses > 2)
            throw Error(ErrorKind::NonManifold,
                        "edge " + std::to_string(edge.first) + "-" + std::to_string(edge.second) + " shared by " +
                            std::to_string(uses) + " triangles");
    }
}

/// Closest point on triangle (a, b, c) to p, by Voronoi region classification.
inline Vec3 closestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = dot(ab, ap);
    const double d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp);
    const double d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp);
    const double d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Exact signed distance to a closed mesh: unsigned distance by bucketed
/// nearest-triangle search, sign by ray parity.
class MeshDistance {
public:
    explicit MeshDistance(const TriangleMesh& mesh) : mesh_(&mesh) {
        const Aabb& box = mesh.bounds();
        const double longest = std::max(box.longestSide(), 1e-12);
        const auto perAxis = std::clamp(std::lround(1.5 * std::cbrt(static_cast<double>(mesh.triangleCount()))), 1L, 128L);
        grid_ = CellGrid::covering(box, longest / static_cast<double>(perAxis));
        buckets_.resize(static_cast<std::size_t>(grid_.cellCount()));
        for (std::size_t t = 0; t < mesh.triangleCount(); ++t) {
            const auto corners = mesh.corners(t);
            Aabb tb;
            for (const auto& v : corners) tb.extend(v);
            const CellIndex lo = grid_.cellOf(tb.min);
            const CellIndex hi = grid_.cellOf(tb.max);
            for (auto k = lo.k; k <= hi.k; ++k)
                for (auto j = lo.j; j <= hi.j; ++j)
                    for (auto i = lo.i; i <= hi.i; ++i)
                        buckets_[static_cast<std::size_t>(grid_.flatId({i, j, k}))].push_back(static_cast<std::uint32_t>(t));
        }
        edgeTolerance_ = 1e-12 * std::max(box.diagonal(), 1e-300);
    }

    double unsignedDistance(const Vec3& p) const {
        const CellIndex center = clampedCell(p);
        double bestSq = std::numeric_limits<double>::infinity();
        const std::int64_t maxRing = std::max({grid_.dims[0], grid_.dims[1], grid_.dims[2]});
        for (std::int64_t ring = 0; ring <= maxRing; ++ring) {
            for (std::int64_t k = center.k - ring; k <= center.k + ring; ++k) {
                for (std::int64_t j = center.j - ring; j <= center.j + ring; ++j) {
                    for (std::int64_t i = center.i - ring; i <= center.i + ring; ++i) {
                        const bool shell = std::max({std::abs(i - center.i), std::abs(j - center.j), std::abs(k - center.k)}) == ring;
                        if (!shell || !grid_.inGrid({i, j, k})) continue;
                        for (auto t : buckets_[static_cast<std::size_t>(grid_.flatId({i, j, k}))]) {
                            const auto c = mesh_->corners(t);
                            bestSq = std::min(bestSq, squaredNorm(p - closestPointOnTriangle(p, c[0], c[1], c[2])));
                        }
                    }
                }
            }
            const double bound = unexaminedBound(p, center, ring);
            if (bound * bound >= bestSq) break;
        }
        return std::sqrt(bestSq);
    }

    /// Point-in-polyhedron by ray parity along +x. A ray passing within the
    /// edge tolerance of an edge or vertex is re-cast along +y and +z and the
    /// unambiguous casts decide; when those are inconclusive too (points on a
    /// symmetry plane of an axis-aligned mesh), skewed directions take over.
    bool inside(const Vec3& p) const {
        const auto alongX = castParity(p, 0);
        if (!alongX.ambiguous) return alongX.odd;
        const auto alongY = castParity(p, 1);
        const auto alongZ = castParity(p, 2);
        if (!alongY.ambiguous && !alongZ.ambiguous && alongY.odd == alongZ.odd) return alongY.odd;
        if (alongY.ambiguous != alongZ.ambiguous) return alongY.ambiguous ? alongZ.odd : alongY.odd;
        for (const Vec3& direction : kSkewDirections) {
            const auto skewed = castParity(p, direction);
            if (!skewed.ambiguous) return skewed.odd;
        }
        return alongX.odd;
    }

    double signedDistance(const Vec3& p) const {
        const double d = unsignedDistance(p);
        return inside(p) ? -d : d;
    }

private:
    struct Parity {
        bool odd = false;
        bool ambiguous = false;
    };

    CellIndex clampedCell(const Vec3& p) const {
        std::array<std::int64_t, 3> index{};
        for (int axis = 0; axis < 3; ++axis) {
            const double cell = std::floor((p[axis] - grid_.origin[axis]) / grid_.cellSide);
            index[axis] = static_cast<std::int64_t>(std::clamp(cell, 0.0, static_cast<double>(grid_.dims[axis] - 1)));
        }
        return {index[0], index[1], index[2]};
    }

    // Lower bound on the distance from p to any cell outside the examined
    // block of Chebyshev radius `ring` around `center`.
    double unexaminedBound(const Vec3& p, const CellIndex& center, std::int64_t ring) const {
        const std::array<std::int64_t, 3> c{center.i, center.j, center.k};
        double bound = std::numeric_limits<double>::infinity();
        for (int axis = 0; axis < 3; ++axis) {
            if (c[axis] - ring > 0) {
                const double lo = grid_.origin[axis] + static_cast<double>(c[axis] - ring) * grid_.cellSide;
                bound = std::min(bound, std::max(0.0, p[axis] - lo));
            }
            if (c[axis] + ring < grid_.dims[axis] - 1) {
                const double hi = grid_.origin[axis] + static_cast<double>(c[axis] + ring + 1) * grid_.cellSide;
                bound = std::min(bound, std::max(0.0, hi - p[axis]));
            }
        }
        return bound;
    }

    Parity castParity(const Vec3& p, int axis) const {
        const int u = (axis + 1) % 3;
        const int v = (axis + 2) % 3;
        Parity result;
        // The ray only meets cells sharing p's cross-section coordinates.
        const Vec3 upper = grid_.upper();
        if (p[u] < grid_.origin[u] || p[u] > upper[u] || p[v] < grid_.origin[v] || p[v] > upper[v]) return result;
        if (p[axis] > upper[axis]) return result;

        CellIndex cell = clampedCell(p);
        std::array<std::int64_t, 3> idx{cell.i, cell.j, cell.k};
        std::vector<std::uint32_t> seen;
        int hits = 0;
        for (; idx[axis] < grid_.dims[axis]; ++idx[axis]) {
            for (auto t : buckets_[static_cast<std::size_t>(grid_.flatId({idx[0], idx[1], idx[2]}))]) {
                if (std::find(seen.begin(), seen.end(), t) != seen.end()) continue;
                seen.push_back(t);
                const auto c = mesh_->corners(t);
                // Signed doubled areas of the sub-triangles in the projection plane.
                std::array<double, 3> edge{};
                std::array<double, 3> length{};
                for (int e = 0; e < 3; ++e) {
                    const Vec3& a = c[(e + 1) % 3];
                    const Vec3& b = c[(e + 2) % 3];
                    edge[e] = (a[u] - p[u]) * (b[v] - p[v]) - (a[v] - p[v]) * (b[u] - p[u]);
                    length[e] = std::hypot(b[u] - a[u], b[v] - a[v]);
                }
                const double area = edge[0] + edge[1] + edge[2];
                if (area == 0.0) continue;  // parallel to the ray
                bool positive = false;
                bool negative = false;
                bool onEdge = false;
                for (int e = 0; e < 3; ++e) {
                    if (std::abs(edge[e]) <= edgeTolerance_ * length[e]) onEdge = true;
                    else if (edge[e] > 0.0) positive = true;
                    else negative = true;
                }
                if (positive && negative) continue;
                const double hit = (edge[0] * c[0][axis] + edge[1] * c[1][axis] + edge[2] * c[2][axis]) / area;
                if (hit <= p[axis]) continue;
                if (onEdge) result.ambiguous = true;
                else ++hits;
            }
        }
        result.odd = (hits % 2) == 1;
        return result;
    }

    static constexpr std::array<Vec3, 4> kSkewDirections{
        Vec3{0.8017837257372732, 0.5345224838248488, 0.2672612419124244},
        Vec3{-0.3015113445777636, 0.9045340337332909, 0.3015113445777636},
        Vec3{0.2357022603955158, -0.2357022603955158, 0.9428090415820634},
        Vec3{-0.6396021490668313, -0.4264014327112209, -0.6396021490668313}};

    /// Parity along an arbitrary direction, by testing every triangle.
    Parity castParity(const Vec3& p, const Vec3& direction) const {
        Parity result;
        int hits = 0;
        constexpr double kBarycentricTolerance = 1e-9;
        for (std::size_t t = 0; t < mesh_->triangleCount(); ++t) {
            const auto c = mesh_->corners(t);
            const Vec3 e1 = c[1] - c[0];
            const Vec3 e2 = c[2] - c[0];
            const Vec3 q = cross(direction, e2);
            const double det = dot(e1, q);
            if (std::abs(det) <= 1e-14 * norm(e1) * norm(e2)) continue;  // parallel or degenerate
            const Vec3 s = p - c[0];
            const double b1 = dot(s, q) / det;
            const Vec3 r = cross(s, e1);
            const double b2 = dot(direction, r) / det;
            const double b0 = 1.0 - b1 - b2;
            if (b0 < -kBarycentricTolerance || b1 < -kBarycentricTolerance || b2 < -kBarycentricTolerance) continue;
            if (dot(e2, r) / det <= 0.0) continue;  // behind the origin
            if (b0 <= kBarycentricTolerance || b1 <= kBarycentricTolerance || b2 <= kBarycentricTolerance)
                result.ambiguous = true;
            else
                ++hits;
        }
        result.odd = (hits % 2) == 1;
        return result;
    }

    const TriangleMesh* mesh_;
    CellGrid grid_;
    std::vector<std::vector<std::uint32_t>> buckets_;
    double edgeTolerance_ = 0.0;
};

/// Signed distance samples on a regular node lattice: node (i, j, k) sits at
/// grid.origin + (i, j, k) * grid.cellSide, with grid.dims nodes per axis.
/// Values are negative inside the mesh.
struct SignedDistanceField {
    CellGrid grid;
    std::vector<double> values;  // x fastest
    int resolution = 0;
    double padding = 0.0;

    double nodeSpacing() const { return grid.cellSide; }

    Aabb domain() const {
        const Vec3 span{static_cast<double>(grid.dims[0] - 1), static_cast<double>(grid.dims[1] - 1),
                        static_cast<double>(grid.dims[2] - 1)};
        return {grid.origin, grid.origin + span * grid.cellSide};
    }

    Vec3 nodePosition(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return grid.origin + Vec3{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)} * grid.cellSide;
    }

    double nodeValue(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return values[static_cast<std::size_t>(i + grid.dims[0] * (j + grid.dims[1] * k))];
    }

    /// Trilinear interpolation; nullopt outside the node domain.
    std::optional<double> tryQuery(const Vec3& p) const {
        const double h = grid.cellSide;
        const double tolerance = 1e-9 * h;
        std::array<std::int64_t, 3> base{};
        std::array<double, 3> t{};
        for (int axis = 0; axis < 3; ++axis) {
            const double f = (p[axis] - grid.origin[axis]) / h;
            const double last = static_cast<double>(grid.dims[axis] - 1);
            if (!(f >= -tolerance && f <= last + tolerance)) return std::nullopt;
            const double cell = std::clamp(std::floor(f), 0.0, last - 1.0);
            base[axis] = static_cast<std::int64_t>(cell);
            t[axis] = std::clamp(f - cell, 0.0, 1.0);
        }
        const auto [i, j, k] = base;
        const double c00 = std::lerp(nodeValue(i, j, k), nodeValue(i + 1, j, k), t[0]);
        const double c10 = std::lerp(nodeValue(i, j + 1, k), nodeValue(i + 1, j + 1, k), t[0]);
        const double c01 = std::lerp(nodeValue(i, j, k + 1), nodeValue(i + 1, j, k + 1), t[0]);
        const double c11 = std::lerp(nodeValue(i, j + 1, k + 1), nodeValue(i + 1, j + 1, k + 1), t[0]);
        return std::lerp(std::lerp(c00, c10, t[1]), std::lerp(c01, c11, t[1]), t[2]);
    }

    double query(const Vec3& p) const {
        if (auto value = tryQuery(p)) return *value;
        throw Error(ErrorKind::OutOfDomain, "query point outside the distance field domain");
    }
};

inline constexpr int kDefaultSdfResolution = 30;

/// Samples the exact signed distance of a closed mesh on a lattice covering
/// its bounding box grown by `padding`. `resolution` counts nodes along the
/// longest axis; shorter axes get at least two nodes. Node values are
/// independent, so the result does not depend on the worker count.
inline SignedDistanceField buildSdf(const TriangleMesh& mesh, int resolution = kDefaultSdfResolution,
                                    double padding = 0.0) {
    if (resolution < 2) throw Error(ErrorKind::InvalidConfig, "SDF resolution must be at least 2");
    if (!(padding >= 0.0) || !std::isfinite(padding)) throw Error(ErrorKind::InvalidConfig, "SDF padding must be >= 0");
    requireClosedManifold(mesh);

    const Aabb box = mesh.bounds().expanded(padding);
    const double longest = box.longestSide();
    if (!(longest > 0.0)) throw Error(ErrorKind::DegenerateMesh, "mesh bounding box has zero extent");

    SignedDistanceField sdf;
    sdf.resolution = resolution;
    sdf.padding = padding;
    sdf.grid.cellSide = longest / static_cast<double>(resolution - 1);
    const Vec3 extent = box.extent();
    for (int axis = 0; axis < 3; ++axis) {
        const double intervals = std::ceil(extent[axis] / sdf.grid.cellSide - 1e-9);
        sdf.grid.dims[axis] = std::max<std::int64_t>(2, static_cast<std::int64_t>(intervals) + 1);
    }
    // Center the lattice on the padded box so symmetric meshes give symmetric fields.
    const Vec3 covered = Vec3{static_cast<double>(sdf.grid.dims[0] - 1), static_cast<double>(sdf.grid.dims[1] - 1),
                              static_cast<double>(sdf.grid.dims[2] - 1)} * sdf.grid.cellSide;
    sdf.grid.origin = box.center() - covered * 0.5;
    sdf.values.resize(static_cast<std::size_t>(sdf.grid.cellCount()));

    const MeshDistance field(mesh);
    const auto slices = sdf.grid.dims[2];
    const unsigned workers = std::min<unsigned>(workerCount(), static_cast<unsigned>(slices));
    auto fillSlices = [&](unsigned worker) {
        for (std::int64_t k = worker; k < slices; k += workers) {
            for (std::int64_t j = 0; j < sdf.grid.dims[1]; ++j) {
                for (std::int64_t i = 0; i < sdf.grid.dims[0]; ++i) {
                    sdf.values[static_cast<std::size_t>(i + sdf.grid.dims[0] * (j + sdf.grid.dims[1] * k))] =
                        field.signedDistance(sdf.nodePosition(i, j, k));
                }
            }
        }
    };
    if (workers <= 1) {
        fillSlices(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(fillSlices, w);
    }
    return sdf;
}

namespace detail {

template <typename T>
void appendLittleEndian(std::string& out, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

}  // namespace detail

inline constexpr std::uint32_t kSdfCacheVersion = 1;

/// Cache layout (little endian): "LSDF", uint32 version, 3 x uint32 node
/// dims, 6 x float64 domain (min xyz, max xyz), float64 values, x fastest.
inline std::string encodeSdfCache(const SignedDistanceField& sdf) {
    std::string out = "LSDF";
    detail::appendLittleEndian(out, kSdfCacheVersion);
    for (auto d : sdf.grid.dims) detail::appendLittleEndian(out, static_cast<std::uint32_t>(d));
    const Aabb box = sdf.domain();
    for (const Vec3* corner : {&box.min, &box.max})
        for (int axis = 0; axis < 3; ++axis) detail::appendLittleEndian(out, (*corner)[axis]);
    for (double v : sdf.values) detail::appendLittleEndian(out, v);
    return out;
}

inline SignedDistanceField decodeSdfCache(std::string_view bytes) {
    constexpr std::size_t header = 4 + 4 + 12 + 48;
    if (bytes.size() < header || bytes.substr(0, 4) != "LSDF") throw Error(ErrorKind::ParseError, "not an LSDF cache");
    if (detail::readLittleEndian<std::uint32_t>(bytes.data() + 4) != kSdfCacheVersion)
        throw Error(ErrorKind::ParseError, "unsupported LSDF version");
    SignedDistanceField sdf;
    for (int axis = 0; axis < 3; ++axis) {
        sdf.grid.dims[axis] = detail::readLittleEndian<std::uint32_t>(bytes.data() + 8 + 4 * axis);
        if (sdf.grid.dims[axis] < 2) throw Error(ErrorKind::ParseError, "LSDF dims must be >= 2");
    }
    Vec3 lo;
    Vec3 hi;
    for (int axis = 0; axis < 3; ++axis) {
        lo[axis] = detail::readLittleEndian<double>(bytes.data() + 20 + 8 * axis);
        hi[axis] = detail::readLittleEndian<double>(bytes.data() + 44 + 8 * axis);
    }
    const std::uint64_t count = sdf.grid.cellCount();
    if (bytes.size() != header + 8 * count) throw Error(ErrorKind::ParseError, "LSDF size does not match dims");
    sdf.grid.origin = lo;
    sdf.grid.cellSide = (hi.x - lo.x) / static_cast<double>(sdf.grid.dims[0] - 1);
    for (int axis = 1; axis < 3; ++axis) {
        const double side = (hi[axis] - lo[axis]) / static_cast<double>(sdf.grid.dims[axis] - 1);
        if (std::abs(side - sdf.grid.cellSide) > 1e-9 * std::max(1.0, std::abs(sdf.grid.cellSide)))
            throw Error(ErrorKind::ParseError, "LSDF node spacing differs between axes");
    }
    sdf.values.resize(static_cast<std::size_t>(count));
    std::memcpy(sdf.values.data(), bytes.data() + header, 8 * count);
    sdf.resolution = static_cast<int>(std::max({sdf.grid.dims[0], sdf.grid.dims[1], sdf.grid.dims[2]}));
    return sdf;
}

inline void saveSdfCache(const SignedDistanceField& sdf, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    const auto bytes = encodeSdfCache(sdf);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline SignedDistanceField loadSdfCache(const std::filesystem::path& path) { return decodeSdfCache(readFile(path)); }

}  // namespace leaven

#endif  // LEAVEN_SDF_HPP
