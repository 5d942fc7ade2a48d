#ifndef LEAVEN_QUALITY_HPP
#define LEAVEN_QUALITY_HPP

// Verification utilities. These deliberately avoid the samplers' grid and
// hash code so they can serve as independent oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "leaven/core.hpp"
#include "leaven/mesh.hpp"
#include "leaven/particles.hpp"
#include "leaven/sdf.hpp"
#include "leaven/volume_sampler.hpp"

namespace leaven {

struct QualityReport {
    double minPairDistance = std::numeric_limits<double>::infinity();
    std::optional<NearestNeighborStats> nnStats;
    std::vector<std::pair<std::size_t, std::size_t>> violations;
    std::optional<double> onSurfaceMaxError;
    std::optional<double> insideFraction;
    std::vector<std::size_t> misplaced;  // indices failing the inside test
};

/// Above this many particles the all-pairs check gives way to a hashed grid.
inline constexpr std::size_t kAllPairsLimit = 5000;

namespace detail {

inline std::int64_t cellCoord(double value, double side) { return static_cast<std::int64_t>(std::floor(value / side)); }

struct CellKeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& key) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (auto v : key) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Pairs closer than `spacing`, found with a hash map of spacing-sized cells.
inline std::vector<std::pair<std::size_t, std::size_t>> closePairsHashed(std::span<const Vec3> points, double spacing) {
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, CellKeyHash> cells;
    for (std::size_t n = 0; n < points.size(); ++n) {
        cells[{cellCoord(points[n].x, spacing), cellCoord(points[n].y, spacing), cellCoord(points[n].z, spacing)}].push_back(n);
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const double limitSq = spacing * spacing;
    for (std::size_t n = 0; n < points.size(); ++n) {
        const std::array<std::int64_t, 3> c{cellCoord(points[n].x, spacing), cellCoord(points[n].y, spacing),
                                            cellCoord(points[n].z, spacing)};
        for (std::int64_t dz = -1; dz <= 1; ++dz)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    const auto it = cells.find({c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == cells.end()) continue;
                    for (auto m : it->second) {
                        if (m > n && squaredNorm(points[m] - points[n]) < limitSq) pairs.emplace_back(n, m);
                    }
                }
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

}  // namespace detail

/// Reports every pair closer than `spacing` (the bound is inclusive: a pair at
/// exactly `spacing` is fine) and the minimum pairwise distance.
inline QualityReport verifyMinDistance(const ParticleSet& ps, double spacing) {
    QualityReport report;
    const auto& points = ps.positions;
    if (points.size() <= kAllPairsLimit) {
        double minSq = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < points.size(); ++a) {
            for (std::size_t b = a + 1; b < points.size(); ++b) {
                const double dSq = squaredNorm(points[a] - points[b]);
                minSq = std::min(minSq, dSq);
                if (std::sqrt(dSq) < spacing) report.violations.emplace_back(a, b);
            }
        }
        report.minPairDistance = std::sqrt(minSq);
    } else {
        report.violations = detail::closePairsHashed(points, spacing);
    }
    if (points.size() >= 2) {
        report.nnStats = nearestNeighborStats(ps);
        if (points.size() > kAllPairsLimit) report.minPairDistance = report.nnStats->min;
    }
    return report;
}

namespace detail {

inline double pointSegmentDistance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double lengthSq = squaredNorm(ab);
    const double t = lengthSq > 0.0 ? std::clamp(dot(p - a, ab) / lengthSq, 0.0, 1.0) : 0.0;
    return norm(p - (a + ab * t));
}

/// Distance by plane projection: inside the triangle it is the plane
/// distance, otherwise the nearest edge.
inline double pointTriangleDistance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 n = cross(b - a, c - a);
    const double nn = squaredNorm(n);
    if (nn > 0.0) {
        const double planeOffset = dot(p - a, n) / nn;
        const Vec3 q = p - n * planeOffset;
        const bool inside = dot(cross(b - a, q - a), n) >= 0.0 && dot(cross(c - b, q - b), n) >= 0.0 &&
                            dot(cross(a - c, q - c), n) >= 0.0;
        if (inside) return std::abs(planeOffset) * std::sqrt(nn);
    }
    return std::min({pointSegmentDistance(p, a, b), pointSegmentDistance(p, b, c), pointSegmentDistance(p, c, a)});
}

}  // namespace detail

/// Largest distance from any particle to the mesh, by brute force over all
/// triangles.
inline double verifyOnSurface(const ParticleSet& ps, const TriangleMesh& mesh) {
    double worst = 0.0;
    for (const auto& p : ps.positions) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < mesh.triangleCount() && best > 0.0; ++t) {
            const auto c = mesh.corners(t);
            best = std::min(best, detail::pointTriangleDistance(p, c[0], c[1], c[2]));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

/// Fraction of particles with the expected sign: strictly negative, or
/// strictly positive when inverted. Points outside the field count as outside.
inline QualityReport verifyInside(const ParticleSet& ps, const SignedDistanceField& sdf, bool invert) {
    QualityReport report;
    for (std::size_t n = 0; n < ps.size(); ++n) {
        const auto value = sdf.tryQuery(ps.positions[n]);
        const bool ok = invert ? (!value || *value > 0.0) : (value && *value < 0.0);
        if (!ok) report.misplaced.push_back(n);
    }
    report.insideFraction = ps.empty() ? 1.0
                                       : 1.0 - static_cast<double>(report.misplaced.size()) / static_cast<double>(ps.size());
    return report;
}

}  // namespace leaven

#endif  // LEAVEN_QUALITY_HPP
