#ifndef LEAVEN_SURFACE_SAMPLER_HPP
#define LEAVEN_SURFACE_SAMPLER_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "leaven/core.hpp"
#include "leaven/mesh.hpp"
#include "leaven/particles.hpp"
#include "leaven/spatial_index.hpp"

namespace leaven {

enum class DistanceNorm { Euclidean, ApproxGeodesic };

constexpr std::string_view normName(DistanceNorm norm) {
    return norm == DistanceNorm::Euclidean ? "euclidean" : "geodesic";
}

inline std::optional<DistanceNorm> normFromName(std::string_view name) {
    if (name == "euclidean") return DistanceNorm::Euclidean;
    if (name == "geodesic") return DistanceNorm::ApproxGeodesic;
    return std::nullopt;
}

struct SurfaceSamplingConfig {
    double minDist = 0.02;
    double density = 40.0;
    int trials = 10;
    DistanceNorm norm = DistanceNorm::Euclidean;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(minDist > 0.0) || !std::isfinite(minDist))
            throw Error(ErrorKind::InvalidConfig, "minimum distance must be positive");
        if (!(density > 0.0) || !std::isfinite(density))
            throw Error(ErrorKind::InvalidConfig, "density must be positive");
        if (trials < 1) throw Error(ErrorKind::InvalidConfig, "trials must be at least 1");
    }
};

struct CandidatePoint {
    Vec3 position;
    Vec3 normal;
};

/// Largest |cos| between the chord and the mean normal that the geodesic
/// approximation honours; caps the correction factor at 1/sqrt(1-0.95^2).
inline constexpr double kGeodesicSlopeCap = 0.95;

/// Chord length corrected by the chord's slope against the mean tangent plane.
/// Always at least the Euclidean distance.
inline double geodesicApprox(const Vec3& pa, const Vec3& na, const Vec3& pb, const Vec3& nb) {
    const Vec3 chord = pb - pa;
    const double length = norm(chord);
    if (length == 0.0) return 0.0;
    const Vec3 meanNormal = na + nb;
    const double meanLength = norm(meanNormal);
    // Opposing normals (two sides of a thin sheet) get the full correction.
    const double slope = meanLength < 1e-12 ? kGeodesicSlopeCap
                                            : std::clamp(std::abs(dot(chord, meanNormal)) / (length * meanLength),
                                                         0.0, kGeodesicSlopeCap);
    return length / std::sqrt(1.0 - slope * slope);
}

inline double distance(const CandidatePoint& a, const CandidatePoint& b, DistanceNorm norm) {
    if (norm == DistanceNorm::Euclidean) return leaven::distance(a.position, b.position);
    return geodesicApprox(a.position, a.normal, b.position, b.normal);
}

/// floor(density * area / (pi d^2)), at least max(1, triangle count).
inline std::size_t candidateCount(const TriangleMesh& mesh, const SurfaceSamplingConfig& cfg) {
    const double raw = std::floor(cfg.density * mesh.totalArea() / (std::numbers::pi * cfg.minDist * cfg.minDist));
    const double floorCount = static_cast<double>(std::max<std::size_t>(1, mesh.triangleCount()));
    return static_cast<std::size_t>(std::max(raw, floorCount));
}

inline std::vector<CandidatePoint> generateCandidates(const TriangleMesh& mesh, const SurfaceSamplingConfig& cfg,
                                                      Rng& rng) {
    cfg.validate();
    const AreaWeightedSampler sampler(mesh);
    const std::size_t count = candidateCount(mesh, cfg);
    std::vector<CandidatePoint> candidates;
    candidates.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        const SurfacePoint p = sampler.sample(rng);
        candidates.push_back({p.position, mesh.faceNormals()[p.triangle]});
    }
    return candidates;
}

/// Trial-round Poisson disk selection over a bucketed candidate set.
///
/// For trial t = 1..trials every occupied cell without a sample, visited in
/// ascending cell id, proposes its t-th candidate. The proposal is accepted
/// when no already-sampled cell within the neighbour ring holds a sample
/// closer than minDist. Returns accepted candidate indices in acceptance order.
/// `normals` may be empty for the Euclidean norm.
inline std::vector<std::size_t> selectPoissonDisk(const CellGrid& grid, std::span<const Vec3> positions,
                                                  std::span<const Vec3> normals, double minDist, int trials,
                                                  DistanceNorm norm, HashGrid* hashOut = nullptr) {
    HashGrid hg(grid, positions);
    // Geodesic >= Euclidean, so a geodesic conflict always lies inside the
    // Euclidean reach and the same ring suffices for both norms.
    const int ring = ringFor(minDist, grid.cellSide);
    const bool geodesic = norm == DistanceNorm::ApproxGeodesic && !normals.empty();
    const double minDistSq = minDist * minDist;

    auto conflicts = [&](std::size_t candidate, const std::size_t sample) {
        if (!geodesic) return squaredNorm(positions[candidate] - positions[sample]) < minDistSq;
        return geodesicApprox(positions[candidate], normals[candidate], positions[sample], normals[sample]) < minDist;
    };

    std::vector<std::size_t> accepted;
    auto entries = hg.entries();
    for (int t = 0; t < trials; ++t) {
        for (auto& entry : entries) {
            if (entry.sample) continue;
            if (static_cast<std::size_t>(t) >= entry.count) continue;
            const std::size_t candidate = hg.order()[entry.start + static_cast<std::size_t>(t)];
            bool conflict = false;
            for (std::int64_t dk = -ring; dk <= ring && !conflict; ++dk) {
                for (std::int64_t dj = -ring; dj <= ring && !conflict; ++dj) {
                    for (std::int64_t di = -ring; di <= ring && !conflict; ++di) {
                        const CellIndex n{entry.cell.i + di, entry.cell.j + dj, entry.cell.k + dk};
                        if (!grid.inGrid(n)) continue;
                        const auto e = hg.findIndex(n);
                        if (e == HashGrid::kNone || !entries[e].sample) continue;
                        conflict = conflicts(candidate, *entries[e].sample);
                    }
                }
            }
            if (!conflict) {
                entry.sample = candidate;
                accepted.push_back(candidate);
            }
        }
    }
    if (hashOut) *hashOut = std::move(hg);
    return accepted;
}

/// Poisson disk sampling of a mesh surface with minimum distance cfg.minDist.
inline ParticleSet sampleSurface(const TriangleMesh& mesh, const SurfaceSamplingConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto candidates = generateCandidates(mesh, cfg, rng);
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
    positions.reserve(candidates.size());
    normals.reserve(candidates.size());
    for (const auto& c : candidates) {
        positions.push_back(c.position);
        normals.push_back(c.normal);
    }

    const CellGrid grid = CellGrid::covering(mesh.bounds(), cfg.minDist / std::numbers::sqrt3);
    const auto accepted = selectPoissonDisk(grid, positions, normals, cfg.minDist, cfg.trials, cfg.norm);

    ParticleSet result;
    result.spacing = cfg.minDist;
    result.kind = ParticleKind::Surface;
    result.positions.reserve(accepted.size());
    for (auto index : accepted) result.positions.push_back(positions[index]);
    return result;
}

}  // namespace leaven

#endif  // LEAVEN_SURFACE_SAMPLER_HPP
