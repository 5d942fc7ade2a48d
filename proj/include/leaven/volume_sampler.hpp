#ifndef LEAVEN_VOLUME_SAMPLER_HPP
#define LEAVEN_VOLUME_SAMPLER_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "leaven/core.hpp"
#include "leaven/mesh.hpp"
#include "leaven/particles.hpp"
#include "leaven/sdf.hpp"
#include "leaven/spatial_index.hpp"
#include "leaven/surface_sampler.hpp"

namespace leaven {

enum class VolumeMode { Grid, Random };

constexpr std::string_view modeName(VolumeMode mode) { return mode == VolumeMode::Grid ? "grid" : "random"; }

inline std::optional<VolumeMode> modeFromName(std::string_view name) {
    if (name == "grid") return VolumeMode::Grid;
    if (name == "random") return VolumeMode::Random;
    return std::nullopt;
}

struct VolumeSamplingConfig {
    double radius = 0.02;
    VolumeMode mode = VolumeMode::Grid;
    bool invert = false;
    int sdfResolution = kDefaultSdfResolution;
    std::optional<double> density;  // unset: equal to trials
    int trials = 10;
    double margin = 0.0;
    std::optional<double> padding;  // unset: two sampling-cell diagonals when inverted, else 0
    std::uint64_t seed = 0;

    double effectiveDensity() const { return density.value_or(static_cast<double>(trials)); }

    /// Side of the sampling cells: 2r for the lattice, 2r/sqrt(3) for the
    /// random sampler so a cell diagonal equals the spacing 2r.
    double cellSide() const { return mode == VolumeMode::Grid ? 2.0 * radius : 2.0 * radius / std::numbers::sqrt3; }

    /// Only inverted sampling reaches outside the mesh box, so only it needs
    /// room by default; unpadded fields keep the full resolution on the mesh.
    double effectivePadding() const {
        return padding.value_or(invert ? 2.0 * std::numbers::sqrt3 * cellSide() : 0.0);
    }

    void validate() const {
        if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorKind::InvalidConfig, "radius must be positive");
        if (sdfResolution < 2) throw Error(ErrorKind::InvalidConfig, "SDF resolution must be at least 2");
        if (!(margin >= 0.0) || !std::isfinite(margin)) throw Error(ErrorKind::InvalidConfig, "margin must be >= 0");
        if (padding && (!(*padding >= 0.0) || !std::isfinite(*padding)))
            throw Error(ErrorKind::InvalidConfig, "padding must be >= 0");
        if (mode == VolumeMode::Random) {
            if (trials < 1) throw Error(ErrorKind::InvalidConfig, "trials must be at least 1");
            if (!(effectiveDensity() > 0.0) || !std::isfinite(effectiveDensity()))
                throw Error(ErrorKind::InvalidConfig, "density must be positive");
        }
    }
};

inline SignedDistanceField buildSdfFor(const TriangleMesh& mesh, const VolumeSamplingConfig& cfg) {
    return buildSdf(mesh, cfg.sdfResolution, cfg.effectivePadding());
}

/// Region that receives particles: the mesh box, or the padded box when
/// sampling the complement of the mesh.
inline Aabb samplingBox(const TriangleMesh& mesh, const VolumeSamplingConfig& cfg) {
    return cfg.invert ? mesh.bounds().expanded(cfg.effectivePadding()) : mesh.bounds();
}

/// Whether a signed distance (nullopt = outside the field) passes the
/// inside/outside test of cfg.
inline bool admits(std::optional<double> value, const VolumeSamplingConfig& cfg) {
    if (cfg.invert) return !value || *value > cfg.margin;
    return value && *value < -cfg.margin;
}

/// Cell-center lattice of grid mode: center (i, j, k) sits at
/// origin + (i + 1/2, j + 1/2, k + 1/2) * spacing.
struct VolumeLattice {
    Vec3 origin;
    double spacing = 0.0;
    std::array<std::int64_t, 3> dims{1, 1, 1};

    Vec3 center(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return {origin.x + (static_cast<double>(i) + 0.5) * spacing, origin.y + (static_cast<double>(j) + 0.5) * spacing,
                origin.z + (static_cast<double>(k) + 0.5) * spacing};
    }
};

/// Lattice of cell side 2r centered on `box`. Spacing and origin are snapped
/// up to multiples of a power-of-two quantum about 2^-40 of the coordinate
/// scale, so every center is computed without rounding and neighbouring
/// centers are exactly `spacing` >= 2r apart.
inline VolumeLattice gridLattice(const Aabb& box, double radius) {
    const double side = 2.0 * radius;
    const Vec3 extent = box.extent();
    double scale = side;
    for (int axis = 0; axis < 3; ++axis)
        scale = std::max(scale, std::abs(box.center()[axis]) + extent[axis] + 2.0 * side);
    int exponent = 0;
    std::frexp(scale, &exponent);
    const double quantum = std::ldexp(1.0, exponent - 40);

    VolumeLattice lattice;
    lattice.spacing = std::ceil(side / quantum) * quantum;
    for (int axis = 0; axis < 3; ++axis) {
        lattice.dims[axis] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(extent[axis] / side)));
        const double half = 0.5 * static_cast<double>(lattice.dims[axis]) * lattice.spacing;
        lattice.origin[axis] = std::round((box.center()[axis] - half) / (0.5 * quantum)) * (0.5 * quantum);
    }
    return lattice;
}

/// Keeps lattice centers whose signed distance passes the test, in x-fastest
/// order.
inline ParticleSet sampleVolumeGrid(const SignedDistanceField& sdf, const Aabb& box, const VolumeSamplingConfig& cfg) {
    cfg.validate();
    const VolumeLattice lattice = gridLattice(box, cfg.radius);
    ParticleSet result;
    result.spacing = 2.0 * cfg.radius;
    result.kind = ParticleKind::VolumeGrid;
    for (std::int64_t k = 0; k < lattice.dims[2]; ++k) {
        for (std::int64_t j = 0; j < lattice.dims[1]; ++j) {
            for (std::int64_t i = 0; i < lattice.dims[0]; ++i) {
                const Vec3 center = lattice.center(i, j, k);
                if (admits(sdf.tryQuery(center), cfg)) result.positions.push_back(center);
            }
        }
    }
    return result;
}

inline ParticleSet sampleVolumeGrid(const TriangleMesh& mesh, const VolumeSamplingConfig& cfg) {
    cfg.validate();
    const auto sdf = buildSdfFor(mesh, cfg);
    return sampleVolumeGrid(sdf, samplingBox(mesh, cfg), cfg);
}

/// Blue-noise volume sampling: uniform candidates in `box` that pass the
/// inside test (quota density * N, N the cell count of a 2r/sqrt(3) grid over
/// the box), then trial-round Poisson disk selection with spacing 2r.
inline ParticleSet sampleVolumeRandom(const SignedDistanceField& sdf, const Aabb& box, const VolumeSamplingConfig& cfg) {
    cfg.validate();
    const CellGrid grid = CellGrid::covering(box, cfg.cellSide());
    const double cells = static_cast<double>(grid.cellCount());
    const auto quota = static_cast<std::size_t>(std::max(1.0, std::floor(cfg.effectiveDensity() * cells)));
    const auto attemptCap = static_cast<std::uint64_t>(std::ceil(100.0 * cfg.effectiveDensity() * cells));

    Rng rng(cfg.seed);
    std::vector<Vec3> candidates;
    candidates.reserve(std::min<std::size_t>(quota, std::size_t{1} << 20));
    for (std::uint64_t attempt = 0; attempt < attemptCap && candidates.size() < quota; ++attempt) {
        const Vec3 p{uniform(rng, box.min.x, box.max.x), uniform(rng, box.min.y, box.max.y),
                     uniform(rng, box.min.z, box.max.z)};
        if (admits(sdf.tryQuery(p), cfg)) candidates.push_back(p);
    }
    if (candidates.empty()) throw Error(ErrorKind::EmptyVolume, "no candidate position found inside the volume");

    const double spacing = 2.0 * cfg.radius;
    const auto accepted = selectPoissonDisk(grid, candidates, {}, spacing, cfg.trials, DistanceNorm::Euclidean);

    ParticleSet result;
    result.spacing = spacing;
    result.kind = ParticleKind::VolumeRandom;
    result.positions.reserve(accepted.size());
    for (auto index : accepted) result.positions.push_back(candidates[index]);
    return result;
}

inline ParticleSet sampleVolumeRandom(const TriangleMesh& mesh, const VolumeSamplingConfig& cfg) {
    cfg.validate();
    const auto sdf = buildSdfFor(mesh, cfg);
    return sampleVolumeRandom(sdf, samplingBox(mesh, cfg), cfg);
}

inline ParticleSet sampleVolume(const TriangleMesh& mesh, const VolumeSamplingConfig& cfg) {
    return cfg.mode == VolumeMode::Grid ? sampleVolumeGrid(mesh, cfg) : sampleVolumeRandom(mesh, cfg);
}

struct NearestNeighborStats {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

/// Exact nearest-neighbour distance of every particle.
inline std::vector<double> nearestNeighborDistances(std::span<const Vec3> points) {
    if (points.size() < 2) throw Error(ErrorKind::TooFewParticles, "need at least two particles");
    Aabb box;
    for (const auto& p : points) box.extend(p);
    // About two points per cell on average.
    const Vec3 e = box.extent();
    const double longest = std::max(box.longestSide(), 1e-12);
    double volume = 1.0;
    int spanned = 0;
    for (int axis = 0; axis < 3; ++axis) {
        if (e[axis] > 1e-9 * longest) {
            volume *= e[axis];
            ++spanned;
        }
    }
    const double side =
        spanned == 0 ? 1.0 : std::max(std::pow(volume * 2.0 / static_cast<double>(points.size()), 1.0 / spanned), longest * 1e-6);
    CellGrid grid = CellGrid::covering(box, side);
    std::vector<std::vector<std::uint32_t>> cells(static_cast<std::size_t>(grid.cellCount()));
    for (std::size_t n = 0; n < points.size(); ++n)
        cells[static_cast<std::size_t>(grid.flatId(grid.cellOf(points[n])))].push_back(static_cast<std::uint32_t>(n));

    std::vector<double> result(points.size());
    const std::int64_t maxRing = std::max({grid.dims[0], grid.dims[1], grid.dims[2]});
    for (std::size_t n = 0; n < points.size(); ++n) {
        const CellIndex c = grid.cellOf(points[n]);
        double bestSq = std::numeric_limits<double>::infinity();
        for (std::int64_t ring = 0; ring <= maxRing; ++ring) {
            for (std::int64_t k = c.k - ring; k <= c.k + ring; ++k) {
                for (std::int64_t j = c.j - ring; j <= c.j + ring; ++j) {
                    for (std::int64_t i = c.i - ring; i <= c.i + ring; ++i) {
                        if (std::max({std::abs(i - c.i), std::abs(j - c.j), std::abs(k - c.k)}) != ring) continue;
                        if (!grid.inGrid({i, j, k})) continue;
                        for (auto m : cells[static_cast<std::size_t>(grid.flatId({i, j, k}))]) {
                            if (m != n) bestSq = std::min(bestSq, squaredNorm(points[m] - points[n]));
                        }
                    }
                }
            }
            // Unvisited cells are at least `ring` whole cells away.
            const double reach = static_cast<double>(ring) * grid.cellSide;
            if (bestSq <= reach * reach) break;
        }
        result[n] = std::sqrt(bestSq);
    }
    return result;
}

inline NearestNeighborStats nearestNeighborStats(const ParticleSet& ps) {
    const auto distances = nearestNeighborDistances(ps.positions);
    NearestNeighborStats stats{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (double d : distances) {
        stats.min = std::min(stats.min, d);
        stats.max = std::max(stats.max, d);
        stats.mean += d;
    }
    stats.mean /= static_cast<double>(distances.size());
    return stats;
}

}  // namespace leaven

#endif  // LEAVEN_VOLUME_SAMPLER_HPP
