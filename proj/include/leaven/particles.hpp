#ifndef LEAVEN_PARTICLES_HPP
#define LEAVEN_PARTICLES_HPP

#include <optional>
#include <string_view>
#include <vector>

#include "leaven/core.hpp"

namespace leaven {

enum class ParticleKind { Surface, VolumeGrid, VolumeRandom, Unknown };

constexpr std::string_view kindName(ParticleKind kind) {
    switch (kind) {
        case ParticleKind::Surface: return "surface";
        case ParticleKind::VolumeGrid: return "volumeGrid";
        case ParticleKind::VolumeRandom: return "volumeRandom";
        case ParticleKind::Unknown: return "unknown";
    }
    return "unknown";
}

inline std::optional<ParticleKind> kindFromName(std::string_view name) {
    for (auto kind : {ParticleKind::Surface, ParticleKind::VolumeGrid, ParticleKind::VolumeRandom, ParticleKind::Unknown}) {
        if (kindName(kind) == name) return kind;
    }
    return std::nullopt;
}

/// Sample positions in generation order plus the spacing they were generated
/// under (minimum distance d for surfaces, 2r for volumes, 0 when unknown).
struct ParticleSet {
    std::vector<Vec3> positions;
    double spacing = 0.0;
    ParticleKind kind = ParticleKind::Unknown;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
};

}  // namespace leaven

#endif  // LEAVEN_PARTICLES_HPP
