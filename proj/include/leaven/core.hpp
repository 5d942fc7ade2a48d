#ifndef LEAVEN_CORE_HPP
#define LEAVEN_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>

namespace leaven {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double squaredNorm(const Vec3& a) { return dot(a, a); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline Vec3 normalized(const Vec3& a) {
    const double n = norm(a);
    return n > 0.0 ? a / n : Vec3{};
}

constexpr Vec3 cwiseMin(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
constexpr Vec3 cwiseMax(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

/// Error categories surfaced to library users, the CLI and the HTTP service.
/// The names returned by errorName() are part of the service contract.
enum class ErrorKind {
    ParseError,
    EmptyMesh,
    DegenerateMesh,
    InvalidScale,
    InvalidConfig,
    OutOfBounds,
    OpenMesh,
    NonManifold,
    OutOfDomain,
    EmptyVolume,
    TooFewParticles,
    EmptySet,
    IoError,
};

constexpr std::string_view errorName(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::EmptyMesh: return "EmptyMesh";
        case ErrorKind::DegenerateMesh: return "DegenerateMesh";
        case ErrorKind::InvalidScale: return "InvalidScale";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::OutOfBounds: return "OutOfBounds";
        case ErrorKind::OpenMesh: return "OpenMesh";
        case ErrorKind::NonManifold: return "NonManifold";
        case ErrorKind::OutOfDomain: return "OutOfDomain";
        case ErrorKind::EmptyVolume: return "EmptyVolume";
        case ErrorKind::TooFewParticles: return "TooFewParticles";
        case ErrorKind::EmptySet: return "EmptySet";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(errorName(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::string_view name() const noexcept { return errorName(kind_); }

private:
    ErrorKind kind_;
};

/// Random engine used by every sampler. The engine sequence is fixed by the
/// standard; doubles are derived from raw words rather than through
/// std::uniform_real_distribution so streams match across standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Worker count for internal parallel loops: LEAVEN_THREADS when set and
/// positive, hardware concurrency otherwise.
inline unsigned workerCount() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LEAVEN_THREADS")) {
        char* end = nullptr;
        const long requested = std::strtol(env, &end, 10);
        if (end != env && requested > 0) return static_cast<unsigned>(requested);
    }
    return hw;
}

}  // namespace leaven

#endif  // LEAVEN_CORE_HPP
