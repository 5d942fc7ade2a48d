#pragma once

// Reference computations that share no code with the library internals.

#include <cmath>
#include <numbers>
#include <vector>

#include "leaven/core.hpp"
#include "leaven/mesh.hpp"

namespace oracles {

using leaven::Vec3;

/// Generalized winding number: total signed solid angle of the mesh seen from
/// p, divided by 4 pi. About 1 inside a closed outward-oriented mesh, 0 outside.
inline double windingNumber(const leaven::TriangleMesh& mesh, const Vec3& p) {
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangleCount(); ++t) {
        const auto c = mesh.corners(t);
        const Vec3 a = c[0] - p, b = c[1] - p, d = c[2] - p;
        const double la = leaven::norm(a), lb = leaven::norm(b), ld = leaven::norm(d);
        const double numerator = leaven::dot(a, leaven::cross(b, d));
        const double denominator = la * lb * ld + leaven::dot(a, b) * ld + leaven::dot(b, d) * la + leaven::dot(d, a) * lb;
        total += 2.0 * std::atan2(numerator, denominator);
    }
    return total / (4.0 * std::numbers::pi);
}

inline bool insideByWinding(const leaven::TriangleMesh& mesh, const Vec3& p) { return windingNumber(mesh, p) > 0.5; }

/// Smallest pairwise distance by exhaustive comparison.
inline double minPairDistance(const std::vector<Vec3>& points) {
    double best = INFINITY;
    for (std::size_t a = 0; a < points.size(); ++a)
        for (std::size_t b = a + 1; b < points.size(); ++b) best = std::min(best, leaven::distance(points[a], points[b]));
    return best;
}

}  // namespace oracles
