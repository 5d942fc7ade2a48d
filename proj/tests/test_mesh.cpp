#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <random>

#include "leaven/mesh.hpp"
#include "support/meshes.hpp"

using namespace leaven;

namespace {

std::string binaryStl(const std::vector<std::array<Vec3, 3>>& facets) {
    std::string out(80, ' ');
    auto put32 = [&](std::uint32_t v) {
        for (int b = 0; b < 4; ++b) out += static_cast<char>((v >> (8 * b)) & 0xff);
    };
    auto putF = [&](float f) { put32(std::bit_cast<std::uint32_t>(f)); };
    put32(static_cast<std::uint32_t>(facets.size()));
    for (const auto& f : facets) {
        for (int n = 0; n < 3; ++n) putF(0.0f);
        for (const auto& p : f) {
            putF(static_cast<float>(p.x));
            putF(static_cast<float>(p.y));
            putF(static_cast<float>(p.z));
        }
        out += '\0';
        out += '\0';
    }
    return out;
}

std::vector<std::array<Vec3, 3>> facetsOf(const TriangleMesh& mesh) {
    std::vector<std::array<Vec3, 3>> facets;
    for (std::size_t t = 0; t < mesh.triangleCount(); ++t) facets.push_back(mesh.corners(t));
    return facets;
}

bool bitEqual(const Vec3& a, const Vec3& b) { return std::memcmp(&a, &b, sizeof(Vec3)) == 0; }

}  // namespace

TEST(ObjParsing, SingleTriangleHasAreaHalfAndUpwardNormal) {
    const auto mesh = parseObj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    ASSERT_EQ(mesh.triangleCount(), 1u);
    EXPECT_DOUBLE_EQ(mesh.faceAreas()[0], 0.5);
    EXPECT_DOUBLE_EQ(mesh.totalArea(), 0.5);
    EXPECT_EQ(mesh.faceNormals()[0].x, 0.0);
    EXPECT_EQ(mesh.faceNormals()[0].y, 0.0);
    EXPECT_EQ(mesh.faceNormals()[0].z, 1.0);
}

TEST(ObjParsing, IndexPastVertexCountIsParseError) {
    try {
        parseObj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
        FAIL() << "expected ParseError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    }
}

TEST(ObjParsing, PolygonsAreFanTriangulatedAndSlashedIndicesAccepted) {
    const auto mesh = parseObj("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n");
    EXPECT_EQ(mesh.triangleCount(), 2u);
    EXPECT_DOUBLE_EQ(mesh.totalArea(), 1.0);
}

TEST(ObjParsing, NegativeIndicesCountFromTheEnd) {
    const auto mesh = parseObj("v 0 0 0\nv 2 0 0\nv 0 2 0\nf -3 -2 -1\n");
    EXPECT_DOUBLE_EQ(mesh.totalArea(), 2.0);
}

TEST(ObjParsing, EmptyAndMalformedInputs) {
    EXPECT_THROW(parseObj("v 0 0 0\n"), Error);
    try {
        parseObj("");
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyMesh);
    }
    EXPECT_THROW(parseObj("v 0 zero 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"), Error);
    EXPECT_THROW(parseObj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n"), Error);
}

TEST(StlParsing, BinaryUnitCubeHasAreaSix) {
    const auto mesh = parseStl(binaryStl(facetsOf(fixtures::cube(1.0, {0.5, 0.5, 0.5}))));
    EXPECT_EQ(mesh.triangleCount(), 12u);
    EXPECT_EQ(mesh.vertexCount(), 8u) << "shared corners are welded";
    EXPECT_NEAR(mesh.totalArea(), 6.0, 1e-9);
}

TEST(StlParsing, AsciiCubeMatchesBinary) {
    std::string text = "solid cube\n";
    for (const auto& f : facetsOf(fixtures::cube())) {
        text += "  facet normal 0 0 0\n    outer loop\n";
        for (const auto& p : f)
            text += "      vertex " + std::to_string(p.x) + " " + std::to_string(p.y) + " " + std::to_string(p.z) + "\n";
        text += "    endloop\n  endfacet\n";
    }
    text += "endsolid cube\n";
    const auto mesh = parseStl(text);
    EXPECT_EQ(mesh.triangleCount(), 12u);
    EXPECT_EQ(mesh.vertexCount(), 8u);
    EXPECT_NEAR(mesh.totalArea(), 6.0, 1e-9);
}

TEST(StlParsing, TruncatedBinaryIsRejected) {
    auto bytes = binaryStl(facetsOf(fixtures::cube()));
    bytes.resize(bytes.size() - 10);
    EXPECT_THROW(parseStl(bytes), Error);
}

TEST(MeshLoading, BundledBunnyIsClosedAndSized) {
    const auto mesh = loadMesh(fixtures::dataPath("bunny.obj"));
    EXPECT_EQ(mesh.vertexCount(), 1839u);
    EXPECT_EQ(mesh.triangleCount(), 3674u);
    EXPECT_THROW(loadMesh("/nonexistent/mesh.obj"), Error);
    EXPECT_EQ(formatFromExtension("A.STL"), MeshFormat::Stl);
    EXPECT_EQ(formatFromExtension("a.obj"), MeshFormat::Obj);
}

TEST(Normalize, CubeOfSideFourBecomesUnitCubeAtOrigin) {
    const auto mesh = normalizeMesh(fixtures::cube(4.0, {10, 10, 10}));
    EXPECT_DOUBLE_EQ(mesh.bounds().min.x, -0.5);
    EXPECT_DOUBLE_EQ(mesh.bounds().max.z, 0.5);
    EXPECT_DOUBLE_EQ(mesh.bounds().longestSide(), 1.0);
    EXPECT_NEAR(mesh.totalArea(), 6.0, 1e-12);
}

TEST(Normalize, IsIdempotentAndKeepsAspectRatio) {
    const auto once = normalizeMesh(fixtures::box({0, 0, 0}, {2, 1, 1}));
    const Vec3 e = once.bounds().extent();
    EXPECT_DOUBLE_EQ(e.x, 1.0);
    EXPECT_DOUBLE_EQ(e.y, 0.5);
    EXPECT_DOUBLE_EQ(e.z, 0.5);
    const auto twice = normalizeMesh(once);
    for (std::size_t v = 0; v < once.vertexCount(); ++v) EXPECT_TRUE(bitEqual(once.vertices()[v], twice.vertices()[v]));
}

TEST(Normalize, ZeroExtentIsDegenerate) {
    const TriangleMesh point({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}, {{0, 1, 2}});
    try {
        normalizeMesh(point);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateMesh);
    }
}

TEST(Scale, AnisotropicAndIdentity) {
    const auto unit = normalizeMesh(fixtures::cube());
    const auto stretched = scaleMesh(unit, {2, 1, 1});
    EXPECT_DOUBLE_EQ(stretched.bounds().extent().x, 2.0);
    EXPECT_DOUBLE_EQ(stretched.bounds().extent().y, 1.0);
    const auto same = scaleMesh(unit, {1, 1, 1});
    for (std::size_t v = 0; v < unit.vertexCount(); ++v) EXPECT_TRUE(bitEqual(unit.vertices()[v], same.vertices()[v]));
    try {
        scaleMesh(unit, {1, 0, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidScale);
    }
    EXPECT_THROW(scaleMesh(unit, {-1, 1, 1}), Error);
}

TEST(Scale, UniformScaleMultipliesAreaBySquare) {
    const auto unit = normalizeMesh(fixtures::cube());
    EXPECT_NEAR(scaleMesh(unit, {2, 2, 2}).totalArea(), 24.0, 1e-12);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> factor(0.1, 10.0);
    const auto sphere = fixtures::icosphere(0.7, 2);
    for (int n = 0; n < 20; ++n) {
        const double s = factor(rng);
        EXPECT_NEAR(scaleMesh(sphere, {s, s, s}).totalArea(), s * s * sphere.totalArea(), 1e-10 * s * s);
    }
}

TEST(Barycentric, CornerCases) {
    const std::array<Vec3, 3> c{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    const Vec3 a = barycentricPoint(c, 0.0, 0.3);
    EXPECT_EQ(a.x, 0.0);
    EXPECT_EQ(a.y, 0.0);
    // u = 0, v = 1: the second corner.
    const Vec3 b = barycentricPoint(c, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(b.x, 1.0);
    EXPECT_DOUBLE_EQ(b.y, 0.0);
    // u = 0, v = 0, w = 1: the third corner.
    const Vec3 d = barycentricPoint(c, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(d.x, 0.0);
    EXPECT_DOUBLE_EQ(d.y, 1.0);
}

TEST(Barycentric, PointsStayInsideTheTriangle) {
    const std::array<Vec3, 3> c{Vec3{0.2, -1, 3}, Vec3{4, 0.5, -2}, Vec3{-1, 2, 1}};
    const Vec3 n = cross(c[1] - c[0], c[2] - c[0]);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < 10000; ++s) {
        const Vec3 p = barycentricPoint(c, unit(rng), unit(rng));
        // Sub-triangle areas relative to the whole are the barycentric weights.
        const double wa = dot(cross(c[1] - p, c[2] - p), n) / dot(n, n);
        const double wb = dot(cross(c[2] - p, c[0] - p), n) / dot(n, n);
        const double wc = dot(cross(c[0] - p, c[1] - p), n) / dot(n, n);
        EXPECT_NEAR(wa + wb + wc, 1.0, 1e-12);
        EXPECT_GE(wa, -1e-12);
        EXPECT_GE(wb, -1e-12);
        EXPECT_GE(wc, -1e-12);
    }
}

TEST(AreaWeighting, TriangleFrequencyFollowsArea) {
    // Areas 1 and 3.
    const TriangleMesh mesh({{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {10, 0, 0}, {16, 0, 0}, {10, 1, 0}},
                            {{0, 1, 2}, {3, 4, 5}});
    ASSERT_DOUBLE_EQ(mesh.faceAreas()[0], 1.0);
    ASSERT_DOUBLE_EQ(mesh.faceAreas()[1], 3.0);
    const AreaWeightedSampler sampler(mesh);
    Rng rng(0);
    const int draws = 100000;
    int large = 0;
    for (int n = 0; n < draws; ++n) large += sampler.sample(rng).triangle == 1;
    const double fraction = static_cast<double>(large) / draws;
    EXPECT_NEAR(fraction, 0.75, 0.01);
    // Chi-square against the expected 25/75 split, one degree of freedom.
    const double e1 = 0.75 * draws, e0 = 0.25 * draws;
    const double chi2 = (large - e1) * (large - e1) / e1 + ((draws - large) - e0) * ((draws - large) - e0) / e0;
    EXPECT_LT(chi2, 10.83) << "p < 0.001";
}

TEST(AreaWeighting, UniformWithinATriangle) {
    // Midpoint subdivision splits the triangle into four equal-area parts.
    const Vec3 a{0, 0, 0}, b{3, 0, 0}, c{1, 2, 0};
    const TriangleMesh mesh({a, b, c}, {{0, 1, 2}});
    const Vec3 ab = (a + b) * 0.5, bc = (b + c) * 0.5, ca = (c + a) * 0.5;
    const std::array<std::array<Vec3, 3>, 4> parts{{{a, ab, ca}, {ab, b, bc}, {ca, bc, c}, {ab, bc, ca}}};
    auto contains = [](const std::array<Vec3, 3>& t, const Vec3& p) {
        const Vec3 n = cross(t[1] - t[0], t[2] - t[0]);
        return dot(cross(t[1] - t[0], p - t[0]), n) >= 0 && dot(cross(t[2] - t[1], p - t[1]), n) >= 0 &&
               dot(cross(t[0] - t[2], p - t[2]), n) >= 0;
    };
    std::array<int, 4> counts{};
    Rng rng(3);
    const int draws = 100000;
    for (int n = 0; n < draws; ++n) {
        const Vec3 p = randomSurfacePoint(mesh, rng).position;
        for (int q = 0; q < 4; ++q) {
            if (contains(parts[q], p)) {
                ++counts[q];
                break;
            }
        }
    }
    for (int q = 0; q < 4; ++q) EXPECT_NEAR(counts[q] / static_cast<double>(draws), 0.25, 0.01) << "part " << q;
}

TEST(AreaWeighting, DegenerateTrianglesAreNeverPicked) {
    const TriangleMesh mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 2, 2}, {3, 3, 3}, {4, 4, 4}}, {{3, 4, 5}, {0, 1, 2}});
    EXPECT_TRUE(mesh.isDegenerate(0));
    const AreaWeightedSampler sampler(mesh);
    Rng rng(9);
    for (int n = 0; n < 10000; ++n) EXPECT_EQ(sampler.sample(rng).triangle, 1u);
    EXPECT_EQ(sampler.pickTriangle(0.0), 1u);
    EXPECT_EQ(sampler.pickTriangle(std::nextafter(1.0, 0.0)), 1u);
}

TEST(AreaWeighting, AllDegenerateIsAnError) {
    const TriangleMesh flat({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}, {{0, 1, 2}});
    try {
        AreaWeightedSampler sampler(flat);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateMesh);
    }
}

TEST(ObjWriting, RoundTripIsBitExact) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> coord(-1e3, 1e3);
    std::vector<Vec3> v;
    for (int n = 0; n < 300; ++n) v.push_back({coord(rng), coord(rng) * 1e-7, coord(rng) * 1e9});
    v.push_back({0.1, -0.0, 5e-324});
    std::vector<Triangle> t;
    for (std::uint32_t n = 0; n + 2 < v.size(); n += 3) t.push_back({n, n + 1, n + 2});
    const TriangleMesh mesh(v, t);
    const auto back = parseObj(writeObj(mesh));
    ASSERT_EQ(back.vertexCount(), mesh.vertexCount());
    for (std::size_t n = 0; n < v.size(); ++n) EXPECT_TRUE(bitEqual(back.vertices()[n], v[n])) << n;
    ASSERT_EQ(back.triangleCount(), mesh.triangleCount());
    for (std::size_t n = 0; n < t.size(); ++n) EXPECT_EQ(back.triangles()[n], t[n]);

    const auto path = std::filesystem::temp_directory_path() / "leaven_mesh_roundtrip.obj";
    saveObj(mesh, path);
    EXPECT_EQ(loadMesh(path).vertexCount(), mesh.vertexCount());
    std::filesystem::remove(path);
}
