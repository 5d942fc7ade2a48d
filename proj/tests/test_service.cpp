#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "leaven/service.hpp"
#include "support/meshes.hpp"

using namespace leaven;
using nlohmann::json;

namespace {

std::string cubeObj() { return writeObj(fixtures::cube()); }
std::string openObj() { return writeObj(fixtures::singleTriangle()); }

std::string upload(SamplingService& service, const std::string& body) {
    const auto reply = service.uploadMesh(body, "model/obj");
    EXPECT_EQ(reply.status, 200) << reply.body;
    return json::parse(reply.body)["sessionId"].get<std::string>();
}

json gridRequest(const std::string& session, double radius) {
    return {{"sessionId", session}, {"kind", "volumeGrid"}, {"params", {{"radius", radius}}}};
}

}  // namespace

TEST(MeshUpload, CubeSummary) {
    SamplingService service;
    const auto reply = service.uploadMesh(cubeObj(), "model/obj");
    ASSERT_EQ(reply.status, 200);
    const auto doc = json::parse(reply.body);
    EXPECT_EQ(doc["triangleCount"], 12);
    EXPECT_EQ(doc["vertexCount"], 8);
    EXPECT_DOUBLE_EQ(doc["surfaceArea"].get<double>(), 6.0);
    EXPECT_EQ(doc["aabb"]["min"][0], -0.5);
    EXPECT_FALSE(doc["sessionId"].get<std::string>().empty());
}

TEST(MeshUpload, BadBodies) {
    SamplingService::Options options;
    options.maxBodyBytes = 64;
    SamplingService service(options);
    EXPECT_EQ(service.uploadMesh("", "model/obj").status, 400);
    EXPECT_EQ(service.uploadMesh("v 1 2\nf 1 2 3\n", "model/obj").status, 400);
    EXPECT_EQ(service.uploadMesh(cubeObj(), "model/obj").status, 413);
}

TEST(MeshUpload, BunnyCountsMatchTheFile) {
    const auto text = readFile(fixtures::dataPath("bunny.obj"));
    std::size_t vertices = 0, faces = 0;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("v ", 0) == 0) ++vertices;
        if (line.rfind("f ", 0) == 0) ++faces;
    }
    SamplingService service;
    const auto doc = json::parse(service.uploadMesh(text, "").body);
    EXPECT_EQ(doc["vertexCount"], vertices);
    EXPECT_EQ(doc["triangleCount"], faces);
}

TEST(Sample, CubeGridGivesEight) {
    SamplingService service;
    const auto id = upload(service, cubeObj());
    const auto reply = service.sample(gridRequest(id, 0.25).dump());
    ASSERT_EQ(reply.status, 200) << reply.body;
    EXPECT_EQ(json::parse(reply.body)["particleCount"], 8);

    const auto result = service.result(id, "json");
    ASSERT_EQ(result.status, 200);
    EXPECT_EQ(json::parse(result.body)["positions"].size(), 8u);
    EXPECT_EQ(result.contentType, "application/json");
    const auto raw = service.result(id, "rawf64");
    EXPECT_EQ(raw.body.size(), 200u);
    EXPECT_EQ(raw.contentType, "application/octet-stream");
    const auto csv = service.result(id, "csv");
    EXPECT_EQ(std::count(csv.body.begin(), csv.body.end(), '\n'), 9);
}

TEST(Sample, ErrorStatuses) {
    SamplingService service;
    const auto open = upload(service, openObj());
    const auto openReply = service.sample(gridRequest(open, 0.1).dump());
    EXPECT_EQ(openReply.status, 409);
    EXPECT_NE(openReply.body.find("OpenMesh"), std::string::npos);

    const auto cube = upload(service, cubeObj());
    const json zero{{"sessionId", cube}, {"kind", "surface"}, {"params", {{"minDist", 0}}}};
    EXPECT_EQ(service.sample(zero.dump()).status, 422);
    const json badKind{{"sessionId", cube}, {"kind", "teapot"}};
    EXPECT_EQ(service.sample(badKind.dump()).status, 422);
    EXPECT_EQ(service.sample(gridRequest("nope", 0.25).dump()).status, 404);
    EXPECT_EQ(service.sample("{not json").status, 400);

    EXPECT_EQ(service.result("nope", "json").status, 404);
    EXPECT_EQ(service.result(cube, "json").status, 404) << "no result yet";
    EXPECT_EQ(service.result(open, "json").status, 404) << "failed run stores nothing";
}

TEST(Sample, IdenticalRequestsGiveIdenticalPayloads) {
    SamplingService service;
    const auto id = upload(service, writeObj(fixtures::icosphere(0.5, 2)));
    const json request{{"sessionId", id}, {"kind", "volumeRandom"}, {"params", {{"radius", 0.05}, {"seed", 3}}}};
    ASSERT_EQ(service.sample(request.dump()).status, 200);
    const auto first = service.result(id, "rawf64").body;
    ASSERT_EQ(service.sample(request.dump()).status, 200);
    EXPECT_EQ(service.result(id, "rawf64").body, first);
    const json surface{{"sessionId", id}, {"kind", "surface"}, {"minDist", 0.05}, {"norm", "geodesic"}};
    ASSERT_EQ(service.sample(surface.dump()).status, 200);
    EXPECT_NE(service.result(id, "rawf64").body, first);
}

TEST(Sample, ParametersAreReadAtEitherLevel) {
    const auto nested = parseSampleRequest(json::parse(R"({"kind":"volumeRandom","params":{"radius":0.1,"normalize":true,"seed":3}})"));
    const auto flat = parseSampleRequest(json::parse(R"({"kind":"volumeRandom","radius":0.1,"normalize":true,"seed":3})"));
    const auto mixed = parseSampleRequest(json::parse(R"({"kind":"volumeRandom","normalize":true,"radius":0.5,"params":{"radius":0.1,"seed":3}})"));
    for (const auto* request : {&nested, &flat, &mixed}) {
        EXPECT_TRUE(request->normalize);
        EXPECT_EQ(request->volume.radius, 0.1);
        EXPECT_EQ(request->volume.seed, 3u);
    }
    EXPECT_THROW(parseSampleRequest(json::parse(R"({"kind":"surface","minDist":0.1,"norm":7})")), Error);
}

TEST(Sample, SlowRunsAnswer202ThenPollAndBlockSecondRequests) {
    SamplingService::Options options;
    options.timeBudget = std::chrono::milliseconds(0);
    SamplingService service(options);
    const auto id = upload(service, readFile(fixtures::dataPath("bunny.obj")));
    const json heavy{{"sessionId", id}, {"kind", "volumeRandom"}, {"normalize", true}, {"params", {{"radius", 0.015}}}};
    const auto accepted = service.sample(heavy.dump());
    ASSERT_EQ(accepted.status, 202) << accepted.body;
    const auto token = json::parse(accepted.body)["pollToken"].get<std::string>();

    const auto second = service.sample(gridRequest(id, 0.1).dump());
    EXPECT_EQ(second.status, 409);
    EXPECT_NE(second.body.find("Busy"), std::string::npos);

    HttpReply status;
    for (int attempt = 0; attempt < 6000; ++attempt) {
        status = service.sampleStatus(token);
        if (status.status != 202) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ASSERT_EQ(status.status, 200) << status.body;
    EXPECT_GT(json::parse(status.body)["particleCount"].get<int>(), 0);
    EXPECT_EQ(service.sampleStatus(token).status, 404) << "tokens are single use";
}

TEST(Sessions, LeastRecentlyUsedIsEvicted) {
    SamplingService::Options options;
    options.maxSessions = 2;
    SamplingService service(options);
    const auto a = upload(service, cubeObj());
    const auto b = upload(service, cubeObj());
    ASSERT_EQ(service.sample(gridRequest(a, 0.25).dump()).status, 200);  // a becomes most recent
    const auto c = upload(service, cubeObj());
    EXPECT_EQ(service.sessionCount(), 2u);
    EXPECT_EQ(service.result(a, "json").status, 200);
    EXPECT_EQ(service.sample(gridRequest(b, 0.25).dump()).status, 404);
    EXPECT_EQ(service.sample(gridRequest(c, 0.25).dump()).status, 200);
}

TEST(Http, EndpointsOverARealSocket) {
    SamplingService::Options options;
    options.maxBodyBytes = 1 << 20;
    SamplingService service(options);
    httplib::Server server;
    service.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread loop([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    const auto mesh = client.Post("/api/mesh", cubeObj(), "model/obj");
    ASSERT_TRUE(mesh);
    ASSERT_EQ(mesh->status, 200);
    const auto id = json::parse(mesh->body)["sessionId"].get<std::string>();

    const auto sampled = client.Post("/api/sample", gridRequest(id, 0.25).dump(), "application/json");
    ASSERT_TRUE(sampled);
    EXPECT_EQ(sampled->status, 200);
    EXPECT_EQ(json::parse(sampled->body)["particleCount"], 8);

    const auto raw = client.Get("/api/result?sessionId=" + id + "&format=rawf64");
    ASSERT_TRUE(raw);
    EXPECT_EQ(raw->status, 200);
    EXPECT_EQ(raw->body.size(), 200u);
    EXPECT_EQ(raw->get_header_value("Content-Type"), "application/octet-stream");

    const auto missing = client.Get("/api/result?sessionId=unknown&format=json");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);

    const auto empty = client.Post("/api/mesh", "", "model/obj");
    ASSERT_TRUE(empty);
    EXPECT_EQ(empty->status, 400);

    const auto huge = client.Post("/api/mesh", std::string((1 << 20) + 10, 'v'), "model/obj");
    ASSERT_TRUE(huge);
    EXPECT_EQ(huge->status, 413);

    server.stop();
    loop.join();
}
