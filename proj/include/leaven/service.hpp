#ifndef LEAVEN_SERVICE_HPP
#define LEAVEN_SERVICE_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <list>
#include <memory>
#include <mutex>
#include <new>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "leaven/io_export.hpp"
#include "leaven/mesh.hpp"
#include "leaven/surface_sampler.hpp"
#include "leaven/volume_sampler.hpp"

namespace leaven {

struct HttpReply {
    int status = 200;
    std::string body;
    std::string contentType = "application/json";
};

enum class SampleKind { Surface, VolumeGrid, VolumeRandom };

/// A fully validated sampling request: mesh preparation plus one sampler config.
struct SampleRequest {
    SampleKind kind = SampleKind::Surface;
    bool normalize = false;
    Vec3 scale{1.0, 1.0, 1.0};
    SurfaceSamplingConfig surface;
    VolumeSamplingConfig volume;
};

namespace detail {

inline HttpReply jsonReply(int status, const nlohmann::json& body) { return {status, body.dump(), "application/json"}; }

inline HttpReply errorReply(int status, std::string_view error, std::string_view message) {
    return jsonReply(status, {{"error", error}, {"message", message}});
}

inline std::string randomToken() {
    static thread_local std::random_device device;
    static constexpr char hex[] = "0123456789abcdef";
    std::string token;
    for (int word = 0; word < 4; ++word) {
        auto bits = device();
        for (int n = 0; n < 8; ++n, bits >>= 4) token += hex[bits & 0xf];
    }
    return token;
}

}  // namespace detail

/// Reads sampler parameters from a request body. Each parameter may sit inside
/// a "params" object or at the top level; "params" wins when both are given.
/// Throws InvalidConfig on bad values.
inline SampleRequest parseSampleRequest(const nlohmann::json& body) {
    const bool nested = body.contains("params") && body["params"].is_object();
    auto find = [&](const char* key) -> const nlohmann::json* {
        if (nested && body["params"].contains(key)) return &body["params"][key];
        if (body.contains(key)) return &body[key];
        return nullptr;
    };
    auto number = [&](const char* key) -> std::optional<double> {
        const auto* value = find(key);
        if (!value || value->is_null()) return std::nullopt;
        if (!value->is_number()) throw Error(ErrorKind::InvalidConfig, std::string(key) + " must be a number");
        return value->get<double>();
    };
    auto integer = [&](const char* key) -> std::optional<long long> {
        const auto* value = find(key);
        if (!value || value->is_null()) return std::nullopt;
        if (!value->is_number_integer()) throw Error(ErrorKind::InvalidConfig, std::string(key) + " must be an integer");
        return value->get<long long>();
    };
    auto boolean = [&](const char* key) -> bool {
        const auto* value = find(key);
        if (!value) return false;
        if (!value->is_boolean()) throw Error(ErrorKind::InvalidConfig, std::string(key) + " must be a boolean");
        return value->get<bool>();
    };

    SampleRequest request;
    const auto kind = body.value("kind", std::string{});
    if (kind == "surface") request.kind = SampleKind::Surface;
    else if (kind == "volumeGrid") request.kind = SampleKind::VolumeGrid;
    else if (kind == "volumeRandom") request.kind = SampleKind::VolumeRandom;
    else throw Error(ErrorKind::InvalidConfig, "kind must be surface, volumeGrid or volumeRandom");

    request.normalize = boolean("normalize");
    if (const auto* scale = find("scale")) {
        const auto& s = *scale;
        if (s.is_number()) request.scale = Vec3{1.0, 1.0, 1.0} * s.get<double>();
        else if (s.is_array() && s.size() == 3 && s[0].is_number() && s[1].is_number() && s[2].is_number())
            request.scale = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
        else throw Error(ErrorKind::InvalidConfig, "scale must be a number or a 3-array");
        for (int axis = 0; axis < 3; ++axis)
            if (!(request.scale[axis] > 0.0)) throw Error(ErrorKind::InvalidConfig, "scale factors must be positive");
    }
    const auto seed = integer("seed").value_or(0);
    const auto trials = integer("trials").value_or(10);
    if (trials < 1 || trials > 1'000'000) throw Error(ErrorKind::InvalidConfig, "trials must be in [1, 1e6]");

    if (request.kind == SampleKind::Surface) {
        auto& cfg = request.surface;
        const auto minDist = number("minDist");
        if (!minDist) throw Error(ErrorKind::InvalidConfig, "minDist is required");
        cfg.minDist = *minDist;
        cfg.density = number("density").value_or(40.0);
        cfg.trials = static_cast<int>(trials);
        cfg.seed = static_cast<std::uint64_t>(seed);
        const auto* normValue = find("norm");
        if (normValue && !normValue->is_string()) throw Error(ErrorKind::InvalidConfig, "norm must be a string");
        const auto norm = normValue ? normValue->get<std::string>() : std::string("euclidean");
        const auto parsed = normFromName(norm);
        if (!parsed) throw Error(ErrorKind::InvalidConfig, "norm must be euclidean or geodesic");
        cfg.norm = *parsed;
        cfg.validate();
    } else {
        auto& cfg = request.volume;
        const auto radius = number("radius");
        if (!radius) throw Error(ErrorKind::InvalidConfig, "radius is required");
        cfg.radius = *radius;
        cfg.mode = request.kind == SampleKind::VolumeGrid ? VolumeMode::Grid : VolumeMode::Random;
        cfg.invert = boolean("invert");
        const auto resolution = integer("sdfResolution").value_or(kDefaultSdfResolution);
        if (resolution < 2 || resolution > 1024) throw Error(ErrorKind::InvalidConfig, "sdfResolution must be in [2, 1024]");
        cfg.sdfResolution = static_cast<int>(resolution);
        cfg.density = number("density");
        cfg.trials = static_cast<int>(trials);
        cfg.margin = number("margin").value_or(0.0);
        cfg.padding = number("padding");
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.validate();
    }
    return request;
}

inline ParticleSet runSampleRequest(const TriangleMesh& mesh, const SampleRequest& request) {
    const TriangleMesh prepared = prepareMesh(mesh, request.normalize, request.scale);
    switch (request.kind) {
        case SampleKind::Surface: return sampleSurface(prepared, request.surface);
        case SampleKind::VolumeGrid: return sampleVolumeGrid(prepared, request.volume);
        case SampleKind::VolumeRandom: return sampleVolumeRandom(prepared, request.volume);
    }
    return {};
}

/// In-memory sessions behind the HTTP API. Each handler returns an HttpReply
/// so the logic is usable without a socket; mount() wires it to a server.
class SamplingService {
public:
    struct Options {
        std::size_t maxSessions = 16;
        std::size_t maxBodyBytes = 64ULL << 20;
        std::chrono::milliseconds timeBudget{60'000};
        std::filesystem::path staticDir;
    };

    SamplingService() : SamplingService(Options{}) {}
    explicit SamplingService(Options options) : options_(std::move(options)) {}

    HttpReply uploadMesh(std::string_view body, std::string_view contentType) {
        if (body.empty()) return detail::errorReply(400, "ParseError", "empty body");
        if (body.size() > options_.maxBodyBytes) return detail::errorReply(413, "TooLarge", "mesh exceeds size limit");
        std::shared_ptr<const TriangleMesh> mesh;
        try {
            mesh = std::make_shared<const TriangleMesh>(parseMesh(body, sniffFormat(body, contentType)));
        } catch (const Error& e) {
            return detail::errorReply(400, e.name(), e.what());
        }

        auto session = std::make_shared<Session>();
        session->id = detail::randomToken();
        session->mesh = mesh;
        {
            std::lock_guard lock(mutex_);
            touch(session);
            sessions_[session->id] = session;
            evictExcess();
        }
        const Aabb& box = mesh->bounds();
        return detail::jsonReply(200, {{"sessionId", session->id},
                                       {"vertexCount", mesh->vertexCount()},
                                       {"triangleCount", mesh->triangleCount()},
                                       {"aabb", {{"min", {box.min.x, box.min.y, box.min.z}}, {"max", {box.max.x, box.max.y, box.max.z}}}},
                                       {"surfaceArea", mesh->totalArea()}});
    }

    HttpReply sample(std::string_view body) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            return detail::errorReply(400, "ParseError", e.what());
        }
        if (!doc.is_object()) return detail::errorReply(400, "ParseError", "body must be a JSON object");
        const auto session = find(doc.value("sessionId", std::string{}));
        if (!session) return detail::errorReply(404, "UnknownSession", "no such session");

        SampleRequest request;
        try {
            request = parseSampleRequest(doc);
        } catch (const Error& e) {
            return detail::errorReply(422, e.name(), e.what());
        } catch (const nlohmann::json::exception& e) {
            return detail::errorReply(422, "InvalidConfig", e.what());
        }

        bool expected = false;
        if (!session->busy.compare_exchange_strong(expected, true))
            return detail::errorReply(409, "Busy", "a sampling run is already active for this session");

        std::shared_future<HttpReply> job =
            std::async(std::launch::async, [session, request, config = doc] { return execute(*session, request, config); })
                .share();
        if (job.wait_for(options_.timeBudget) == std::future_status::ready) return job.get();

        const std::string token = detail::randomToken();
        {
            std::lock_guard lock(mutex_);
            jobs_[token] = job;
        }
        return detail::jsonReply(202, {{"pollToken", token}, {"status", "running"}});
    }

    /// Poll a sampling run that exceeded the time budget.
    HttpReply sampleStatus(std::string_view token) {
        std::shared_future<HttpReply> job;
        {
            std::lock_guard lock(mutex_);
            const auto it = jobs_.find(std::string(token));
            if (it == jobs_.end()) return detail::errorReply(404, "UnknownToken", "no such sampling run");
            job = it->second;
            if (job.wait_for(std::chrono::seconds(0)) != std::future_status::ready)
                return detail::jsonReply(202, {{"pollToken", std::string(token)}, {"status", "running"}});
            jobs_.erase(it);
        }
        return job.get();
    }

    HttpReply result(std::string_view sessionId, std::string_view format) {
        const auto session = find(std::string(sessionId));
        if (!session) return detail::errorReply(404, "UnknownSession", "no such session");
        const auto parsed = exportFormatFromName(format.empty() ? "json" : format);
        if (!parsed) return detail::errorReply(400, "InvalidFormat", "format must be json, csv, ply, ply-binary or rawf64");
        std::lock_guard lock(session->mutex);
        if (!session->lastResult || session->lastResult->empty())
            return detail::errorReply(404, "NoResult", "session has no particle result");
        return {200, encodeParticles(*session->lastResult, *parsed), std::string(contentType(*parsed))};
    }

    void mount(httplib::Server& server) {
        server.set_payload_max_length(options_.maxBodyBytes);
        auto send = [](httplib::Response& res, const HttpReply& reply) {
            res.status = reply.status;
            res.set_content(reply.body, reply.contentType);
        };
        server.Post("/api/mesh", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, uploadMesh(req.body, req.get_header_value("Content-Type")));
        });
        server.Post("/api/sample", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, sample(req.body));
        });
        server.Get("/api/sample/status", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, sampleStatus(req.get_param_value("token")));
        });
        server.Get("/api/result", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, result(req.get_param_value("sessionId"), req.get_param_value("format")));
        });
        if (!options_.staticDir.empty() && std::filesystem::is_directory(options_.staticDir))
            server.set_mount_point("/", options_.staticDir.string());
    }

    std::size_t sessionCount() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

private:
    struct Session {
        std::string id;
        std::shared_ptr<const TriangleMesh> mesh;
        std::mutex mutex;  // guards lastResult and lastConfig
        std::optional<ParticleSet> lastResult;
        std::optional<nlohmann::json> lastConfig;
        std::atomic<bool> busy{false};
        std::list<std::string>::iterator recency;
        bool tracked = false;
    };

    static MeshFormat sniffFormat(std::string_view body, std::string_view contentType) {
        const auto type = contentType.substr(0, contentType.find(';'));
        if (type == "model/stl" || type == "application/sla" || type == "application/vnd.ms-pki.stl") return MeshFormat::Stl;
        if (type == "model/obj" || type == "text/plain") return MeshFormat::Obj;
        if (body.size() >= 84) {
            std::uint32_t count = 0;
            std::memcpy(&count, body.data() + 80, 4);
            if (body.size() == 84 + 50ULL * count) return MeshFormat::Stl;
        }
        return detail::trim(body.substr(0, 5)) == "solid" ? MeshFormat::Stl : MeshFormat::Obj;
    }

    static HttpReply execute(Session& session, const SampleRequest& request, const nlohmann::json& config) {
        struct Release {
            Session& s;
            ~Release() { s.busy = false; }
        } release{session};
        const auto start = std::chrono::steady_clock::now();
        try {
            ParticleSet ps = runSampleRequest(*session.mesh, request);
            const double elapsedMs =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            nlohmann::json reply{{"particleCount", ps.size()}, {"spacing", ps.spacing}, {"elapsedMs", elapsedMs}};
            std::lock_guard lock(session.mutex);
            session.lastResult = std::move(ps);
            session.lastConfig = config;
            return detail::jsonReply(200, reply);
        } catch (const Error& e) {
            return detail::errorReply(e.kind() == ErrorKind::InvalidConfig || e.kind() == ErrorKind::InvalidScale ? 422 : 409,
                                      e.name(), e.what());
        } catch (const std::bad_alloc&) {
            return detail::errorReply(422, "InvalidConfig", "run needs more memory than is available; raise the radius");
        }
    }

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard lock(mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) return nullptr;
        touch(it->second);
        return it->second;
    }

    // Callers hold mutex_.
    void touch(const std::shared_ptr<Session>& session) {
        if (session->tracked) recencyOrder_.erase(session->recency);
        recencyOrder_.push_front(session->id);
        session->recency = recencyOrder_.begin();
        session->tracked = true;
    }

    void evictExcess() {
        for (auto it = recencyOrder_.end(); sessions_.size() > options_.maxSessions && it != recencyOrder_.begin();) {
            --it;
            const auto victim = sessions_.find(*it);
            if (victim->second->busy) continue;
            sessions_.erase(victim);
            it = recencyOrder_.erase(it);
        }
    }

    Options options_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::list<std::string> recencyOrder_;
    std::unordered_map<std::string, std::shared_future<HttpReply>> jobs_;
};

/// Blocks serving the API (and static viewer assets) until the server stops.
inline bool serve(SamplingService& service, const std::string& host, int port) {
    httplib::Server server;
    service.mount(server);
    return server.listen(host, port);
}

}  // namespace leaven

#endif  // LEAVEN_SERVICE_HPP
