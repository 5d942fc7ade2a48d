#ifndef LEAVEN_CLI_HPP
#define LEAVEN_CLI_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "leaven/io_export.hpp"
#include "leaven/mesh.hpp"
#include "leaven/quality.hpp"
#include "leaven/sdf.hpp"
#include "leaven/service.hpp"
#include "leaven/surface_sampler.hpp"
#include "leaven/volume_sampler.hpp"

namespace leaven::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kProcessingError = 2 };

namespace detail {

inline Vec3 parseScale(const std::string& text) {
    std::vector<double> values;
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        values.push_back(leaven::detail::parseDouble(leaven::detail::trim(rest.substr(0, comma)), "--scale"));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (values.size() == 1) return Vec3{1.0, 1.0, 1.0} * values[0];
    if (values.size() == 3) return {values[0], values[1], values[2]};
    throw CLI::ValidationError("--scale", "expected S or X,Y,Z");
}

inline std::uint64_t parseSeed(const std::string& text) {
    if (text == "random") return (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw CLI::ValidationError("--seed", "expected an unsigned integer or 'random'");
    return seed;
}

inline ExportFormat resolveFormat(const std::string& format, const std::string& output) {
    if (!format.empty()) {
        if (const auto f = exportFormatFromName(format)) return *f;
        throw CLI::ValidationError("--format", "expected csv, json, ply, ply-binary or rawf64");
    }
    if (!output.empty())
        if (const auto f = exportFormatFromExtension(output)) return *f;
    return ExportFormat::Csv;
}

inline void emit(const ParticleSet& ps, ExportFormat format, const std::string& output, std::ostream& out) {
    if (output.empty() || output == "-") {
        out << encodeParticles(ps, format);
        out.flush();
    } else {
        exportParticles(ps, format, output);
    }
}

}  // namespace detail

/// Runs one invocation. Data goes to `out` (when no --output is given);
/// progress, summaries and diagnostics go to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Particle sampling of triangle meshes: surface, volume, analysis and an HTTP service", "leaven"};
    app.require_subcommand(1);

    std::string input, output, format, scaleText = "1", seedText = "0";
    bool normalize = false;

    SurfaceSamplingConfig surfaceCfg;
    std::string normText = "euclidean";
    auto* surface = app.add_subcommand("surface", "Poisson disk sampling of the mesh surface");
    surface->add_option("--input", input, "Mesh file (.obj or .stl)")->required();
    surface->add_option("--min-dist", surfaceCfg.minDist, "Minimum distance d between samples (m)")->required();
    surface->add_option("--density", surfaceCfg.density, "Candidate density factor")->capture_default_str();
    surface->add_option("--trials", surfaceCfg.trials, "Trial rounds")->capture_default_str();
    surface->add_option("--norm", normText, "Distance norm")
        ->check(CLI::IsMember({"euclidean", "geodesic"}))
        ->capture_default_str();

    VolumeSamplingConfig volumeCfg;
    std::string modeText = "grid";
    double volumeDensity = 0.0;
    double padding = -1.0;
    std::string sdfCache;
    auto* volume = app.add_subcommand("volume", "Grid or blue-noise random sampling of the mesh volume");
    volume->add_option("--input", input, "Closed mesh file (.obj or .stl)")->required();
    volume->add_option("--mode", modeText, "Sampling mode")->check(CLI::IsMember({"grid", "random"}))->capture_default_str();
    volume->add_option("--radius", volumeCfg.radius, "Particle radius r (m); spacing is 2r")->required();
    volume->add_option("--sdf-resolution", volumeCfg.sdfResolution, "SDF nodes along the longest axis")->capture_default_str();
    volume->add_flag("--invert", volumeCfg.invert, "Sample between the padded bounding box and the mesh");
    volume->add_option("--margin", volumeCfg.margin, "Required depth inside (or outside) the surface (m)")->capture_default_str();
    volume->add_option("--density", volumeDensity, "Random mode candidate density (default: trials)");
    volume->add_option("--trials", volumeCfg.trials, "Random mode trial rounds")->capture_default_str();
    volume->add_option("--padding", padding, "Box padding (m); default two sampling-cell diagonals when inverted, else 0");
    volume->add_option("--sdf-cache", sdfCache, "LSDF cache file: read when present, written otherwise");

    for (auto* sub : {surface, volume}) {
        sub->add_flag("--normalize", normalize, "Scale the longest box side to 1 and center at the origin");
        sub->add_option("--scale", scaleText, "Uniform factor S or per-axis X,Y,Z (after normalization)")->capture_default_str();
        sub->add_option("--seed", seedText, "Random seed or 'random'")->capture_default_str();
        sub->add_option("--output", output, "Output file (default: standard output)");
        sub->add_option("--format", format, "csv, json, ply, ply-binary or rawf64 (default: from extension, else csv)");
    }

    double spacingOverride = 0.0;
    std::string meshPath;
    bool jsonReport = false;
    auto* analyze = app.add_subcommand("analyze", "Nearest-neighbour and minimum-distance statistics of a particle file");
    analyze->add_option("--input", input, "Particle file")->required();
    analyze->add_option("--format", format, "Particle file format (default: from extension)");
    analyze->add_option("--spacing", spacingOverride, "Spacing to verify (default: from the file)");
    analyze->add_option("--mesh", meshPath, "Mesh to measure on-surface error against");
    analyze->add_flag("--json", jsonReport, "Machine-readable output");

    int port = 8080;
    std::string host = "127.0.0.1";
    std::string staticDir = "viewer";
    long long budgetMs = 60'000;
    auto* serveCmd = app.add_subcommand("serve", "Run the HTTP sampling service");
    serveCmd->add_option("--port", port, "TCP port")->capture_default_str();
    serveCmd->add_option("--host", host, "Bind address")->capture_default_str();
    serveCmd->add_option("--static-dir", staticDir, "Viewer assets served at /")->capture_default_str();
    serveCmd->add_option("--time-budget-ms", budgetMs, "Synchronous sampling budget before answering 202")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto chosen = app.get_subcommands();
        err << (chosen.empty() ? app.help() : chosen.front()->help());
        return kUsageError;
    }

    const auto start = std::chrono::steady_clock::now();
    auto elapsedMs = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };

    try {
        if (surface->parsed() || volume->parsed()) {
            Vec3 scale;
            std::uint64_t seed = 0;
            ExportFormat exportFormat{};
            try {
                scale = detail::parseScale(scaleText);
                seed = detail::parseSeed(seedText);
                exportFormat = detail::resolveFormat(format, output);
            } catch (const CLI::Error& e) {
                err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
                return kUsageError;
            } catch (const Error& e) {
                err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
                return kUsageError;
            }

            const TriangleMesh mesh = prepareMesh(loadMesh(input), normalize, scale);
            err << "mesh: " << mesh.vertexCount() << " vertices, " << mesh.triangleCount() << " triangles, area "
                << mesh.totalArea() << "\n";
            ParticleSet ps;
            if (surface->parsed()) {
                surfaceCfg.norm = *normFromName(normText);
                surfaceCfg.seed = seed;
                ps = sampleSurface(mesh, surfaceCfg);
            } else {
                volumeCfg.mode = *modeFromName(modeText);
                volumeCfg.seed = seed;
                if (volume->count("--density") > 0) volumeCfg.density = volumeDensity;
                if (volume->count("--padding") > 0) volumeCfg.padding = padding;
                volumeCfg.validate();
                SignedDistanceField sdf;
                if (!sdfCache.empty() && std::filesystem::exists(sdfCache)) {
                    sdf = loadSdfCache(sdfCache);
                    err << "sdf: loaded " << sdfCache << "\n";
                } else {
                    sdf = buildSdfFor(mesh, volumeCfg);
                    if (!sdfCache.empty()) saveSdfCache(sdf, sdfCache);
                }
                const Aabb box = samplingBox(mesh, volumeCfg);
                ps = volumeCfg.mode == VolumeMode::Grid ? sampleVolumeGrid(sdf, box, volumeCfg)
                                                        : sampleVolumeRandom(sdf, box, volumeCfg);
            }
            err << kindName(ps.kind) << ": " << ps.size() << " particles, spacing " << ps.spacing << ", "
                << std::fixed << std::setprecision(1) << elapsedMs() << " ms\n";
            if (ps.empty()) throw Error(ErrorKind::EmptySet, "sampling produced no particles");
            detail::emit(ps, exportFormat, output, out);
            return kSuccess;
        }

        if (analyze->parsed()) {
            std::optional<ExportFormat> fileFormat =
                format.empty() ? exportFormatFromExtension(input) : exportFormatFromName(format);
            if (!fileFormat) {
                err << "error: cannot determine particle file format; pass --format\n\n" << analyze->help();
                return kUsageError;
            }
            // .ply may hold either encoding; the header tells.
            if (*fileFormat == ExportFormat::PlyBinary || *fileFormat == ExportFormat::PlyAscii) fileFormat = ExportFormat::PlyAscii;
            const ParticleSet ps = importParticles(input, *fileFormat);
            const double spacing = spacingOverride > 0.0 ? spacingOverride : ps.spacing;
            const QualityReport report = verifyMinDistance(ps, spacing);
            std::optional<double> surfaceError;
            if (!meshPath.empty()) surfaceError = verifyOnSurface(ps, loadMesh(meshPath));

            if (jsonReport) {
                nlohmann::json doc{{"count", ps.size()}, {"spacing", spacing}, {"violations", report.violations.size()}};
                if (std::isfinite(report.minPairDistance)) doc["minPairDistance"] = report.minPairDistance;
                if (report.nnStats)
                    doc["nearestNeighbor"] = {{"min", report.nnStats->min}, {"mean", report.nnStats->mean}, {"max", report.nnStats->max}};
                if (surfaceError) doc["onSurfaceMaxError"] = *surfaceError;
                out << doc.dump(2) << "\n";
            } else {
                out << "particles:          " << ps.size() << "\n";
                out << "spacing:            " << spacing << "\n";
                if (report.nnStats) {
                    out << "nearest neighbour:  min " << report.nnStats->min << "  mean " << report.nnStats->mean << "  max "
                        << report.nnStats->max << "\n";
                }
                out << "min pair distance:  " << report.minPairDistance << "\n";
                out << "violations:         " << report.violations.size() << "\n";
                if (surfaceError) out << "on-surface error:   " << *surfaceError << "\n";
            }
            return kSuccess;
        }

        if (serveCmd->parsed()) {
            SamplingService::Options options;
            options.staticDir = staticDir;
            options.timeBudget = std::chrono::milliseconds(budgetMs);
            SamplingService service(options);
            err << "serving on http://" << host << ":" << port << "\n";
            return serve(service, host, port) ? kSuccess : kProcessingError;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        const bool badArguments = e.kind() == ErrorKind::InvalidConfig || e.kind() == ErrorKind::InvalidScale;
        return badArguments ? kUsageError : kProcessingError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kProcessingError;
    }
    return kUsageError;
}

}  // namespace leaven::cli

#endif  // LEAVEN_CLI_HPP
