#ifndef LEAVEN_IO_EXPORT_HPP
#define LEAVEN_IO_EXPORT_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "leaven/core.hpp"
#include "leaven/mesh.hpp"
#include "leaven/particles.hpp"
#include "leaven/sdf.hpp"

namespace leaven {

enum class ExportFormat { Csv, Json, PlyAscii, PlyBinary, RawF64 };

constexpr std::string_view formatName(ExportFormat format) {
    switch (format) {
        case ExportFormat::Csv: return "csv";
        case ExportFormat::Json: return "json";
        case ExportFormat::PlyAscii: return "ply";
        case ExportFormat::PlyBinary: return "ply-binary";
        case ExportFormat::RawF64: return "rawf64";
    }
    return "csv";
}

inline std::optional<ExportFormat> exportFormatFromName(std::string_view name) {
    for (auto f : {ExportFormat::Csv, ExportFormat::Json, ExportFormat::PlyAscii, ExportFormat::PlyBinary,
                   ExportFormat::RawF64}) {
        if (formatName(f) == name) return f;
    }
    return std::nullopt;
}

inline std::optional<ExportFormat> exportFormatFromExtension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".csv") return ExportFormat::Csv;
    if (ext == ".json") return ExportFormat::Json;
    if (ext == ".ply") return ExportFormat::PlyBinary;
    if (ext == ".rawf64" || ext == ".raw" || ext == ".bin") return ExportFormat::RawF64;
    return std::nullopt;
}

constexpr std::string_view contentType(ExportFormat format) {
    switch (format) {
        case ExportFormat::Csv: return "text/csv";
        case ExportFormat::Json: return "application/json";
        case ExportFormat::PlyAscii: return "text/plain";
        case ExportFormat::PlyBinary:
        case ExportFormat::RawF64: return "application/octet-stream";
    }
    return "application/octet-stream";
}

namespace detail {

inline std::string plyHeader(std::size_t count, bool binary) {
    return std::string("ply\nformat ") + (binary ? "binary_little_endian" : "ascii") + " 1.0\nelement vertex " +
           std::to_string(count) + "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
}

}  // namespace detail

/// Serializes positions in generation order. Output depends only on the set,
/// so identical sets give identical bytes.
inline std::string encodeParticles(const ParticleSet& ps, ExportFormat format) {
    if (ps.empty()) throw Error(ErrorKind::EmptySet, "particle set is empty");
    std::string out;
    switch (format) {
        case ExportFormat::Csv:
            out = "x,y,z\n";
            for (const auto& p : ps.positions) {
                detail::appendShortest(out, p.x);
                out += ',';
                detail::appendShortest(out, p.y);
                out += ',';
                detail::appendShortest(out, p.z);
                out += '\n';
            }
            break;
        case ExportFormat::Json: {
            nlohmann::json positions = nlohmann::json::array();
            for (const auto& p : ps.positions) positions.push_back({p.x, p.y, p.z});
            nlohmann::json doc;
            doc["kind"] = kindName(ps.kind);
            doc["spacing"] = ps.spacing;
            doc["positions"] = std::move(positions);
            out = doc.dump();
            out += '\n';
            break;
        }
        case ExportFormat::PlyAscii:
            out = detail::plyHeader(ps.size(), false);
            for (const auto& p : ps.positions) {
                detail::appendShortest(out, p.x);
                out += ' ';
                detail::appendShortest(out, p.y);
                out += ' ';
                detail::appendShortest(out, p.z);
                out += '\n';
            }
            break;
        case ExportFormat::PlyBinary:
            out = detail::plyHeader(ps.size(), true);
            for (const auto& p : ps.positions)
                for (int axis = 0; axis < 3; ++axis) detail::appendLittleEndian(out, p[axis]);
            break;
        case ExportFormat::RawF64:
            detail::appendLittleEndian(out, static_cast<std::uint64_t>(ps.size()));
            for (const auto& p : ps.positions)
                for (int axis = 0; axis < 3; ++axis) detail::appendLittleEndian(out, p[axis]);
            break;
    }
    return out;
}

inline std::size_t exportParticles(const ParticleSet& ps, ExportFormat format, const std::filesystem::path& path) {
    const std::string bytes = encodeParticles(ps, format);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
    return bytes.size();
}

namespace detail {

inline std::string_view nextLine(std::string_view& text) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    return trim(line);
}

inline Vec3 parseTriple(std::string_view line, char separator, std::string_view what) {
    Vec3 p;
    for (int axis = 0; axis < 3; ++axis) {
        const auto cut = line.find(separator);
        if ((axis < 2) == (cut == std::string_view::npos))
            throw Error(ErrorKind::ParseError, std::string(what) + ": expected three values");
        p[axis] = parseDouble(trim(line.substr(0, cut)), what);
        line = cut == std::string_view::npos ? std::string_view{} : line.substr(cut + 1);
    }
    return p;
}

inline ParticleSet decodePly(std::string_view bytes) {
    std::string_view rest = bytes;
    if (nextLine(rest) != "ply") throw Error(ErrorKind::ParseError, "missing ply magic");
    bool binary = false;
    std::size_t count = 0;
    int properties = 0;
    for (;;) {
        if (rest.empty()) throw Error(ErrorKind::ParseError, "PLY header not terminated");
        const auto words = splitWords(nextLine(rest));
        if (words.empty()) continue;
        if (words[0] == "end_header") break;
        if (words[0] == "format") {
            if (words.size() < 2) throw Error(ErrorKind::ParseError, "bad PLY format line");
            if (words[1] == "binary_little_endian") binary = true;
            else if (words[1] != "ascii") throw Error(ErrorKind::ParseError, "unsupported PLY format");
        } else if (words[0] == "element" && words.size() == 3 && words[1] == "vertex") {
            count = static_cast<std::size_t>(parseInteger(words[2], "PLY header"));
        } else if (words[0] == "property") {
            if (words.size() != 3 || words[1] != "double") throw Error(ErrorKind::ParseError, "expected double properties");
            ++properties;
        }
    }
    if (properties != 3) throw Error(ErrorKind::ParseError, "expected x, y, z properties");
    ParticleSet ps;
    ps.positions.reserve(count);
    if (binary) {
        if (rest.size() != 24 * count) throw Error(ErrorKind::ParseError, "PLY body size does not match vertex count");
        for (std::size_t n = 0; n < count; ++n) {
            const char* record = rest.data() + 24 * n;
            ps.positions.push_back({readLittleEndian<double>(record), readLittleEndian<double>(record + 8),
                                    readLittleEndian<double>(record + 16)});
        }
    } else {
        while (!rest.empty() && ps.size() < count) {
            const auto line = nextLine(rest);
            if (line.empty()) continue;
            const auto words = splitWords(line);
            if (words.size() != 3) throw Error(ErrorKind::ParseError, "PLY vertex needs three values");
            ps.positions.push_back({parseDouble(words[0], "PLY"), parseDouble(words[1], "PLY"), parseDouble(words[2], "PLY")});
        }
        if (ps.size() != count) throw Error(ErrorKind::ParseError, "PLY body shorter than vertex count");
    }
    return ps;
}

}  // namespace detail

/// Inverse of encodeParticles. CSV, PLY and RAWF64 carry no metadata, so
/// spacing is 0 and kind Unknown for those.
inline ParticleSet decodeParticles(std::string_view bytes, ExportFormat format) {
    ParticleSet ps;
    switch (format) {
        case ExportFormat::Csv: {
            bool first = true;
            while (!bytes.empty()) {
                const auto line = detail::nextLine(bytes);
                if (line.empty()) continue;
                if (first && (line.front() == 'x' || line.front() == 'X')) {
                    first = false;
                    continue;
                }
                first = false;
                ps.positions.push_back(detail::parseTriple(line, ',', "CSV"));
            }
            break;
        }
        case ExportFormat::Json: {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(bytes);
                for (const auto& p : doc.at("positions")) {
                    if (!p.is_array() || p.size() != 3) throw Error(ErrorKind::ParseError, "position must have 3 values");
                    ps.positions.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
                }
                if (doc.contains("spacing") && doc["spacing"].is_number()) ps.spacing = doc["spacing"].get<double>();
                if (doc.contains("kind") && doc["kind"].is_string())
                    ps.kind = kindFromName(doc["kind"].get<std::string>()).value_or(ParticleKind::Unknown);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorKind::ParseError, std::string("JSON: ") + e.what());
            }
            break;
        }
        case ExportFormat::PlyAscii:
        case ExportFormat::PlyBinary:
            ps = detail::decodePly(bytes);
            break;
        case ExportFormat::RawF64: {
            if (bytes.size() < 8) throw Error(ErrorKind::ParseError, "RAWF64 shorter than its count");
            const auto count = detail::readLittleEndian<std::uint64_t>(bytes.data());
            if (count > (bytes.size() - 8) / 24 || bytes.size() != 8 + 24 * count)
                throw Error(ErrorKind::ParseError, "RAWF64 size does not match count " + std::to_string(count));
            ps.positions.resize(static_cast<std::size_t>(count));
            for (std::size_t n = 0; n < count; ++n) {
                const char* record = bytes.data() + 8 + 24 * n;
                ps.positions[n] = {detail::readLittleEndian<double>(record), detail::readLittleEndian<double>(record + 8),
                                   detail::readLittleEndian<double>(record + 16)};
            }
            break;
        }
    }
    return ps;
}

inline ParticleSet importParticles(const std::filesystem::path& path, ExportFormat format) {
    return decodeParticles(readFile(path), format);
}

}  // namespace leaven

#endif  // LEAVEN_IO_EXPORT_HPP
