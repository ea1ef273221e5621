#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlb/mesh.hpp"

namespace nlb {

using json = nlohmann::ordered_json;

/// Shortest decimal form that round-trips a binary64 value.
inline std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

static_assert(sizeof(double) == 8);

inline void append_le64(std::string& out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t sw = 0;
        for (int k = 0; k < 8; ++k) sw = (sw << 8) | ((bits >> (8 * k)) & 0xff);
        bits = sw;
    }
    char b[8];
    std::memcpy(b, &bits, 8);
    out.append(b, 8);
}

inline double take_le64(const char* p) {
    std::uint64_t bits;
    std::memcpy(&bits, p, 8);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t sw = 0;
        for (int k = 0; k < 8; ++k) sw = (sw << 8) | ((bits >> (8 * k)) & 0xff);
        bits = sw;
    }
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

}  // namespace detail

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ArtifactError("write failed: " + path.string());
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

enum class Encoding { Csv, Raw64le };

inline const char* encoding_name(Encoding e) { return e == Encoding::Csv ? "csv" : "raw64le"; }

inline Encoding encoding_from_name(const std::string& s) {
    if (s == "csv") return Encoding::Csv;
    if (s == "raw64le") return Encoding::Raw64le;
    throw ConfigError("encoding", "unknown encoding '" + s + "' (expected csv or raw64le)");
}

namespace detail {

/// Logical rows of a field payload, written one per CSV line.
inline std::vector<std::vector<double>> scalar_rows(const ScalarField& f) {
    const Mesh& m = f.mesh();
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(m.ny()) + 4);
    for (int j = 0; j < m.ny(); ++j) {
        std::vector<double> r(static_cast<std::size_t>(m.nx()));
        for (int i = 0; i < m.nx(); ++i) r[static_cast<std::size_t>(i)] = f(i, j);
        rows.push_back(std::move(r));
    }
    rows.push_back(f.trace().bottom);
    rows.push_back(f.trace().top);
    rows.push_back(f.trace().left);
    rows.push_back(f.trace().right);
    return rows;
}

inline std::vector<std::vector<double>> vector_rows(const VectorField& w) {
    const Mesh& m = w.mesh();
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(2 * m.ny()) + 1);
    for (int j = 0; j < m.ny(); ++j) {
        std::vector<double> r(static_cast<std::size_t>(m.nx() + 1));
        for (int i = 0; i <= m.nx(); ++i) r[static_cast<std::size_t>(i)] = w.u(i, j);
        rows.push_back(std::move(r));
    }
    for (int j = 0; j <= m.ny(); ++j) {
        std::vector<double> r(static_cast<std::size_t>(m.nx()));
        for (int i = 0; i < m.nx(); ++i) r[static_cast<std::size_t>(i)] = w.v(i, j);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::string payload_bytes(const std::vector<std::vector<double>>& rows, Encoding enc) {
    std::string out;
    if (enc == Encoding::Csv) {
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (k) out += ',';
                out += fmt_double(r[k]);
            }
            out += '\n';
        }
    } else {
        for (const auto& r : rows)
            for (double x : r) append_le64(out, x);
    }
    return out;
}

inline std::vector<double> decode_payload(const std::string& bytes, std::size_t offset,
                                          std::size_t count, Encoding enc,
                                          const std::string& where) {
    std::vector<double> vals;
    vals.reserve(count);
    if (enc == Encoding::Raw64le) {
        if (bytes.size() - offset < 8 * count)
            throw ArtifactError(where + ": raw payload truncated");
        for (std::size_t k = 0; k < count; ++k)
            vals.push_back(take_le64(bytes.data() + offset + 8 * k));
        return vals;
    }
    const char* p = bytes.data() + offset;
    const char* end = bytes.data() + bytes.size();
    while (p < end && vals.size() < count) {
        char* next = nullptr;
        double x = std::strtod(p, &next);
        if (next == p) {
            ++p;
            continue;
        }
        vals.push_back(x);
        p = next;
    }
    if (vals.size() != count) throw ArtifactError(where + ": csv payload truncated");
    return vals;
}

}  // namespace detail

/// Writes a scalar snapshot: one JSON header line, then the payload
/// (row-major cells, then the four boundary trace rows).
inline void write_scalar_snapshot(const std::filesystem::path& path, const ScalarField& f,
                                  double time, Encoding enc, const std::string& name = "") {
    json hdr;
    hdr["kind"] = "scalar";
    if (!name.empty()) hdr["name"] = name;
    hdr["nx"] = f.mesh().nx();
    hdr["ny"] = f.mesh().ny();
    hdr["time"] = time;
    hdr["layout"] = "cells row-major, then traces bottom,top,left,right";
    hdr["encoding"] = encoding_name(enc);
    std::string bytes = hdr.dump();
    bytes += '\n';
    bytes += detail::payload_bytes(detail::scalar_rows(f), enc);
    write_file_bytes(path, bytes);
}

inline void write_vector_snapshot(const std::filesystem::path& path, const VectorField& w,
                                  double time, Encoding enc, const std::string& name = "") {
    json hdr;
    hdr["kind"] = "vector";
    if (!name.empty()) hdr["name"] = name;
    hdr["nx"] = w.mesh().nx();
    hdr["ny"] = w.mesh().ny();
    hdr["time"] = time;
    hdr["layout"] = "u rows (nx+1 per row, ny rows), then v rows (nx per row, ny+1 rows)";
    hdr["encoding"] = encoding_name(enc);
    std::string bytes = hdr.dump();
    bytes += '\n';
    bytes += detail::payload_bytes(detail::vector_rows(w), enc);
    write_file_bytes(path, bytes);
}

struct SnapshotHeader {
    std::string kind;
    int nx = 0;
    double time = 0.0;
    Encoding encoding = Encoding::Csv;
};

namespace detail {

inline SnapshotHeader parse_header(const std::string& bytes, std::size_t& offset,
                                   const std::string& where) {
    std::size_t nl = bytes.find('\n');
    if (nl == std::string::npos) throw ArtifactError(where + ": missing header line");
    SnapshotHeader h;
    json hdr;
    try {
        hdr = json::parse(bytes.substr(0, nl));
        h.kind = hdr.at("kind").get<std::string>();
        h.nx = hdr.at("nx").get<int>();
        int ny = hdr.at("ny").get<int>();
        if (ny != h.nx) throw ArtifactError(where + ": non-square snapshot");
        h.time = hdr.at("time").get<double>();
        h.encoding = encoding_from_name(hdr.at("encoding").get<std::string>());
    } catch (const json::exception& e) {
        throw ArtifactError(where + ": bad header: " + e.what());
    }
    offset = nl + 1;
    return h;
}

}  // namespace detail

inline ScalarField read_scalar_snapshot(const std::filesystem::path& path, double* time = nullptr) {
    std::string bytes = read_file_bytes(path);
    std::size_t off = 0;
    SnapshotHeader h = detail::parse_header(bytes, off, path.string());
    if (h.kind != "scalar") throw ArtifactError(path.string() + ": not a scalar snapshot");
    Mesh m(h.nx);
    std::size_t count = m.cell_count() + 2 * static_cast<std::size_t>(m.nx() + m.ny());
    auto vals = detail::decode_payload(bytes, off, count, h.encoding, path.string());
    ScalarField f(m);
    std::size_t k = 0;
    for (int j = 0; j < m.ny(); ++j)
        for (int i = 0; i < m.nx(); ++i) f.at(i, j) = vals[k++];
    for (auto* side : {&f.trace().bottom, &f.trace().top, &f.trace().left, &f.trace().right})
        for (double& x : *side) x = vals[k++];
    if (!f.all_finite()) throw ArtifactError(path.string() + ": non-finite values");
    if (time) *time = h.time;
    return f;
}

inline VectorField read_vector_snapshot(const std::filesystem::path& path, double* time = nullptr) {
    std::string bytes = read_file_bytes(path);
    std::size_t off = 0;
    SnapshotHeader h = detail::parse_header(bytes, off, path.string());
    if (h.kind != "vector") throw ArtifactError(path.string() + ": not a vector snapshot");
    Mesh m(h.nx);
    std::size_t count = m.uface_count() + m.vface_count();
    auto vals = detail::decode_payload(bytes, off, count, h.encoding, path.string());
    VectorField w(m);
    std::size_t k = 0;
    for (int j = 0; j < m.ny(); ++j)
        for (int i = 0; i <= m.nx(); ++i) w.u(i, j) = vals[k++];
    for (int j = 0; j <= m.ny(); ++j)
        for (int i = 0; i < m.nx(); ++i) w.v(i, j) = vals[k++];
    if (!w.all_finite()) throw ArtifactError(path.string() + ": non-finite values");
    if (time) *time = h.time;
    return w;
}

}  // namespace nlb
