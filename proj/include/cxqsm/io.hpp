#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cxqsm/mask.hpp"
#include "cxqsm/volume.hpp"

namespace cxqsm::io {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

/// Writes via a sibling temporary and renames, so a failed write never
/// leaves a partial file at `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path() && !fs::exists(path.parent_path())) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) fail(ErrorKind::io, "cannot create directory " + path.parent_path().string());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            fail(ErrorKind::io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        fail(ErrorKind::io, "cannot rename into " + path.string());
    }
}

inline std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void put_f32le(std::string& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline float get_f32le(const char* p) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
    return std::bit_cast<float>(bits);
}

namespace detail {

/// Splits "header\npayload"; the header must be a JSON object.
inline std::pair<nlohmann::json, std::string_view> split_header(const std::string& bytes, const std::string& what) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) fail(ErrorKind::format, what + ": missing header terminator");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, what + ": malformed JSON header (" + e.what() + ")");
    }
    if (!header.is_object()) fail(ErrorKind::format, what + ": header is not an object");
    return {header, std::string_view(bytes).substr(nl + 1)};
}

template <class T>
T field(const nlohmann::json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) fail(ErrorKind::format, what + ": header lacks '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::format, what + ": header field '" + key + "' has the wrong type");
    }
}

}  // namespace detail

struct CvolFile {
    ComplexVolume volume;
    std::optional<std::string> units;
};

/// `.cvol`: one JSON header line, then little-endian interleaved float32
/// (re, im) pairs in x-fastest order.
inline std::string encode_cvol(const ComplexVolume& v, const std::optional<std::string>& units = std::nullopt) {
    ordered_json h;
    h["shape"] = {v.shape.nx, v.shape.ny, v.shape.nz};
    h["dtype"] = "c64le";
    h["layout"] = "x-fastest";
    h["domain"] = to_string(v.domain);
    if (units) h["units"] = *units;
    std::string out = h.dump();
    out.push_back('\n');
    out.reserve(out.size() + v.size() * 8);
    for (const cplx& c : v.data) {
        put_f32le(out, static_cast<float>(c.real()));
        put_f32le(out, static_cast<float>(c.imag()));
    }
    return out;
}

inline CvolFile decode_cvol(const std::string& bytes, const std::string& what = "cvol") {
    auto [h, payload] = detail::split_header(bytes, what);
    const auto shape = detail::field<std::vector<int>>(h, "shape", what);
    if (shape.size() != 3 || shape[0] <= 0 || shape[1] <= 0 || shape[2] <= 0)
        fail(ErrorKind::format, what + ": shape must be three positive extents");
    if (detail::field<std::string>(h, "dtype", what) != "c64le") fail(ErrorKind::format, what + ": unsupported dtype");
    if (detail::field<std::string>(h, "layout", what) != "x-fastest") fail(ErrorKind::format, what + ": unsupported layout");
    const Domain domain = domain_from_string(detail::field<std::string>(h, "domain", what));
    CvolFile file{ComplexVolume({shape[0], shape[1], shape[2]}, domain), std::nullopt};
    if (h.contains("units")) file.units = detail::field<std::string>(h, "units", what);
    if (payload.size() != file.volume.size() * 8)
        fail(ErrorKind::format, what + ": payload has " + std::to_string(payload.size()) + " bytes, expected " +
                                    std::to_string(file.volume.size() * 8));
    for (std::size_t i = 0; i < file.volume.size(); ++i)
        file.volume[i] = cplx(get_f32le(payload.data() + 8 * i), get_f32le(payload.data() + 8 * i + 4));
    require_finite(file.volume, what.c_str());
    return file;
}

inline void write_cvol(const std::filesystem::path& path, const ComplexVolume& v,
                       const std::optional<std::string>& units = std::nullopt) {
    write_atomic(path, encode_cvol(v, units));
}

inline CvolFile read_cvol(const std::filesystem::path& path) {
    return decode_cvol(read_all(path), path.string());
}

/// Real maps travel as .cvol with a zero imaginary part.
inline void write_real_cvol(const std::filesystem::path& path, const RealVolume& v,
                            const std::optional<std::string>& units = std::nullopt) {
    write_cvol(path, to_complex(v), units);
}

inline RealVolume read_real_cvol(const std::filesystem::path& path) {
    return real_part(read_cvol(path).volume);
}

/// `.mask`: JSON header {"shape":[ny,nz],"spec":{...}}, then uint8 0/1, y-fastest.
inline std::string encode_mask(const SamplingMask& m) {
    ordered_json h;
    h["shape"] = {m.plane.ny, m.plane.nz};
    ordered_json spec;
    spec["Pa"] = m.spec.pa;
    spec["Pb"] = m.spec.pb;
    spec["af"] = m.spec.af;
    spec["calib"] = {m.spec.calib_y, m.spec.calib_z};
    spec["seed"] = m.spec.seed;
    h["spec"] = spec;
    std::string out = h.dump();
    out.push_back('\n');
    for (std::uint8_t b : m.plane.data) out.push_back(static_cast<char>(b ? 1 : 0));
    return out;
}

inline SamplingMask decode_mask(const std::string& bytes, const std::string& what = "mask") {
    auto [h, payload] = detail::split_header(bytes, what);
    const auto shape = detail::field<std::vector<int>>(h, "shape", what);
    if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0)
        fail(ErrorKind::format, what + ": shape must be two positive extents");
    if (!h.contains("spec") || !h["spec"].is_object()) fail(ErrorKind::format, what + ": header lacks 'spec'");
    const auto& js = h["spec"];
    MaskSpec spec;
    spec.ny = shape[0];
    spec.nz = shape[1];
    spec.pa = detail::field<double>(js, "Pa", what);
    spec.pb = detail::field<double>(js, "Pb", what);
    spec.af = detail::field<double>(js, "af", what);
    const auto calib = detail::field<std::vector<int>>(js, "calib", what);
    if (calib.size() != 2) fail(ErrorKind::format, what + ": calib must have two entries");
    spec.calib_y = calib[0];
    spec.calib_z = calib[1];
    spec.seed = detail::field<std::uint64_t>(js, "seed", what);
    SamplingMask m{Plane<std::uint8_t>(spec.ny, spec.nz, Domain::kspace, 0), spec};
    if (payload.size() != m.plane.size()) fail(ErrorKind::format, what + ": payload size does not match shape");
    for (std::size_t i = 0; i < m.plane.size(); ++i) {
        const auto b = static_cast<unsigned char>(payload[i]);
        if (b > 1) fail(ErrorKind::format, what + ": mask bytes must be 0 or 1");
        m.plane[i] = b;
    }
    return m;
}

inline void write_mask(const std::filesystem::path& path, const SamplingMask& m) { write_atomic(path, encode_mask(m)); }

inline SamplingMask read_mask(const std::filesystem::path& path) { return decode_mask(read_all(path), path.string()); }

}  // namespace cxqsm::io
