#pragma once

#include <bit>
#include <filesystem>
#include <optional>
#include <string>

#include "cxqsm/dcrnet/model.hpp"
#include "cxqsm/io.hpp"

namespace cxqsm::dcr {

enum class WeightDtype { f32le, f64le };

inline const char* to_string(WeightDtype d) { return d == WeightDtype::f32le ? "f32le" : "f64le"; }

inline constexpr const char* kWeightsBlobName = "weights.bin";

namespace detail {

inline std::size_t dtype_bytes(WeightDtype d) { return d == WeightDtype::f32le ? 4 : 8; }

inline void put_value(std::string& out, double v, WeightDtype d) {
    if (d == WeightDtype::f32le) {
        io::put_f32le(out, static_cast<float>(v));
        return;
    }
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline double get_value(const char* p, WeightDtype d) {
    if (d == WeightDtype::f32le) return io::get_f32le(p);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
    return std::bit_cast<double>(bits);
}

/// Every stored tensor: trainables then BN running statistics.
template <class F>
void visit_stored(DcrNet& m, F&& f) {
    visit_params(m, f);
    visit_buffers(m, f);
}

}  // namespace detail

/// Writes `dir`/manifest.json and `dir`/weights.bin. Complex tensors are
/// stored as a real-part entry followed by an imaginary-part entry.
inline void save_weights(DcrNet& m, const std::filesystem::path& dir, WeightDtype dtype = WeightDtype::f32le) {
    io::ordered_json manifest;
    manifest["arch"] = "dcrnet";
    manifest["blocks"] = m.config.blocks;
    manifest["channels"] = m.config.channels;
    manifest["convention"] = to_string(m.config.convention);
    manifest["blob"] = kWeightsBlobName;
    manifest["tensors"] = io::ordered_json::array();
    std::string blob;
    detail::visit_stored(m, [&](const ParamView& v) {
        const int parts = v.complex ? 2 : 1;
        for (int part = 0; part < parts; ++part) {
            io::ordered_json t;
            t["name"] = v.name;
            t["shape"] = v.shape;
            t["dtype"] = to_string(dtype);
            t["offset"] = blob.size();
            t["part"] = part == 0 ? "real" : "imag";
            manifest["tensors"].push_back(t);
            for (std::size_t i = static_cast<std::size_t>(part); i < v.count; i += static_cast<std::size_t>(parts))
                detail::put_value(blob, v.data[i], dtype);
        }
    });
    io::write_atomic(dir / kWeightsBlobName, blob);
    io::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Reads a weights pair from `dir`. If `expect` is given, a manifest for a
/// different block count or width is an architecture error.
inline DcrNet load_weights(const std::filesystem::path& dir, const std::optional<DcrNetConfig>& expect = std::nullopt) {
    const std::string what = (dir / "manifest.json").string();
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_all(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, what + ": malformed JSON (" + e.what() + ")");
    }
    if (!manifest.is_object()) fail(ErrorKind::format, what + ": not a JSON object");
    if (io::detail::field<std::string>(manifest, "arch", what) != "dcrnet")
        fail(ErrorKind::architecture, what + ": not a dcrnet manifest");
    DcrNetConfig cfg;
    cfg.blocks = io::detail::field<int>(manifest, "blocks", what);
    cfg.channels = io::detail::field<int>(manifest, "channels", what);
    if (manifest.contains("convention"))
        cfg.convention = convention_from_string(io::detail::field<std::string>(manifest, "convention", what));
    if (expect && (expect->blocks != cfg.blocks || expect->channels != cfg.channels))
        fail(ErrorKind::architecture, what + ": manifest describes " + std::to_string(cfg.blocks) + " blocks of width " +
                                          std::to_string(cfg.channels) + ", expected " + std::to_string(expect->blocks) +
                                          " of width " + std::to_string(expect->channels));
    DcrNet m = zero_dcrnet(cfg);
    std::string blob_name = kWeightsBlobName;
    if (manifest.contains("blob")) blob_name = io::detail::field<std::string>(manifest, "blob", what);
    const std::string blob = io::read_all(dir / blob_name);
    const auto tensors = io::detail::field<nlohmann::json>(manifest, "tensors", what);
    if (!tensors.is_array()) fail(ErrorKind::format, what + ": 'tensors' is not an array");

    std::size_t entry = 0;
    detail::visit_stored(m, [&](const ParamView& v) {
        const int parts = v.complex ? 2 : 1;
        for (int part = 0; part < parts; ++part, ++entry) {
            if (entry >= tensors.size()) fail(ErrorKind::architecture, what + ": missing tensor " + v.name);
            const auto& t = tensors[entry];
            if (io::detail::field<std::string>(t, "name", what) != v.name)
                fail(ErrorKind::architecture, what + ": expected tensor " + v.name + " at entry " + std::to_string(entry));
            if (io::detail::field<std::vector<int>>(t, "shape", what) != v.shape)
                fail(ErrorKind::architecture, what + ": tensor " + v.name + " has the wrong shape");
            if (io::detail::field<std::string>(t, "part", what) != (part == 0 ? "real" : "imag"))
                fail(ErrorKind::format, what + ": tensor " + v.name + " has the wrong part tag");
            const std::string dt = io::detail::field<std::string>(t, "dtype", what);
            WeightDtype dtype;
            if (dt == "f32le") dtype = WeightDtype::f32le;
            else if (dt == "f64le") dtype = WeightDtype::f64le;
            else fail(ErrorKind::format, what + ": unsupported dtype '" + dt + "'");
            const auto offset = io::detail::field<std::size_t>(t, "offset", what);
            const std::size_t n = v.count / static_cast<std::size_t>(parts);
            const std::size_t bytes = n * detail::dtype_bytes(dtype);
            if (offset > blob.size() || blob.size() - offset < bytes)
                fail(ErrorKind::format, what + ": blob too short for tensor " + v.name);
            for (std::size_t i = 0; i < n; ++i)
                v.data[i * static_cast<std::size_t>(parts) + static_cast<std::size_t>(part)] =
                    detail::get_value(blob.data() + offset + i * detail::dtype_bytes(dtype), dtype);
        }
    });
    if (entry != tensors.size()) fail(ErrorKind::architecture, what + ": manifest lists extra tensors");
    detail::visit_stored(m, [&](const ParamView& v) {
        for (std::size_t i = 0; i < v.count; ++i)
            if (!std::isfinite(v.data[i])) fail(ErrorKind::format, what + ": tensor " + v.name + " has non-finite values");
    });
    visit_buffers(m, [&](const ParamView& v) {
        if (v.name.find(".var_") != std::string::npos)
            for (std::size_t i = 0; i < v.count; ++i)
                if (!(v.data[i] > 0.0)) fail(ErrorKind::format, what + ": running variance must be positive");
    });
    m.training = false;
    return m;
}

}  // namespace cxqsm::dcr
