#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "cxqsm/rng.hpp"
#include "cxqsm/volume.hpp"

namespace cxqsm {

/// Parameters of the variable-density ky-kz sampling pattern.
struct MaskSpec {
    double pa = 12.0;       // decay strength
    double pb = 1.8;        // radial exponent
    double af = 4.0;        // acceleration factor
    int ny = 64;
    int nz = 64;
    int calib_y = 6;        // half-widths of the always-sampled centre block
    int calib_z = 3;
    std::uint64_t seed = 0;

    friend bool operator==(const MaskSpec&, const MaskSpec&) = default;

    void validate() const {
        require(af >= 1.0, "acceleration factor must be >= 1");
        require(pa > 0.0, "Pa must be positive");
        require(pb > 0.0, "Pb must be positive");
        require(ny > 0 && nz > 0, "mask plane extents must be positive");
        require(calib_y >= 0 && calib_z >= 0, "calibration half-widths must be non-negative");
        require(2 * calib_y <= ny && 2 * calib_z <= nz, "calibration block does not fit inside the plane");
    }

    std::size_t target_count() const {
        return static_cast<std::size_t>(std::llround(static_cast<double>(ny) * static_cast<double>(nz) / af));
    }

    std::size_t calib_count() const { return static_cast<std::size_t>(4 * calib_y * calib_z); }

    /// ky in [-calib_y, calib_y), kz in [-calib_z, calib_z).
    bool in_calib(int iy, int iz) const {
        const int ky = iy - ny / 2;
        const int kz = iz - nz / 2;
        return ky >= -calib_y && ky < calib_y && kz >= -calib_z && kz < calib_z;
    }
};

/// (Pa, Pb) for the acceleration factors the density was tuned for.
inline std::optional<std::pair<double, double>> density_params_for(int af) {
    switch (af) {
        case 2: return std::pair{7.0, 1.8};
        case 4: return std::pair{12.0, 1.8};
        case 6: return std::pair{17.0, 1.8};
        case 8: return std::pair{22.0, 1.8};
        default: return std::nullopt;
    }
}

inline MaskSpec make_mask_spec(int af, int ny, int nz, std::uint64_t seed) {
    MaskSpec spec;
    const auto params = density_params_for(af);
    require(params.has_value(), "no default density parameters for this acceleration factor");
    spec.pa = params->first;
    spec.pb = params->second;
    spec.af = af;
    spec.ny = ny;
    spec.nz = nz;
    spec.seed = seed;
    return spec;
}

struct SamplingMask {
    Plane<std::uint8_t> plane;   // 1 = readout line acquired
    MaskSpec spec;

    bool sampled(int iy, int iz) const { return plane(iy, iz) != 0; }
    std::size_t count() const {
        return static_cast<std::size_t>(std::count(plane.data.begin(), plane.data.end(), std::uint8_t{1}));
    }
    double fraction() const { return static_cast<double>(count()) / static_cast<double>(plane.size()); }
};

namespace detail {

/// Pa * r^Pb with r = sqrt(ky^2/ny + kz^2/nz); the PDF is exp(-this).
inline double density_exponent(const MaskSpec& spec, int iy, int iz) {
    const double ky = iy - spec.ny / 2;
    const double kz = iz - spec.nz / 2;
    const double r = std::sqrt(ky * ky / spec.ny + kz * kz / spec.nz);
    return spec.pa * std::pow(r, spec.pb);
}

}  // namespace detail

/// Sampling probability density over the centred (ky, kz) grid.
inline RealSlice pdf_map(const MaskSpec& spec) {
    spec.validate();
    RealSlice pdf(spec.ny, spec.nz);
    for (int iz = 0; iz < spec.nz; ++iz)
        for (int iy = 0; iy < spec.ny; ++iy) pdf(iy, iz) = std::exp(-detail::density_exponent(spec, iy, iz));
    return pdf;
}

/// Exact-count realisation: each line gets score u / PDF with u uniform in
/// (0, 1] from Philox keyed by the seed (counter = y-fastest line index); the
/// calibration block scores 0 and the round(ny*nz/af) lowest scores are kept.
/// Scores are compared in the log domain, where far-out PDF values would
/// otherwise underflow. Ties break on line index.
inline SamplingMask realize_mask(const MaskSpec& spec) {
    spec.validate();
    const std::size_t total = static_cast<std::size_t>(spec.ny) * static_cast<std::size_t>(spec.nz);
    const std::size_t target = spec.target_count();
    if (target < spec.calib_count())
        fail(ErrorKind::validation, "target sample count is smaller than the calibration block");

    const CounterRng rng(spec.seed);
    std::vector<double> score(total);
    for (int iz = 0; iz < spec.nz; ++iz) {
        for (int iy = 0; iy < spec.ny; ++iy) {
            const std::size_t i = static_cast<std::size_t>(iy) + static_cast<std::size_t>(spec.ny) * static_cast<std::size_t>(iz);
            score[i] = spec.in_calib(iy, iz) ? -std::numeric_limits<double>::infinity()
                                             : std::log(rng.uniform_open(i)) + detail::density_exponent(spec, iy, iz);
        }
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return score[a] < score[b] || (score[a] == score[b] && a < b);
    });

    SamplingMask mask{Plane<std::uint8_t>(spec.ny, spec.nz, Domain::kspace, 0), spec};
    for (std::size_t k = 0; k < target; ++k) mask.plane[order[k]] = 1;
    return mask;
}

inline SamplingMask full_mask(int ny, int nz) {
    MaskSpec spec;
    spec.af = 1.0;
    spec.ny = ny;
    spec.nz = nz;
    spec.calib_y = std::min(spec.calib_y, ny / 2);
    spec.calib_z = std::min(spec.calib_z, nz / 2);
    return SamplingMask{Plane<std::uint8_t>(ny, nz, Domain::kspace, 1), spec};
}

}  // namespace cxqsm
