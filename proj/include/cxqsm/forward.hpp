#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "cxqsm/fft.hpp"
#include "cxqsm/mask.hpp"

namespace cxqsm {

namespace detail {

inline void check_mask_plane(const Shape3& s, const SamplingMask& mask) {
    if (mask.plane.ny != s.ny || mask.plane.nz != s.nz)
        fail(ErrorKind::validation, "mask plane does not match the volume's (y, z) extents");
}

}  // namespace detail

/// Zero every readout line whose (y, z) position is not sampled.
inline void apply_mask(ComplexVolume& k, const SamplingMask& mask) {
    detail::check_mask_plane(k.shape, mask);
    for (int z = 0; z < k.shape.nz; ++z)
        for (int y = 0; y < k.shape.ny; ++y)
            if (!mask.sampled(y, z))
                for (int x = 0; x < k.shape.nx; ++x) k(x, y, z) = 0.0;
}

inline void apply_mask(ComplexSlice& k, const SamplingMask& mask) {
    require(k.ny == mask.plane.ny && k.nz == mask.plane.nz, "mask plane does not match the slice extents");
    for (std::size_t i = 0; i < k.size(); ++i)
        if (!mask.plane[i]) k[i] = 0.0;
}

/// y = A F x for an image-domain volume x.
inline ComplexVolume undersampled_forward(const ComplexVolume& x, const SamplingMask& mask) {
    detail::check_mask_plane(x.shape, mask);
    ComplexVolume k = dft_centered(x);
    apply_mask(k, mask);
    return k;
}

/// F^H A^H y; the mask is applied again so off-mask content in y is ignored.
inline ComplexVolume undersampled_adjoint(ComplexVolume y, const SamplingMask& mask) {
    detail::check_mask_plane(y.shape, mask);
    apply_mask(y, mask);
    return idft_centered(std::move(y));
}

/// Undersampled k-space of m * exp(i phi).
inline ComplexVolume forward_model(const RealVolume& m, const RealVolume& phi, const SamplingMask& mask) {
    if (!(m.shape == phi.shape)) fail(ErrorKind::validation, "magnitude and phase shapes differ");
    detail::check_mask_plane(m.shape, mask);
    return undersampled_forward(polar(m, phi), mask);
}

/// Inverse DFT of masked k-space. Rejects input with energy off the mask.
inline ComplexVolume zero_fill_recon(const ComplexVolume& y, const SamplingMask& mask) {
    detail::check_mask_plane(y.shape, mask);
    for (int z = 0; z < y.shape.nz; ++z)
        for (int yy = 0; yy < y.shape.ny; ++yy)
            if (!mask.sampled(yy, z))
                for (int x = 0; x < y.shape.nx; ++x)
                    if (y(x, yy, z) != cplx{0.0, 0.0})
                        fail(ErrorKind::validation, "k-space has nonzero samples outside the sampling mask");
    ComplexVolume img = idft_centered(y);
    img.domain = Domain::image;
    return img;
}

inline ComplexSlice zero_fill_recon(const ComplexSlice& y, const SamplingMask& mask) {
    require(y.ny == mask.plane.ny && y.nz == mask.plane.nz, "mask plane does not match the slice extents");
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!mask.plane[i] && y[i] != cplx{0.0, 0.0})
            fail(ErrorKind::validation, "k-space has nonzero samples outside the sampling mask");
    return idft_centered(y);
}

/// Inverse DFT along the fully sampled readout axis, then one ky-kz k-space
/// slice per x position.
inline std::vector<ComplexSlice> slice_decompose(const ComplexVolume& y) {
    static constexpr int readout[] = {0};
    ComplexVolume hybrid = idft_centered(y, readout);
    std::vector<ComplexSlice> slices;
    slices.reserve(static_cast<std::size_t>(y.shape.nx));
    for (int x = 0; x < y.shape.nx; ++x) {
        ComplexSlice s = plane_at(hybrid, x);
        s.domain = Domain::kspace;
        slices.push_back(std::move(s));
    }
    return slices;
}

inline ComplexVolume slice_recompose(const std::vector<ComplexSlice>& slices) {
    require(!slices.empty(), "no slices to recompose");
    const Shape3 shape{static_cast<int>(slices.size()), slices.front().ny, slices.front().nz};
    ComplexVolume hybrid(shape, Domain::kspace);
    for (int x = 0; x < shape.nx; ++x) {
        require(slices[static_cast<std::size_t>(x)].same_shape(slices.front()), "slices have different shapes");
        set_plane(hybrid, x, slices[static_cast<std::size_t>(x)]);
    }
    static constexpr int readout[] = {0};
    ComplexVolume y = dft_centered(std::move(hybrid), readout);
    y.domain = Domain::kspace;
    return y;
}

/// Image slices stacked along x back into a volume.
inline ComplexVolume stack_slices(const std::vector<ComplexSlice>& slices, Domain domain = Domain::image) {
    require(!slices.empty(), "no slices to stack");
    ComplexVolume v({static_cast<int>(slices.size()), slices.front().ny, slices.front().nz}, domain);
    for (int x = 0; x < v.shape.nx; ++x) set_plane(v, x, slices[static_cast<std::size_t>(x)]);
    return v;
}

inline std::vector<ComplexSlice> unstack_slices(const ComplexVolume& v) {
    std::vector<ComplexSlice> out;
    out.reserve(static_cast<std::size_t>(v.shape.nx));
    for (int x = 0; x < v.shape.nx; ++x) out.push_back(plane_at(v, x));
    return out;
}

/// Low-resolution phase: Hann-apodised zero-fill of the calibration block.
inline RealSlice lowres_phase(const ComplexSlice& y, const SamplingMask& mask) {
    require(y.ny == mask.plane.ny && y.nz == mask.plane.nz, "mask plane does not match the slice extents");
    const MaskSpec& spec = mask.spec;
    ComplexSlice k(y.ny, y.nz, Domain::kspace);
    const int cy = std::max(spec.calib_y, 1);
    const int cz = std::max(spec.calib_z, 1);
    for (int iz = 0; iz < y.nz; ++iz) {
        for (int iy = 0; iy < y.ny; ++iy) {
            if (!spec.in_calib(iy, iz) || !mask.sampled(iy, iz)) continue;
            const double ky = iy - y.ny / 2;
            const double kz = iz - y.nz / 2;
            const double wy = 0.5 * (1.0 + std::cos(std::numbers::pi * ky / cy));
            const double wz = 0.5 * (1.0 + std::cos(std::numbers::pi * kz / cz));
            k(iy, iz) = y(iy, iz) * wy * wz;
        }
    }
    const ComplexSlice img = idft_centered(std::move(k));
    RealSlice phi(y.ny, y.nz);
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = std::arg(img[i]);
    return phi;
}

}  // namespace cxqsm
