#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "cxqsm/volume.hpp"

namespace cxqsm {

// ---------------------------------------------------------------------------
// Orthonormal Daubechies-4 (four-tap, two vanishing moments) wavelet with
// periodic boundary. Multilevel 2D decomposition in Mallat layout: after
// `levels` steps the approximation band occupies the leading
// (ny >> levels) x (nz >> levels) block.
// ---------------------------------------------------------------------------

struct WaveletSpec {
    int levels = 3;
};

namespace detail {

inline const std::array<double, 4>& db4_lowpass() {
    static const std::array<double, 4> h = [] {
        const double s3 = std::sqrt(3.0);
        const double d = 4.0 * std::sqrt(2.0);
        return std::array<double, 4>{(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d};
    }();
    return h;
}

inline const std::array<double, 4>& db4_highpass() {
    static const std::array<double, 4> g = [] {
        const auto& h = db4_lowpass();
        return std::array<double, 4>{h[3], -h[2], h[1], -h[0]};
    }();
    return g;
}

// One analysis step on n strided samples starting at `base`.
template <class T>
void dwt_step(std::span<T> data, std::size_t base, std::size_t stride, int n, std::vector<T>& tmp) {
    const auto& h = db4_lowpass();
    const auto& g = db4_highpass();
    const int half = n / 2;
    tmp.assign(static_cast<std::size_t>(n), T{});
    for (int i = 0; i < half; ++i) {
        T a{}, d{};
        for (int k = 0; k < 4; ++k) {
            const T& x = data[base + static_cast<std::size_t>((2 * i + k) % n) * stride];
            a += h[static_cast<std::size_t>(k)] * x;
            d += g[static_cast<std::size_t>(k)] * x;
        }
        tmp[static_cast<std::size_t>(i)] = a;
        tmp[static_cast<std::size_t>(half + i)] = d;
    }
    for (int i = 0; i < n; ++i) data[base + static_cast<std::size_t>(i) * stride] = tmp[static_cast<std::size_t>(i)];
}

// Synthesis step: the transpose of dwt_step.
template <class T>
void idwt_step(std::span<T> data, std::size_t base, std::size_t stride, int n, std::vector<T>& tmp) {
    const auto& h = db4_lowpass();
    const auto& g = db4_highpass();
    const int half = n / 2;
    tmp.assign(static_cast<std::size_t>(n), T{});
    for (int i = 0; i < half; ++i) {
        const T a = data[base + static_cast<std::size_t>(i) * stride];
        const T d = data[base + static_cast<std::size_t>(half + i) * stride];
        for (int k = 0; k < 4; ++k)
            tmp[static_cast<std::size_t>((2 * i + k) % n)] += h[static_cast<std::size_t>(k)] * a + g[static_cast<std::size_t>(k)] * d;
    }
    for (int i = 0; i < n; ++i) data[base + static_cast<std::size_t>(i) * stride] = tmp[static_cast<std::size_t>(i)];
}

inline void check_wavelet_extents(int ny, int nz, int levels) {
    require(levels >= 1, "wavelet levels must be positive");
    const int q = 1 << levels;
    if (ny % q != 0 || nz % q != 0)
        fail(ErrorKind::validation, "wavelet: extents must be divisible by 2^levels");
}

}  // namespace detail

/// In-place forward transform of a (ny, nz) y-fastest buffer.
template <class T>
void wavelet_fwd_inplace(std::span<T> data, int ny, int nz, WaveletSpec spec = {}) {
    detail::check_wavelet_extents(ny, nz, spec.levels);
    std::vector<T> tmp;
    int by = ny, bz = nz;
    for (int level = 0; level < spec.levels; ++level) {
        for (int z = 0; z < bz; ++z) detail::dwt_step(data, static_cast<std::size_t>(z) * static_cast<std::size_t>(ny), 1, by, tmp);
        for (int y = 0; y < by; ++y) detail::dwt_step(data, static_cast<std::size_t>(y), static_cast<std::size_t>(ny), bz, tmp);
        by /= 2;
        bz /= 2;
    }
}

template <class T>
void wavelet_inv_inplace(std::span<T> data, int ny, int nz, WaveletSpec spec = {}) {
    detail::check_wavelet_extents(ny, nz, spec.levels);
    std::vector<T> tmp;
    for (int level = spec.levels - 1; level >= 0; --level) {
        const int by = ny >> level;
        const int bz = nz >> level;
        for (int y = 0; y < by; ++y) detail::idwt_step(data, static_cast<std::size_t>(y), static_cast<std::size_t>(ny), bz, tmp);
        for (int z = 0; z < bz; ++z) detail::idwt_step(data, static_cast<std::size_t>(z) * static_cast<std::size_t>(ny), 1, by, tmp);
    }
}

/// Real and imaginary parts are transformed independently (the filters are real).
template <class T>
Plane<T> wavelet_fwd(Plane<T> x, WaveletSpec spec = {}) {
    wavelet_fwd_inplace<T>(x.data, x.ny, x.nz, spec);
    x.domain = Domain::wavelet;
    return x;
}

template <class T>
Plane<T> wavelet_inv(Plane<T> c, WaveletSpec spec = {}) {
    wavelet_inv_inplace<T>(c.data, c.ny, c.nz, spec);
    c.domain = Domain::image;
    return c;
}

/// True for coefficients outside the coarse approximation block.
inline bool is_detail_coefficient(int y, int z, int ny, int nz, WaveletSpec spec = {}) {
    return y >= (ny >> spec.levels) || z >= (nz >> spec.levels);
}

// ---------------------------------------------------------------------------
// Forward differences with replicate-edge (Neumann) boundary: the last
// difference along each axis is zero, so constants lie in the null space.
// ---------------------------------------------------------------------------

struct DiffOperator {
    std::vector<int> axes{0, 1};   // 0 = y, 1 = z
};

template <class T>
std::vector<Plane<T>> finite_diff(const Plane<T>& x, const DiffOperator& op = {}) {
    std::vector<Plane<T>> out;
    for (int axis : op.axes) {
        require(axis == 0 || axis == 1, "difference axis out of range");
        Plane<T> d(x.ny, x.nz, x.domain);
        for (int z = 0; z < x.nz; ++z)
            for (int y = 0; y < x.ny; ++y) {
                if (axis == 0 && y + 1 < x.ny) d(y, z) = x(y + 1, z) - x(y, z);
                if (axis == 1 && z + 1 < x.nz) d(y, z) = x(y, z + 1) - x(y, z);
            }
        out.push_back(std::move(d));
    }
    return out;
}

/// Exact adjoint of finite_diff.
template <class T>
Plane<T> finite_diff_adj(const std::vector<Plane<T>>& d, const DiffOperator& op = {}) {
    require(d.size() == op.axes.size() && !d.empty(), "difference stack does not match operator axes");
    const int ny = d.front().ny, nz = d.front().nz;
    Plane<T> out(ny, nz, d.front().domain);
    for (std::size_t a = 0; a < op.axes.size(); ++a) {
        const int axis = op.axes[a];
        const Plane<T>& g = d[a];
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y) {
                if (axis == 0) {
                    if (y > 0) out(y, z) += g(y - 1, z);
                    if (y + 1 < ny) out(y, z) -= g(y, z);
                } else {
                    if (z > 0) out(y, z) += g(y, z - 1);
                    if (z + 1 < nz) out(y, z) -= g(y, z);
                }
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Proximal maps and potentials.
// ---------------------------------------------------------------------------

/// Proximal map of t*|.|: shrinks the modulus by t and keeps the phase.
inline cplx soft_threshold(cplx x, double t) {
    const double a = std::abs(x);
    if (a <= t) return {0.0, 0.0};
    return x * ((a - t) / a);
}

inline double soft_threshold(double x, double t) {
    const double a = std::abs(x);
    if (a <= t) return 0.0;
    return x > 0 ? a - t : t - a;
}

template <class T>
void soft_threshold_inplace(std::span<T> x, double t) {
    require(t >= 0.0, "threshold must be non-negative");
    for (auto& v : x) v = soft_threshold(v, t);
}

template <class T>
Plane<T> soft_threshold(Plane<T> x, double t) {
    soft_threshold_inplace<T>(x.data, t);
    return x;
}

struct EdgePotential {
    double value;    // delta^2 (sqrt(1 + |x|^2/delta^2) - 1)
    double weight;   // 1 / sqrt(1 + |x|^2/delta^2), so dpsi/d|x| = |x| * weight
};

inline EdgePotential edge_psi(double abs_x, double delta) {
    require(delta > 0.0, "edge potential delta must be positive");
    const double s = std::sqrt(1.0 + (abs_x * abs_x) / (delta * delta));
    return {delta * delta * (s - 1.0), 1.0 / s};
}

inline EdgePotential edge_psi(cplx x, double delta) { return edge_psi(std::abs(x), delta); }

}  // namespace cxqsm
