#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "cxqsm/volume.hpp"

namespace cxqsm {

enum class FftDirection { forward, inverse };

namespace detail {

// FFTW planning is not thread-safe, execution with new-array execute is.
class FftwPlanCache {
public:
    static FftwPlanCache& instance() {
        static FftwPlanCache cache;
        return cache;
    }

    fftw_plan get(int n, FftDirection dir) {
        std::lock_guard lock(mutex_);
        const auto key = std::make_pair(n, dir == FftDirection::forward ? 0 : 1);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::vector<cplx> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                       reinterpret_cast<fftw_complex*>(b.data()),
                                       dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

    FftwPlanCache(const FftwPlanCache&) = delete;
    FftwPlanCache& operator=(const FftwPlanCache&) = delete;

private:
    FftwPlanCache() = default;
    ~FftwPlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

/// Unitary DFT with DC at index n/2, applied along one axis of an x-fastest
/// array with the given extents (fastest first).
inline void dft_centered_axis(std::span<cplx> data, std::array<int, 3> extents, int axis, FftDirection dir) {
    require(axis >= 0 && axis < 3, "FFT axis out of range");
    const int n = extents[axis];
    if (n == 1) return;
    std::size_t stride = 1;
    for (int a = 0; a < axis; ++a) stride *= static_cast<std::size_t>(extents[a]);
    std::size_t outer = 1;
    for (int a = axis + 1; a < 3; ++a) outer *= static_cast<std::size_t>(extents[a]);

    fftw_plan plan = detail::FftwPlanCache::instance().get(n, dir);
    thread_local std::vector<cplx> in, out;
    in.resize(static_cast<std::size_t>(n));
    out.resize(static_cast<std::size_t>(n));
    const int c = n / 2;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    const auto un = static_cast<std::size_t>(n);

    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t s = 0; s < stride; ++s) {
            const std::size_t base = s + o * stride * un;
            for (int j = 0; j < n; ++j) in[static_cast<std::size_t>(j)] = data[base + static_cast<std::size_t>((j + c) % n) * stride];
            fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()));
            for (int j = 0; j < n; ++j)
                data[base + static_cast<std::size_t>(j) * stride] = out[static_cast<std::size_t>((j + n - c) % n)] * scale;
        }
    }
}

inline void dft_centered_inplace(std::span<cplx> data, std::array<int, 3> extents, std::span<const int> axes,
                                 FftDirection dir) {
    require(!axes.empty(), "FFT axis list is empty");
    for (int a : axes) dft_centered_axis(data, extents, a, dir);
}

namespace detail {

inline void check_axes(std::span<const int> axes, int rank) {
    require(!axes.empty(), "FFT axis list is empty");
    for (int a : axes) require(a >= 0 && a < rank, "FFT axis out of range");
}

}  // namespace detail

inline ComplexVolume dft_centered(ComplexVolume v, std::span<const int> axes) {
    detail::check_axes(axes, 3);
    dft_centered_inplace(v.data, {v.shape.nx, v.shape.ny, v.shape.nz}, axes, FftDirection::forward);
    if (axes.size() == 3) v.domain = Domain::kspace;
    return v;
}

inline ComplexVolume idft_centered(ComplexVolume v, std::span<const int> axes) {
    detail::check_axes(axes, 3);
    dft_centered_inplace(v.data, {v.shape.nx, v.shape.ny, v.shape.nz}, axes, FftDirection::inverse);
    if (axes.size() == 3) v.domain = Domain::image;
    return v;
}

inline ComplexVolume dft_centered(ComplexVolume v) {
    static constexpr int all[] = {0, 1, 2};
    return dft_centered(std::move(v), all);
}

inline ComplexVolume idft_centered(ComplexVolume v) {
    static constexpr int all[] = {0, 1, 2};
    return idft_centered(std::move(v), all);
}

/// Slice axes: 0 = y, 1 = z.
inline ComplexSlice dft_centered(ComplexSlice s, std::span<const int> axes) {
    detail::check_axes(axes, 2);
    dft_centered_inplace(s.data, {s.ny, s.nz, 1}, axes, FftDirection::forward);
    if (axes.size() == 2) s.domain = Domain::kspace;
    return s;
}

inline ComplexSlice idft_centered(ComplexSlice s, std::span<const int> axes) {
    detail::check_axes(axes, 2);
    dft_centered_inplace(s.data, {s.ny, s.nz, 1}, axes, FftDirection::inverse);
    if (axes.size() == 2) s.domain = Domain::image;
    return s;
}

inline ComplexSlice dft_centered(ComplexSlice s) {
    static constexpr int all[] = {0, 1};
    return dft_centered(std::move(s), all);
}

inline ComplexSlice idft_centered(ComplexSlice s) {
    static constexpr int all[] = {0, 1};
    return idft_centered(std::move(s), all);
}

/// In-place 2D transform of a raw (ny, nz) y-fastest buffer.
inline void dft2_inplace(std::span<cplx> data, int ny, int nz, FftDirection dir) {
    static constexpr int all[] = {0, 1};
    dft_centered_inplace(data, {ny, nz, 1}, all, dir);
}

}  // namespace cxqsm
