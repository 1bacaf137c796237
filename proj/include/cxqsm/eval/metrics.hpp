#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxqsm/volume.hpp"

namespace cxqsm::eval {

/// PSNR of identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

namespace detail {

inline double magnitude_of(double v) { return std::abs(v); }
inline double magnitude_of(const cplx& v) { return std::abs(v); }
inline double squared_diff(double a, double b) { return (a - b) * (a - b); }
inline double squared_diff(const cplx& a, const cplx& b) { return std::norm(a - b); }

}  // namespace detail

/// Root mean square of |test - ref|.
template <class T>
double rmse(std::span<const T> test, std::span<const T> ref) {
    require(test.size() == ref.size(), "metric inputs differ in size");
    require(!ref.empty(), "metric inputs are empty");
    double se = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) se += detail::squared_diff(test[i], ref[i]);
    return std::sqrt(se / static_cast<double>(ref.size()));
}

template <class T>
double peak(std::span<const T> ref) {
    double p = 0.0;
    for (const T& v : ref) p = std::max(p, detail::magnitude_of(v));
    return p;
}

/// 20 log10(range / RMSE); range defaults to max |ref|. Complex inputs are
/// compared in the complex plane.
template <class T>
double psnr(std::span<const T> test, std::span<const T> ref, std::optional<double> data_range = std::nullopt) {
    const double range = data_range ? *data_range : peak(ref);
    if (!(range > 0.0)) fail(ErrorKind::validation, "PSNR data range must be positive");
    const double e = rmse(test, ref);
    if (e == 0.0) return kPsnrIdentical;
    return 20.0 * std::log10(range / e);
}

template <class A>
double psnr(const A& test, const A& ref, std::optional<double> data_range = std::nullopt) {
    using T = typename decltype(test.data)::value_type;
    return psnr(std::span<const T>(test.data), std::span<const T>(ref.data), data_range);
}

/// RMS of the wrapped phase difference over voxels where `mask` is set.
inline double phase_rmse(std::span<const cplx> test, std::span<const cplx> ref, std::span<const std::uint8_t> mask) {
    require(test.size() == ref.size() && mask.size() == ref.size(), "metric inputs differ in size");
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < ref.size(); ++i)
        if (mask[i]) {
            const double d = wrap_phase(std::arg(test[i]) - std::arg(ref[i]));
            se += d * d;
            ++n;
        }
    if (n == 0) fail(ErrorKind::validation, "phase RMSE region is empty");
    return std::sqrt(se / static_cast<double>(n));
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    std::optional<double> data_range;  // default: max(ref) - min(ref)
};

/// Normalised 2D Gaussian window, row-major.
inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    const double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int r = 0; r < size; ++r)
        for (int q = 0; q < size; ++q) {
            const double v = std::exp(-((r - c) * (r - c) + (q - c) * (q - c)) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(r) * size + q] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;
    return w;
}

/// Mean SSIM over every window position fully inside a (rows x cols)
/// row-major image; local moments are Gaussian-weighted.
inline double ssim(std::span<const double> test, std::span<const double> ref, int rows, int cols,
                   const SsimParams& p = {}) {
    require(test.size() == ref.size() && ref.size() == static_cast<std::size_t>(rows) * cols, "SSIM inputs differ in size");
    if (p.window > rows || p.window > cols)
        fail(ErrorKind::validation, "SSIM window is larger than the image");
    double range = 0.0;
    if (p.data_range) {
        range = *p.data_range;
    } else {
        const auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
        range = *hi - *lo;
    }
    if (!(range > 0.0)) fail(ErrorKind::validation, "SSIM data range must be positive");
    const double c1 = (p.k1 * range) * (p.k1 * range), c2 = (p.k2 * range) * (p.k2 * range);
    const std::vector<double> w = gaussian_window(p.window, p.sigma);
    double total = 0.0;
    int count = 0;
    for (int r0 = 0; r0 + p.window <= rows; ++r0)
        for (int q0 = 0; q0 + p.window <= cols; ++q0) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int r = 0; r < p.window; ++r)
                for (int q = 0; q < p.window; ++q) {
                    const double g = w[static_cast<std::size_t>(r) * p.window + q];
                    const std::size_t i = static_cast<std::size_t>(r0 + r) * cols + (q0 + q);
                    const double a = test[i], b = ref[i];
                    mx += g * a;
                    my += g * b;
                    xx += g * a * a;
                    yy += g * b * b;
                    xy += g * a * b;
                }
            const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

/// SSIM of magnitude images for one (y, z) slice.
inline double ssim(const RealSlice& test, const RealSlice& ref, const SsimParams& p = {}) {
    require(test.same_shape(ref), "SSIM inputs differ in shape");
    // Plane data is y-fastest: rows are z, columns are y.
    return ssim(test.data, ref.data, ref.nz, ref.ny, p);
}

/// Mean over x of the per-slice magnitude SSIM, with the data range taken
/// from the whole reference volume unless given.
inline double ssim_volume(const ComplexVolume& test, const ComplexVolume& ref, SsimParams p = {}) {
    require(test.shape == ref.shape, "SSIM inputs differ in shape");
    const RealVolume mt = magnitude(test), mr = magnitude(ref);
    if (!p.data_range) {
        const auto [lo, hi] = std::minmax_element(mr.data.begin(), mr.data.end());
        p.data_range = *hi - *lo;
    }
    double total = 0.0;
    for (int x = 0; x < ref.shape.nx; ++x) total += ssim(plane_at(mt, x), plane_at(mr, x), p);
    return total / ref.shape.nx;
}

/// Same slice average on signed real volumes (susceptibility, field maps).
inline double ssim_volume(const RealVolume& test, const RealVolume& ref, SsimParams p = {}) {
    require(test.shape == ref.shape, "SSIM inputs differ in shape");
    if (!p.data_range) {
        const auto [lo, hi] = std::minmax_element(ref.data.begin(), ref.data.end());
        p.data_range = *hi - *lo;
    }
    double total = 0.0;
    for (int x = 0; x < ref.shape.nx; ++x) total += ssim(plane_at(test, x), plane_at(ref, x), p);
    return total / ref.shape.nx;
}

struct RoiStats {
    double mean = 0.0;
    double std = 0.0;  // population
    std::size_t count = 0;
};

inline RoiStats roi_stats(std::span<const double> values, std::span<const std::uint8_t> region) {
    require(values.size() == region.size(), "region does not match the volume");
    RoiStats s;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (region[i]) {
            s.mean += values[i];
            ++s.count;
        }
    if (s.count == 0) fail(ErrorKind::validation, "region is empty");
    s.mean /= static_cast<double>(s.count);
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (region[i]) ss += (values[i] - s.mean) * (values[i] - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.count));
    return s;
}

/// Named regions over one volume shape.
struct RoiMask {
    Shape3 shape;
    std::map<std::string, BoolVolume> regions;
};

inline std::map<std::string, RoiStats> roi_stats(const RealVolume& v, const RoiMask& rois) {
    std::map<std::string, RoiStats> out;
    for (const auto& [name, region] : rois.regions) {
        if (!(region.shape == v.shape)) fail(ErrorKind::validation, "region '" + name + "' does not match the volume");
        out[name] = roi_stats(std::span<const double>(v.data), std::span<const std::uint8_t>(region.data));
    }
    return out;
}

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double sse = 0.0;
};

/// Ordinary least squares y ~ slope x + intercept. When y is constant
/// (SS_tot = 0) R^2 is defined as 0.
inline RegressionResult linreg(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "regression inputs differ in size");
    if (x.size() < 2) fail(ErrorKind::validation, "regression needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) fail(ErrorKind::validation, "regression x values have zero variance");
    RegressionResult r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (r.slope * x[i] + r.intercept);
        r.sse += e * e;
    }
    r.r_squared = syy > 0.0 ? 1.0 - r.sse / syy : 0.0;
    return r;
}

/// Values of `v` where `mask` is set, in index order.
template <class T>
std::vector<T> masked_values(const Volume<T>& v, const BoolVolume& mask) {
    require(v.shape == mask.shape, "mask does not match the volume");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (mask[i]) out.push_back(v[i]);
    return out;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size() && a.size() >= 2, "correlation needs two equal-length series");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0 && sbb > 0.0)) fail(ErrorKind::validation, "correlation of a constant series");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace cxqsm::eval
