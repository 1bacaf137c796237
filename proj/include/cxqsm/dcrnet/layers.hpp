#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cxqsm/errors.hpp"
#include "cxqsm/fft.hpp"
#include "cxqsm/volume.hpp"

namespace cxqsm::dcr {

/// (batch, channels, height, width), width fastest. A slice enters as
/// height = nz, width = ny, so its y-fastest buffer is one plane unchanged.
struct ComplexTensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<cplx> data;

    ComplexTensor() = default;
    ComplexTensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        require(n_ > 0 && c_ > 0 && h_ > 0 && w_ > 0, "tensor dimensions must be positive");
        data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, cplx{});
    }

    std::size_t plane_size() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    std::size_t size() const { return data.size(); }
    cplx* plane(int b, int ch) { return data.data() + (static_cast<std::size_t>(b) * c + ch) * plane_size(); }
    const cplx* plane(int b, int ch) const { return data.data() + (static_cast<std::size_t>(b) * c + ch) * plane_size(); }
    bool same_dims(const ComplexTensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// How a complex kernel combines with complex features. `printed` is
/// Y_R = X_R*W_R + X_I*W_I, Y_I = X_R*W_I + X_I*W_R, the decomposition as it
/// appears in the method description (it is not complex multiplication, and
/// only real-linear). `complex_multiply` uses Y = X*W with the usual sign.
enum class ConvConvention { printed, complex_multiply };

inline const char* to_string(ConvConvention c) {
    return c == ConvConvention::printed ? "printed" : "complex_multiply";
}

inline ConvConvention convention_from_string(const std::string& s) {
    if (s == "printed") return ConvConvention::printed;
    if (s == "complex_multiply") return ConvConvention::complex_multiply;
    fail(ErrorKind::validation, "unknown convolution convention '" + s + "'");
}

/// 3x3 complex convolution (cross-correlation, zero padding 1, stride 1).
/// weight index: ((out * c_in + in) * 3 + ky) * 3 + kx.
struct ComplexConv {
    int c_out = 0, c_in = 0;
    std::vector<cplx> weight;
    std::vector<cplx> bias;

    ComplexConv() = default;
    ComplexConv(int out, int in) : c_out(out), c_in(in), weight(static_cast<std::size_t>(out) * in * 9), bias(static_cast<std::size_t>(out)) {
        require(out > 0 && in > 0, "convolution channel counts must be positive");
    }
    cplx& w(int o, int i, int ky, int kx) { return weight[((static_cast<std::size_t>(o) * c_in + i) * 3 + ky) * 3 + kx]; }
    const cplx& w(int o, int i, int ky, int kx) const {
        return weight[((static_cast<std::size_t>(o) * c_in + i) * 3 + ky) * 3 + kx];
    }
};

namespace detail {

// acc += combine(x, k) over the rows/cols where the shifted input exists.
template <bool Printed>
inline void correlate_plane(double* out, const double* in, cplx k, int h, int w, int dy, int dx) {
    const double kr = k.real(), ki = k.imag();
    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
    for (int y = y0; y < y1; ++y) {
        double* o = out + 2 * (static_cast<std::size_t>(y) * w);
        const double* s = in + 2 * (static_cast<std::size_t>(y + dy) * w + dx);
        for (int x = x0; x < x1; ++x) {
            const double xr = s[2 * x], xi = s[2 * x + 1];
            if constexpr (Printed) {
                o[2 * x] += xr * kr + xi * ki;
                o[2 * x + 1] += xr * ki + xi * kr;
            } else {
                o[2 * x] += xr * kr - xi * ki;
                o[2 * x + 1] += xr * ki + xi * kr;
            }
        }
    }
}

// gin(y+dy, x+dx) += adjoint-combine(g(y, x), k).
template <bool Printed>
inline void correlate_plane_adjoint(double* gin, const double* g, cplx k, int h, int w, int dy, int dx) {
    const double kr = k.real(), ki = k.imag();
    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
    for (int y = y0; y < y1; ++y) {
        const double* gy = g + 2 * (static_cast<std::size_t>(y) * w);
        double* t = gin + 2 * (static_cast<std::size_t>(y + dy) * w + dx);
        for (int x = x0; x < x1; ++x) {
            const double gr = gy[2 * x], gi = gy[2 * x + 1];
            if constexpr (Printed) {
                t[2 * x] += gr * kr + gi * ki;
                t[2 * x + 1] += gr * ki + gi * kr;
            } else {  // g * conj(k)
                t[2 * x] += gr * kr + gi * ki;
                t[2 * x + 1] += gi * kr - gr * ki;
            }
        }
    }
}

// Gradient with respect to one kernel tap, summed over the plane.
template <bool Printed>
inline cplx correlate_plane_kernel_grad(const double* g, const double* in, int h, int w, int dy, int dx) {
    double ar = 0.0, ai = 0.0;
    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
    for (int y = y0; y < y1; ++y) {
        const double* gy = g + 2 * (static_cast<std::size_t>(y) * w);
        const double* s = in + 2 * (static_cast<std::size_t>(y + dy) * w + dx);
        for (int x = x0; x < x1; ++x) {
            const double gr = gy[2 * x], gi = gy[2 * x + 1];
            const double xr = s[2 * x], xi = s[2 * x + 1];
            if constexpr (Printed) {
                ar += gr * xr + gi * xi;
                ai += gr * xi + gi * xr;
            } else {  // g * conj(x)
                ar += gr * xr + gi * xi;
                ai += gi * xr - gr * xi;
            }
        }
    }
    return {ar, ai};
}

inline double* raw(cplx* p) { return reinterpret_cast<double*>(p); }
inline const double* raw(const cplx* p) { return reinterpret_cast<const double*>(p); }

}  // namespace detail

inline ComplexTensor complex_conv2d(const ComplexTensor& x, const ComplexConv& layer,
                                    ConvConvention conv = ConvConvention::printed) {
    if (x.c != layer.c_in) fail(ErrorKind::architecture, "convolution expects " + std::to_string(layer.c_in) +
                                                             " input channels, got " + std::to_string(x.c));
    ComplexTensor y(x.n, layer.c_out, x.h, x.w);
    for (int b = 0; b < x.n; ++b)
        for (int o = 0; o < layer.c_out; ++o) {
            cplx* out = y.plane(b, o);
            std::fill(out, out + y.plane_size(), layer.bias[static_cast<std::size_t>(o)]);
            for (int i = 0; i < layer.c_in; ++i)
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const cplx k = layer.w(o, i, ky, kx);
                        if (conv == ConvConvention::printed)
                            detail::correlate_plane<true>(detail::raw(out), detail::raw(x.plane(b, i)), k, x.h, x.w, ky - 1, kx - 1);
                        else
                            detail::correlate_plane<false>(detail::raw(out), detail::raw(x.plane(b, i)), k, x.h, x.w, ky - 1, kx - 1);
                    }
        }
    return y;
}

/// Accumulates kernel and bias gradients into `grad` and returns the input
/// gradient (skipped when want_input is false).
inline ComplexTensor complex_conv2d_backward(const ComplexTensor& x, const ComplexConv& layer, const ComplexTensor& gy,
                                             ComplexConv& grad, ConvConvention conv, bool want_input = true) {
    ComplexTensor gx;
    if (want_input) gx = ComplexTensor(x.n, x.c, x.h, x.w);
    const bool printed = conv == ConvConvention::printed;
    for (int b = 0; b < x.n; ++b)
        for (int o = 0; o < layer.c_out; ++o) {
            const cplx* g = gy.plane(b, o);
            cplx sum{};
            for (std::size_t p = 0; p < gy.plane_size(); ++p) sum += g[p];
            grad.bias[static_cast<std::size_t>(o)] += sum;
            for (int i = 0; i < layer.c_in; ++i)
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dy = ky - 1, dx = kx - 1;
                        const double* gr = detail::raw(g);
                        const double* in = detail::raw(x.plane(b, i));
                        grad.w(o, i, ky, kx) += printed ? detail::correlate_plane_kernel_grad<true>(gr, in, x.h, x.w, dy, dx)
                                                        : detail::correlate_plane_kernel_grad<false>(gr, in, x.h, x.w, dy, dx);
                        if (!want_input) continue;
                        const cplx k = layer.w(o, i, ky, kx);
                        if (printed)
                            detail::correlate_plane_adjoint<true>(detail::raw(gx.plane(b, i)), gr, k, x.h, x.w, dy, dx);
                        else
                            detail::correlate_plane_adjoint<false>(detail::raw(gx.plane(b, i)), gr, k, x.h, x.w, dy, dx);
                    }
        }
    return gx;
}

/// Batch norm applied to the real and imaginary planes separately, each with
/// its own per-channel scale, offset and running statistics.
struct ComplexBatchNorm {
    int channels = 0;
    double eps = 1e-5;
    double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
    std::vector<double> gamma_re, beta_re, gamma_im, beta_im;
    std::vector<double> mean_re, var_re, mean_im, var_im;

    ComplexBatchNorm() = default;
    explicit ComplexBatchNorm(int c)
        : channels(c), gamma_re(c, 1.0), beta_re(c, 0.0), gamma_im(c, 1.0), beta_im(c, 0.0),
          mean_re(c, 0.0), var_re(c, 1.0), mean_im(c, 0.0), var_im(c, 1.0) {
        require(c > 0, "batch norm needs at least one channel");
    }
};

/// Per channel and part: normalised input and 1/sqrt(var + eps).
struct BnCache {
    ComplexTensor xhat;
    std::vector<double> inv_std_re, inv_std_im;
    bool training = true;
};

inline ComplexTensor complex_bn(const ComplexTensor& x, ComplexBatchNorm& bn, bool training, BnCache* cache = nullptr,
                                bool update_running = true) {
    if (x.c != bn.channels) fail(ErrorKind::architecture, "batch norm channel count mismatch");
    ComplexTensor y(x.n, x.c, x.h, x.w);
    BnCache local;
    BnCache& c = cache ? *cache : local;
    c.training = training;
    c.xhat = ComplexTensor(x.n, x.c, x.h, x.w);
    c.inv_std_re.assign(static_cast<std::size_t>(x.c), 0.0);
    c.inv_std_im.assign(static_cast<std::size_t>(x.c), 0.0);
    const double count = static_cast<double>(x.n) * static_cast<double>(x.plane_size());
    for (int ch = 0; ch < x.c; ++ch) {
        const auto k = static_cast<std::size_t>(ch);
        double mr, mi, vr, vi;
        if (training) {
            double sr = 0.0, si = 0.0;
            for (int b = 0; b < x.n; ++b) {
                const cplx* p = x.plane(b, ch);
                for (std::size_t q = 0; q < x.plane_size(); ++q) {
                    sr += p[q].real();
                    si += p[q].imag();
                }
            }
            mr = sr / count;
            mi = si / count;
            double ssr = 0.0, ssi = 0.0;
            for (int b = 0; b < x.n; ++b) {
                const cplx* p = x.plane(b, ch);
                for (std::size_t q = 0; q < x.plane_size(); ++q) {
                    ssr += (p[q].real() - mr) * (p[q].real() - mr);
                    ssi += (p[q].imag() - mi) * (p[q].imag() - mi);
                }
            }
            vr = ssr / count;
            vi = ssi / count;
            if (update_running) {
                const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
                bn.mean_re[k] = bn.momentum * bn.mean_re[k] + (1.0 - bn.momentum) * mr;
                bn.mean_im[k] = bn.momentum * bn.mean_im[k] + (1.0 - bn.momentum) * mi;
                bn.var_re[k] = bn.momentum * bn.var_re[k] + (1.0 - bn.momentum) * vr * unbias;
                bn.var_im[k] = bn.momentum * bn.var_im[k] + (1.0 - bn.momentum) * vi * unbias;
            }
        } else {
            mr = bn.mean_re[k];
            mi = bn.mean_im[k];
            vr = bn.var_re[k];
            vi = bn.var_im[k];
        }
        const double isr = 1.0 / std::sqrt(vr + bn.eps), isi = 1.0 / std::sqrt(vi + bn.eps);
        c.inv_std_re[k] = isr;
        c.inv_std_im[k] = isi;
        for (int b = 0; b < x.n; ++b) {
            const cplx* p = x.plane(b, ch);
            cplx* h = c.xhat.plane(b, ch);
            cplx* o = y.plane(b, ch);
            for (std::size_t q = 0; q < x.plane_size(); ++q) {
                const double hr = (p[q].real() - mr) * isr, hi = (p[q].imag() - mi) * isi;
                h[q] = {hr, hi};
                o[q] = {bn.gamma_re[k] * hr + bn.beta_re[k], bn.gamma_im[k] * hi + bn.beta_im[k]};
            }
        }
    }
    return y;
}

inline ComplexTensor complex_bn_backward(const BnCache& c, const ComplexBatchNorm& bn, const ComplexTensor& gy,
                                         ComplexBatchNorm& grad) {
    ComplexTensor gx(gy.n, gy.c, gy.h, gy.w);
    const double count = static_cast<double>(gy.n) * static_cast<double>(gy.plane_size());
    for (int ch = 0; ch < gy.c; ++ch) {
        const auto k = static_cast<std::size_t>(ch);
        double sgr = 0.0, sgi = 0.0, sghr = 0.0, sghi = 0.0;
        for (int b = 0; b < gy.n; ++b) {
            const cplx* g = gy.plane(b, ch);
            const cplx* h = c.xhat.plane(b, ch);
            for (std::size_t q = 0; q < gy.plane_size(); ++q) {
                sgr += g[q].real();
                sgi += g[q].imag();
                sghr += g[q].real() * h[q].real();
                sghi += g[q].imag() * h[q].imag();
            }
        }
        grad.beta_re[k] += sgr;
        grad.beta_im[k] += sgi;
        grad.gamma_re[k] += sghr;
        grad.gamma_im[k] += sghi;
        const double ar = bn.gamma_re[k] * c.inv_std_re[k], ai = bn.gamma_im[k] * c.inv_std_im[k];
        for (int b = 0; b < gy.n; ++b) {
            const cplx* g = gy.plane(b, ch);
            const cplx* h = c.xhat.plane(b, ch);
            cplx* o = gx.plane(b, ch);
            for (std::size_t q = 0; q < gy.plane_size(); ++q) {
                if (c.training)
                    o[q] = {ar * (g[q].real() - sgr / count - h[q].real() * sghr / count),
                            ai * (g[q].imag() - sgi / count - h[q].imag() * sghi / count)};
                else
                    o[q] = {ar * g[q].real(), ai * g[q].imag()};
            }
        }
    }
    return gx;
}

inline ComplexTensor complex_relu(ComplexTensor x) {
    for (cplx& v : x.data) v = {std::max(v.real(), 0.0), std::max(v.imag(), 0.0)};
    return x;
}

/// Gradient through ReLU, given the ReLU input.
inline ComplexTensor complex_relu_backward(const ComplexTensor& pre, ComplexTensor g) {
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data[i] = {pre.data[i].real() > 0.0 ? g.data[i].real() : 0.0, pre.data[i].imag() > 0.0 ? g.data[i].imag() : 0.0};
    return g;
}

/// Per-sample acquired k-space and sampling pattern for the consistency layer.
/// mask holds one h*w plane per sample (1 = acquired).
struct DcInput {
    ComplexTensor kspace;
    std::vector<std::uint8_t> mask;
};

namespace detail {

inline void plane_dft(cplx* p, int h, int w, FftDirection dir) {
    dft2_inplace(std::span<cplx>(p, static_cast<std::size_t>(h) * static_cast<std::size_t>(w)), w, h, dir);
}

}  // namespace detail

/// The k-space blend alone: on acquired samples Y <- (lambda X0 + Y) / (1 + lambda),
/// elsewhere Y is returned untouched.
inline ComplexTensor dc_blend(ComplexTensor y, const DcInput& dc, double lambda) {
    require(dc.kspace.same_dims(y), "acquired k-space does not match the image tensor");
    require(dc.mask.size() == static_cast<std::size_t>(y.n) * y.plane_size(), "sampling mask size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i)
        if (dc.mask[i]) y.data[i] = (lambda * dc.kspace.data[i] + y.data[i]) / (1.0 + lambda);
    return y;
}

/// Y = F(image); on acquired samples Y <- (lambda X0 + Y) / (1 + lambda),
/// elsewhere Y is kept; returns F^-1(Y). Also returns F(image) for backward.
inline ComplexTensor data_consistency(const ComplexTensor& image, const DcInput& dc, double lambda,
                                      ComplexTensor* kspace_out = nullptr) {
    require(image.c == 1, "data consistency works on single-channel images");
    require(dc.kspace.same_dims(image), "acquired k-space does not match the image tensor");
    require(dc.mask.size() == static_cast<std::size_t>(image.n) * image.plane_size(), "sampling mask size mismatch");
    require(lambda >= 0.0, "data-consistency weight must be non-negative");
    ComplexTensor k = image;
    for (int b = 0; b < image.n; ++b) detail::plane_dft(k.plane(b, 0), image.h, image.w, FftDirection::forward);
    if (kspace_out) *kspace_out = k;
    ComplexTensor out = dc_blend(std::move(k), dc, lambda);
    for (int b = 0; b < image.n; ++b) detail::plane_dft(out.plane(b, 0), image.h, image.w, FftDirection::inverse);
    return out;
}

/// Returns the image gradient and adds d loss / d lambda to *grad_lambda.
inline ComplexTensor data_consistency_backward(const ComplexTensor& g_out, const DcInput& dc, double lambda,
                                               const ComplexTensor& image_kspace, double* grad_lambda) {
    ComplexTensor g = g_out;
    for (int b = 0; b < g.n; ++b) detail::plane_dft(g.plane(b, 0), g.h, g.w, FftDirection::forward);
    double gl = 0.0;
    const double scale = 1.0 / (1.0 + lambda);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (dc.mask[i]) {
            const cplx d = (dc.kspace.data[i] - image_kspace.data[i]) * scale * scale;
            gl += g.data[i].real() * d.real() + g.data[i].imag() * d.imag();
            g.data[i] *= scale;
        }
    if (grad_lambda) *grad_lambda += gl;
    for (int b = 0; b < g.n; ++b) detail::plane_dft(g.plane(b, 0), g.h, g.w, FftDirection::inverse);
    return g;
}

}  // namespace cxqsm::dcr
