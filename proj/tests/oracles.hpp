#pragma once

// Brute-force reference implementations written straight from the
// definitions, shared by the unit tests and the acceptance runner.

#include <cmath>
#include <vector>

#include "cxqsm/dcrnet/layers.hpp"

namespace oracle {

using RealImage = std::vector<std::vector<double>>;  // [row][col]

// Real 3x3 cross-correlation with zero padding 1.
inline RealImage real_conv3x3(const RealImage& x, const double k[3][3]) {
    const int h = static_cast<int>(x.size()), w = static_cast<int>(x[0].size());
    RealImage y(h, std::vector<double>(w, 0.0));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int rr = r + ky - 1, cc = c + kx - 1;
                    if (rr >= 0 && rr < h && cc >= 0 && cc < w) y[r][c] += k[ky][kx] * x[rr][cc];
                }
    return y;
}

// Four real convolutions and two additions:
// Y_R = X_R*W_R + X_I*W_I + b_R, Y_I = X_R*W_I + X_I*W_R + b_I.
inline cxqsm::dcr::ComplexTensor printed_conv(const cxqsm::dcr::ComplexTensor& x, const cxqsm::dcr::ComplexConv& layer) {
    cxqsm::dcr::ComplexTensor y(x.n, layer.c_out, x.h, x.w);
    for (int b = 0; b < x.n; ++b)
        for (int o = 0; o < layer.c_out; ++o) {
            RealImage yr(x.h, std::vector<double>(x.w, layer.bias[o].real()));
            RealImage yi(x.h, std::vector<double>(x.w, layer.bias[o].imag()));
            for (int i = 0; i < layer.c_in; ++i) {
                RealImage xr(x.h, std::vector<double>(x.w)), xi(x.h, std::vector<double>(x.w));
                for (int r = 0; r < x.h; ++r)
                    for (int c = 0; c < x.w; ++c) {
                        xr[r][c] = x.plane(b, i)[r * x.w + c].real();
                        xi[r][c] = x.plane(b, i)[r * x.w + c].imag();
                    }
                double wr[3][3], wi[3][3];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        wr[ky][kx] = layer.w(o, i, ky, kx).real();
                        wi[ky][kx] = layer.w(o, i, ky, kx).imag();
                    }
                const RealImage rr = real_conv3x3(xr, wr), ii = real_conv3x3(xi, wi);
                const RealImage ri = real_conv3x3(xr, wi), ir = real_conv3x3(xi, wr);
                for (int r = 0; r < x.h; ++r)
                    for (int c = 0; c < x.w; ++c) {
                        yr[r][c] += rr[r][c] + ii[r][c];
                        yi[r][c] += ri[r][c] + ir[r][c];
                    }
            }
            for (int r = 0; r < x.h; ++r)
                for (int c = 0; c < x.w; ++c) y.plane(b, o)[r * x.w + c] = {yr[r][c], yi[r][c]};
        }
    return y;
}

// 10 log10(range^2 / MSE).
inline double psnr(const std::vector<double>& test, const std::vector<double>& ref, double range) {
    double mse = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) mse += std::pow(test[i] - ref[i], 2) / static_cast<double>(ref.size());
    return 10.0 * std::log10(range * range / mse);
}

// SSIM with centred second moments and an explicitly built window.
inline double ssim(const std::vector<double>& x, const std::vector<double>& y, int rows, int cols, double range) {
    const int n = 11;
    const double sigma = 1.5;
    double g[11][11], gs = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            g[r][c] = std::exp(-(std::pow(r - 5.0, 2) + std::pow(c - 5.0, 2)) / (2 * sigma * sigma));
            gs += g[r][c];
        }
    const double C1 = std::pow(0.01 * range, 2), C2 = std::pow(0.03 * range, 2);
    double sum = 0.0;
    int windows = 0;
    for (int r0 = 0; r0 <= rows - n; ++r0)
        for (int c0 = 0; c0 <= cols - n; ++c0) {
            auto at = [&](const std::vector<double>& v, int r, int c) { return v[(r0 + r) * cols + (c0 + c)]; };
            double mx = 0, my = 0;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    mx += g[r][c] / gs * at(x, r, c);
                    my += g[r][c] / gs * at(y, r, c);
                }
            double vx = 0, vy = 0, cxy = 0;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    const double w = g[r][c] / gs;
                    vx += w * (at(x, r, c) - mx) * (at(x, r, c) - mx);
                    vy += w * (at(y, r, c) - my) * (at(y, r, c) - my);
                    cxy += w * (at(x, r, c) - mx) * (at(y, r, c) - my);
                }
            const double l = (2 * mx * my + C1) / (mx * mx + my * my + C1);
            const double cs = (2 * cxy + C2) / (vx + vy + C2);
            sum += l * cs;
            ++windows;
        }
    return sum / windows;
}

struct Line {
    double slope, intercept, r2, sse;
};

// Normal equations on raw sums, solved by Cramer's rule.
inline Line linreg(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    Line l{(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det, 0.0, 0.0};
    const double my = sy / n;
    double tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        l.sse += std::pow(y[i] - l.slope * x[i] - l.intercept, 2);
        tot += std::pow(y[i] - my, 2);
    }
    l.r2 = 1.0 - l.sse / tot;
    return l;
}

}  // namespace oracle
