#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "cxqsm/errors.hpp"
#include "cxqsm/fft.hpp"
#include "cxqsm/qsm/phantom.hpp"
#include "cxqsm/volume.hpp"

namespace cxqsm::qsm {

/// Off-resonance map with the voxels where it is defined.
struct FieldMap {
    RealVolume field;
    BoolVolume valid;
    std::string units = "rad_s";
};

namespace detail {

inline std::size_t voxel_count(const BoolVolume& m) {
    return static_cast<std::size_t>(std::count_if(m.data.begin(), m.data.end(), [](std::uint8_t v) { return v != 0; }));
}

inline constexpr int kAxisStep[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

}  // namespace detail

/// Reliability-guided unwrapping. Each voxel's reliability is the inverse of
/// its summed squared wrapped second differences along x, y and z (voxels
/// missing a neighbour get reliability 0). Neighbour pairs are merged in order
/// of decreasing joint reliability; when two groups meet, the smaller one is
/// moved by the multiple of 2 pi that makes the pair continuous.
inline RealVolume unwrap_phase(const RealVolume& wrapped, const BoolVolume& mask) {
    require(wrapped.shape == mask.shape, "phase and mask shapes differ");
    const Shape3 s = wrapped.shape;
    const std::size_t n = wrapped.size();
    if (detail::voxel_count(mask) == 0) fail(ErrorKind::validation, "unwrap: mask is empty");
    constexpr double two_pi = 2.0 * std::numbers::pi;

    auto inside = [&](int x, int y, int z) {
        return x >= 0 && y >= 0 && z >= 0 && x < s.nx && y < s.ny && z < s.nz && mask(x, y, z);
    };

    std::vector<double> reliability(n, 0.0);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                if (!mask(x, y, z)) continue;
                double d = 0.0;
                bool complete = true;
                for (const auto& a : detail::kAxisStep) {
                    if (!inside(x - a[0], y - a[1], z - a[2]) || !inside(x + a[0], y + a[1], z + a[2])) {
                        complete = false;
                        break;
                    }
                    const double c = wrapped(x, y, z);
                    const double h = wrap_phase(wrapped(x - a[0], y - a[1], z - a[2]) - c) -
                                     wrap_phase(c - wrapped(x + a[0], y + a[1], z + a[2]));
                    d += h * h;
                }
                if (complete)
                    reliability[s.index(x, y, z)] = d > 0.0 ? 1.0 / d : std::numeric_limits<double>::infinity();
            }

    struct Edge {
        double weight;
        std::size_t a, b;
    };
    std::vector<Edge> edges;
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                if (!mask(x, y, z)) continue;
                const std::size_t i = s.index(x, y, z);
                for (const auto& a : detail::kAxisStep)
                    if (inside(x + a[0], y + a[1], z + a[2])) {
                        const std::size_t j = s.index(x + a[0], y + a[1], z + a[2]);
                        edges.push_back({reliability[i] + reliability[j], i, j});
                    }
            }
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) { return l.weight > r.weight; });

    RealVolume out(s);
    std::vector<std::size_t> group(n);
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < n; ++i) {
        group[i] = i;
        if (mask[i]) {
            members[i].push_back(i);
            out[i] = wrapped[i];
        }
    }
    for (const Edge& e : edges) {
        std::size_t ga = group[e.a], gb = group[e.b];
        if (ga == gb) continue;
        std::size_t from = e.b, to = e.a;
        if (members[ga].size() < members[gb].size()) {
            std::swap(ga, gb);
            std::swap(from, to);
        }
        // Group ga absorbs gb; gb's voxel `from` must sit within pi of `to`.
        const double k = std::round((out[to] - out[from]) / two_pi);
        for (std::size_t v : members[gb]) {
            out[v] += two_pi * k;
            group[v] = ga;
        }
        members[ga].insert(members[ga].end(), members[gb].begin(), members[gb].end());
        members[gb].clear();
        members[gb].shrink_to_fit();
    }
    return out;
}

/// Remove the 2 pi ambiguities left by spatial unwrapping. Echo e is first
/// moved by the multiple of 2 pi that brings its mask mean closest to the
/// first echo's mean scaled by TE_e / TE_1 (phase grows linearly with TE).
/// Then each voxel is moved so that it is within pi of its value at the
/// previous echo, which repairs isolated voxels where late echoes wrap faster
/// than the spatial path can follow. This assumes the field changes the phase
/// by less than pi between consecutive echoes.
inline void align_echo_offsets(std::vector<RealVolume>& phases, const std::vector<double>& te, const BoolVolume& mask) {
    require(phases.size() == te.size() && !phases.empty(), "one phase volume per echo time is required");
    const std::size_t count = detail::voxel_count(mask);
    if (count == 0) return;
    auto mean = [&](const RealVolume& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (mask[i]) s += v[i];
        return s / static_cast<double>(count);
    };
    const double first = mean(phases.front());
    for (std::size_t e = 1; e < phases.size(); ++e) {
        const double expected = first * te[e] / te.front();
        const double k = std::round((mean(phases[e]) - expected) / (2.0 * std::numbers::pi));
        if (k != 0.0)
            for (std::size_t i = 0; i < phases[e].size(); ++i)
                if (mask[i]) phases[e][i] -= 2.0 * std::numbers::pi * k;
        for (std::size_t i = 0; i < phases[e].size(); ++i)
            if (mask[i])
                phases[e][i] -= 2.0 * std::numbers::pi *
                                std::round((phases[e][i] - phases[e - 1][i]) / (2.0 * std::numbers::pi));
    }
}

/// Weighted least-squares line through (TE, phase) per voxel with weights
/// magnitude^2; the slope (rad/s) is returned and the intercept dropped.
/// Voxels whose weights cannot determine a slope are marked invalid.
inline FieldMap fit_field(const std::vector<RealVolume>& phases, const std::vector<RealVolume>& magnitudes,
                          const std::vector<double>& te) {
    require(phases.size() >= 2, "field fitting needs at least two echoes");
    require(phases.size() == magnitudes.size() && phases.size() == te.size(), "echo inputs disagree in count");
    const Shape3 s = phases.front().shape;
    for (std::size_t e = 0; e < phases.size(); ++e)
        require(phases[e].shape == s && magnitudes[e].shape == s, "echo volumes disagree in shape");
    FieldMap out{RealVolume(s), BoolVolume(s), "rad_s"};
    for (std::size_t i = 0; i < s.size(); ++i) {
        double sw = 0.0, st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0;
        for (std::size_t e = 0; e < phases.size(); ++e) {
            const double w = magnitudes[e][i] * magnitudes[e][i];
            sw += w;
            st += w * te[e];
            sp += w * phases[e][i];
            stt += w * te[e] * te[e];
            stp += w * te[e] * phases[e][i];
        }
        const double denom = sw * stt - st * st;
        if (sw <= 0.0 || !(denom > 1e-12 * sw * stt)) continue;
        out.field[i] = (sw * stp - st * sp) / denom;
        out.valid[i] = 1;
    }
    return out;
}

/// Unwrap every echo inside the mask, align their 2 pi offsets and fit the
/// field (rad/s). Voxels outside the mask are marked invalid.
inline FieldMap field_from_echoes(const EchoSeries& series, const BoolVolume& mask) {
    require(series.echoes.size() == series.te_list.size(), "echo count does not match the echo times");
    std::vector<RealVolume> phases, magnitudes;
    for (const ComplexVolume& e : series.echoes) {
        require(e.shape == mask.shape, "echo and mask shapes differ");
        phases.push_back(unwrap_phase(phase(e), mask));
        magnitudes.push_back(magnitude(e));
    }
    align_echo_offsets(phases, series.te_list, mask);
    FieldMap f = fit_field(phases, magnitudes, series.te_list);
    for (std::size_t i = 0; i < f.valid.size(); ++i)
        if (!mask[i]) {
            f.valid[i] = 0;
            f.field[i] = 0.0;
        }
    return f;
}

/// Mask eroded by a ball of the given radius (voxels outside the volume count
/// as outside the mask).
inline BoolVolume erode(const BoolVolume& mask, int radius) {
    require(radius >= 0, "erosion radius must be non-negative");
    const Shape3 s = mask.shape;
    std::vector<std::array<int, 3>> ball;
    for (int dz = -radius; dz <= radius; ++dz)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
                if (dx * dx + dy * dy + dz * dz <= radius * radius) ball.push_back({dx, dy, dz});
    BoolVolume out(s);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                if (!mask(x, y, z)) continue;
                bool keep = true;
                for (const auto& d : ball) {
                    const int a = x + d[0], b = y + d[1], c = z + d[2];
                    if (a < 0 || b < 0 || c < 0 || a >= s.nx || b >= s.ny || c >= s.nz || !mask(a, b, c)) {
                        keep = false;
                        break;
                    }
                }
                out(x, y, z) = keep;
            }
    return out;
}

/// Spectrum of the normalised spherical mean kernel of the given radius, so
/// that SMV(f) = Re IDFT(S * DFT(f)).
inline RealVolume smv_spectrum(Shape3 shape, int radius) {
    require(radius >= 1, "SMV radius must be at least 1");
    ComplexVolume k(shape);
    const int cx = shape.nx / 2, cy = shape.ny / 2, cz = shape.nz / 2;
    double total = 0.0;
    for (int dz = -radius; dz <= radius; ++dz)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
                if (dx * dx + dy * dy + dz * dz <= radius * radius) total += 1.0;
    for (int dz = -radius; dz <= radius; ++dz)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) {
                if (dx * dx + dy * dy + dz * dz > radius * radius) continue;
                const int x = ((cx + dx) % shape.nx + shape.nx) % shape.nx;
                const int y = ((cy + dy) % shape.ny + shape.ny) % shape.ny;
                const int z = ((cz + dz) % shape.nz + shape.nz) % shape.nz;
                k(x, y, z) += 1.0 / total;
            }
    const ComplexVolume spec = dft_centered(k);
    const double scale = std::sqrt(static_cast<double>(shape.size()));
    RealVolume out(shape, Domain::kspace);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec[i].real() * scale;
    return out;
}

struct ResharpConfig {
    int radius = 4;
    double tik = 1e-3;
    double cg_tol = 1e-8;
    int cg_max_iter = 200;
};

/// RESHARP-style background removal: with C = I - SMV and M the eroded mask,
/// the local field x is supported on M and solves
/// (M C M C M + tik I) x = M C M C f by conjugate gradients.
/// Letting x range over the whole grid instead gives the minimum-norm
/// solution, which also drops the part of the local field that looks
/// harmonic inside M; TKD correlation on the reference phantom falls by
/// about 0.005 that way.
inline FieldMap resharp_remove(const FieldMap& total, const BoolVolume& mask, const ResharpConfig& cfg = {}) {
    require(total.field.shape == mask.shape, "field and mask shapes differ");
    require(cfg.radius >= 1, "SMV radius must be at least 1");
    require(cfg.tik >= 0.0, "Tikhonov weight must be non-negative");
    const Shape3 s = mask.shape;
    const BoolVolume eroded = erode(mask, cfg.radius);
    if (detail::voxel_count(eroded) == 0) fail(ErrorKind::validation, "resharp: eroded mask is empty");
    const RealVolume smv = smv_spectrum(s, cfg.radius);

    RealVolume f(s);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (mask[i] && total.valid[i]) ? total.field[i] : 0.0;

    // C is symmetric (the kernel is real and even).
    auto apply_c = [&](const RealVolume& v) {
        ComplexVolume k = dft_centered(to_complex(v));
        for (std::size_t i = 0; i < k.size(); ++i) k[i] *= 1.0 - smv[i];
        return real_part(idft_centered(std::move(k)));
    };
    auto masked = [&](RealVolume v) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!eroded[i]) v[i] = 0.0;
        return v;
    };
    auto normal_op = [&](const RealVolume& v) {
        RealVolume r = masked(apply_c(masked(apply_c(masked(v)))));
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += cfg.tik * v[i];
        return r;
    };
    auto dot = [](const RealVolume& a, const RealVolume& b) {
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
        return d;
    };

    const RealVolume rhs = masked(apply_c(masked(apply_c(f))));
    RealVolume x(s), r = rhs, p = rhs;
    double rr = dot(r, r);
    const double stop = cfg.cg_tol * cfg.cg_tol * std::max(rr, std::numeric_limits<double>::min());
    for (int it = 0; it < cfg.cg_max_iter && rr > stop; ++it) {
        const RealVolume ap = normal_op(p);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) break;
        const double alpha = rr / pap;
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    FieldMap out{masked(std::move(x)), eroded, total.units};
    return out;
}

/// Thresholded k-space division. The field (rad/s) is converted to ppm with
/// gamma_scale; |D| < threshold is replaced by sign(D) * threshold (D = 0
/// counts as positive) and the k = 0 term, which the field cannot determine,
/// is set to zero. The result is restricted to the field's valid voxels.
inline RealVolume tkd_invert(const FieldMap& local, Vec3 b0_dir, double threshold = 0.19,
                             double gamma_scale = kDefaultGammaScale) {
    require(threshold > 0.0 && threshold < 2.0 / 3.0, "TKD threshold must lie in (0, 2/3)");
    require(gamma_scale > 0.0, "gamma scale must be positive");
    const Shape3 s = local.field.shape;
    const RealVolume d = dipole_kernel(s, b0_dir);
    RealVolume ppm(s);
    for (std::size_t i = 0; i < ppm.size(); ++i) ppm[i] = local.valid[i] ? local.field[i] / gamma_scale : 0.0;
    ComplexVolume k = dft_centered(to_complex(ppm));
    const std::size_t dc = s.index(s.nx / 2, s.ny / 2, s.nz / 2);
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (i == dc) {
            k[i] = 0.0;
            continue;
        }
        double di = d[i];
        if (std::abs(di) < threshold) di = di < 0.0 ? -threshold : threshold;
        k[i] /= di;
    }
    RealVolume chi = real_part(idft_centered(std::move(k)));
    for (std::size_t i = 0; i < chi.size(); ++i)
        if (!local.valid[i]) chi[i] = 0.0;
    return chi;
}

struct OrientedField {
    FieldMap field;
    Vec3 b0_dir;
};

/// Multi-orientation least squares per frequency:
/// chi(k) = sum_i D_i(k) F_i(k) / (sum_i D_i(k)^2 + reg), F_i the field in ppm.
/// Needs at least three orientations spanning three dimensions. Frequencies
/// where every kernel vanishes (and reg = 0) are set to zero.
inline RealVolume cosmos_invert(const std::vector<OrientedField>& fields, double reg = 0.0,
                                double gamma_scale = kDefaultGammaScale) {
    require(fields.size() >= 3, "COSMOS needs at least three orientations");
    require(reg >= 0.0, "regularisation must be non-negative");
    require(gamma_scale > 0.0, "gamma scale must be positive");
    std::vector<Vec3> dirs;
    for (const auto& f : fields) dirs.push_back(normalized(f.b0_dir));
    double best = 0.0;
    for (std::size_t a = 0; a < dirs.size(); ++a)
        for (std::size_t b = a + 1; b < dirs.size(); ++b)
            for (std::size_t c = b + 1; c < dirs.size(); ++c) {
                const Vec3 &u = dirs[a], &v = dirs[b], &w = dirs[c];
                const double det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0]) +
                                   u[2] * (v[0] * w[1] - v[1] * w[0]);
                best = std::max(best, std::abs(det));
            }
    require(best > 1e-3, "COSMOS orientations are degenerate (duplicate or coplanar field directions)");

    const Shape3 s = fields.front().field.field.shape;
    ComplexVolume num(s, Domain::kspace);
    RealVolume den(s, Domain::kspace);
    BoolVolume valid(s);
    std::fill(valid.data.begin(), valid.data.end(), std::uint8_t{1});
    for (std::size_t o = 0; o < fields.size(); ++o) {
        const FieldMap& fm = fields[o].field;
        require(fm.field.shape == s, "COSMOS fields disagree in shape");
        RealVolume ppm(s);
        for (std::size_t i = 0; i < ppm.size(); ++i) {
            ppm[i] = fm.valid[i] ? fm.field[i] / gamma_scale : 0.0;
            valid[i] = valid[i] && fm.valid[i];
        }
        const ComplexVolume k = dft_centered(to_complex(ppm));
        const RealVolume d = dipole_kernel(s, dirs[o]);
        for (std::size_t i = 0; i < k.size(); ++i) {
            num[i] += d[i] * k[i];
            den[i] += d[i] * d[i];
        }
    }
    for (std::size_t i = 0; i < num.size(); ++i) {
        const double q = den[i] + reg;
        num[i] = q > 0.0 ? num[i] / q : cplx{0.0, 0.0};
    }
    num.domain = Domain::kspace;
    RealVolume chi = real_part(idft_centered(std::move(num)));
    for (std::size_t i = 0; i < chi.size(); ++i)
        if (!valid[i]) chi[i] = 0.0;
    return chi;
}

}  // namespace cxqsm::qsm
