#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "cxqsm/fft.hpp"
#include "cxqsm/rng.hpp"
#include "cxqsm/volume.hpp"

namespace cxqsm::qsm {

using Vec3 = std::array<double, 3>;

inline constexpr double kGyroHzPerTesla = 42.577e6;

/// rad/s of off-resonance per ppm of field shift at 3 T.
inline constexpr double kDefaultGammaScale = 2.0 * std::numbers::pi * kGyroHzPerTesla * 3.0 * 1e-6;

enum class PhantomKind { spheres, cylinders, shepp3d };

inline const char* to_string(PhantomKind k) {
    switch (k) {
        case PhantomKind::spheres: return "spheres";
        case PhantomKind::cylinders: return "cylinders";
        case PhantomKind::shepp3d: return "shepp3d";
    }
    return "spheres";
}

inline PhantomKind phantom_kind_from_string(const std::string& s) {
    if (s == "spheres") return PhantomKind::spheres;
    if (s == "cylinders") return PhantomKind::cylinders;
    if (s == "shepp3d") return PhantomKind::shepp3d;
    fail(ErrorKind::validation, "unknown phantom kind '" + s + "'");
}

/// One constant-susceptibility inclusion; label values start at 2
/// (0 = outside the object, 1 = object background).
struct Primitive {
    std::string name;
    int label = 0;
    double chi = 0.0;
};

struct SusceptibilityPhantom {
    RealVolume chi;                   // ppm
    BoolVolume mask;                  // object support
    Volume<int> labels;
    std::vector<Primitive> primitives;
    Vec3 b0_dir{0.0, 0.0, 1.0};
    std::vector<double> te_list;      // s
    double delta_te = 3.3e-3;
    double b0_gamma_scale = kDefaultGammaScale;
    double r2star = 20.0;             // 1/s
    PhantomKind kind = PhantomKind::spheres;
    std::uint64_t seed = 0;

    void validate() const {
        const double n = std::sqrt(b0_dir[0] * b0_dir[0] + b0_dir[1] * b0_dir[1] + b0_dir[2] * b0_dir[2]);
        require(std::abs(n - 1.0) <= 1e-12, "b0 direction must have unit norm");
        require(!te_list.empty(), "phantom needs at least one echo time");
        for (std::size_t e = 1; e < te_list.size(); ++e)
            require(te_list[e] > te_list[e - 1], "echo times must be strictly increasing");
        require(chi.shape == mask.shape && chi.shape == labels.shape, "phantom volumes disagree in shape");
    }
};

inline std::vector<double> default_echo_times(int count = 8, double first = 3e-3, double spacing = 3.3e-3) {
    std::vector<double> te(static_cast<std::size_t>(count));
    for (int e = 0; e < count; ++e) te[static_cast<std::size_t>(e)] = first + spacing * e;
    return te;
}

inline Vec3 normalized(Vec3 v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    require(n > 0.0, "direction vector must be nonzero");
    return {v[0] / n, v[1] / n, v[2] / n};
}

/// D(k) = 1/3 - (k.b)^2/|k|^2 on the centred frequency grid (cycles/voxel),
/// with D(0) = 0.
inline RealVolume dipole_kernel(Shape3 shape, Vec3 b0_dir) {
    require(shape.valid(), "kernel extents must be positive");
    const Vec3 b = normalized(b0_dir);
    RealVolume d(shape, Domain::kspace);
    for (int z = 0; z < shape.nz; ++z) {
        const double kz = static_cast<double>(z - shape.nz / 2) / shape.nz;
        for (int y = 0; y < shape.ny; ++y) {
            const double ky = static_cast<double>(y - shape.ny / 2) / shape.ny;
            for (int x = 0; x < shape.nx; ++x) {
                const double kx = static_cast<double>(x - shape.nx / 2) / shape.nx;
                const double k2 = kx * kx + ky * ky + kz * kz;
                if (k2 == 0.0) continue;
                const double kb = kx * b[0] + ky * b[1] + kz * b[2];
                d(x, y, z) = 1.0 / 3.0 - kb * kb / k2;
            }
        }
    }
    return d;
}

/// Real part of IDFT(kernel * DFT(v)).
inline RealVolume convolve_kspace(const RealVolume& v, const RealVolume& kernel) {
    require(v.shape == kernel.shape, "kernel shape mismatch");
    ComplexVolume k = dft_centered(to_complex(v));
    for (std::size_t i = 0; i < k.size(); ++i) k[i] *= kernel[i];
    return real_part(idft_centered(std::move(k)));
}

/// Field shift (ppm) induced by chi for the given field direction.
inline RealVolume dipole_field(const RealVolume& chi, Vec3 b0_dir) {
    return convolve_kspace(chi, dipole_kernel(chi.shape, b0_dir));
}

namespace detail {

struct Ellipsoid {
    Vec3 centre;     // voxel coordinates
    Vec3 semi;       // semi-axes in voxels
    bool contains(double x, double y, double z) const {
        const double a = (x - centre[0]) / semi[0], b = (y - centre[1]) / semi[1], c = (z - centre[2]) / semi[2];
        return a * a + b * b + c * c <= 1.0;
    }
};

inline void paint(SusceptibilityPhantom& p, const Primitive& prim, auto&& inside) {
    const Shape3 s = p.chi.shape;
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x)
                if (p.mask(x, y, z) && inside(x + 0.5, y + 0.5, z + 0.5)) {
                    p.chi(x, y, z) = prim.chi;
                    p.labels(x, y, z) = prim.label;
                }
    p.primitives.push_back(prim);
}

inline Ellipsoid object_body(Shape3 shape) {
    return {{shape.nx / 2.0, shape.ny / 2.0, shape.nz / 2.0},
            {0.375 * shape.nx, 0.375 * shape.ny, 0.375 * shape.nz}};
}

/// Object mask and labels with chi = 0 everywhere.
inline SusceptibilityPhantom empty_object(Shape3 shape, std::uint64_t seed) {
    SusceptibilityPhantom p;
    p.seed = seed;
    p.chi = RealVolume(shape);
    p.mask = BoolVolume(shape);
    p.labels = Volume<int>(shape);
    p.te_list = default_echo_times();
    const Ellipsoid body = object_body(shape);
    for (int z = 0; z < shape.nz; ++z)
        for (int y = 0; y < shape.ny; ++y)
            for (int x = 0; x < shape.nx; ++x)
                if (body.contains(x + 0.5, y + 0.5, z + 0.5)) {
                    p.mask(x, y, z) = 1;
                    p.labels(x, y, z) = 1;
                }
    return p;
}

}  // namespace detail

/// Inclusions keep this many voxels between their surface and the object
/// surface, so a radius-4 background-removal erosion never cuts into their
/// near field.
inline constexpr double kInclusionMargin = 9.0;

/// Piecewise-constant susceptibility inclusions (chi in [-0.2, 0.5] ppm)
/// inside an ellipsoidal object whose semi-axes are 37.5% of each extent, so
/// 25% of every axis is zero padding.
inline SusceptibilityPhantom make_phantom(PhantomKind kind, Shape3 shape, std::uint64_t seed) {
    require(shape.valid(), "phantom extents must be positive");
    SusceptibilityPhantom p = detail::empty_object(shape, seed);
    p.kind = kind;
    const detail::Ellipsoid body = detail::object_body(shape);

    RngStream rng(seed, static_cast<std::uint64_t>(kind) + 1);
    const double min_semi = std::min({body.semi[0], body.semi[1], body.semi[2]});

    // Random point whose ball of radius r lies inside the object.
    auto place = [&](double r) {
        for (;;) {
            const Vec3 u{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            Vec3 c;
            bool ok = true;
            for (int a = 0; a < 3; ++a) {
                const double room = body.semi[a] - r - kInclusionMargin;
                if (room <= 0.0) ok = false;
                c[a] = body.centre[a] + u[a] * std::max(room, 0.0);
            }
            if (!ok) return body.centre;
            const detail::Ellipsoid shrunk{body.centre, {body.semi[0] - r - kInclusionMargin, body.semi[1] - r - kInclusionMargin, body.semi[2] - r - kInclusionMargin}};
            if (shrunk.contains(c[0], c[1], c[2])) return c;
        }
    };

    switch (kind) {
        case PhantomKind::spheres: {
            const int count = 24;
            for (int i = 0; i < count; ++i) {
                const double r = rng.uniform(0.1, 0.2) * min_semi;
                const Vec3 c = place(r);
                const Primitive prim{"sphere_" + std::to_string(i), 2 + i, rng.uniform(-0.2, 0.5)};
                detail::paint(p, prim, [&](double x, double y, double z) {
                    return (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) + (z - c[2]) * (z - c[2]) <= r * r;
                });
            }
            break;
        }
        case PhantomKind::cylinders: {
            const int count = 6;
            for (int i = 0; i < count; ++i) {
                const int axis = static_cast<int>(rng.uniform() * 3.0) % 3;
                const double r = rng.uniform(0.15, 0.3) * min_semi;
                const double half_len = rng.uniform(0.3, 0.6) * body.semi[static_cast<std::size_t>(axis)];
                const Vec3 c = place(std::max(r, 0.5 * half_len));
                const Primitive prim{"cylinder_" + std::to_string(i), 2 + i, rng.uniform(-0.2, 0.5)};
                detail::paint(p, prim, [&](double x, double y, double z) {
                    const Vec3 d{x - c[0], y - c[1], z - c[2]};
                    double radial = 0.0;
                    for (int a = 0; a < 3; ++a)
                        if (a != axis) radial += d[static_cast<std::size_t>(a)] * d[static_cast<std::size_t>(a)];
                    return radial <= r * r && std::abs(d[static_cast<std::size_t>(axis)]) <= half_len;
                });
            }
            break;
        }
        case PhantomKind::shepp3d: {
            // Fixed layout in object-normalised coordinates; the seed jitters values.
            struct Spec { Vec3 c; Vec3 s; double chi; };
            const Spec specs[] = {
                {{-0.22, 0.0, 0.0}, {0.11, 0.31, 0.22}, 0.10},   // left "ventricle"
                {{0.22, 0.0, 0.0}, {0.16, 0.41, 0.25}, 0.10},    // right "ventricle"
                {{0.0, 0.35, 0.0}, {0.21, 0.25, 0.41}, 0.30},
                {{0.0, 0.1, 0.25}, {0.046, 0.046, 0.05}, 0.45},
                {{0.0, -0.1, 0.25}, {0.046, 0.046, 0.05}, -0.15},
                {{-0.08, -0.6, -0.25}, {0.046, 0.023, 0.05}, 0.25},
                {{0.06, -0.6, -0.25}, {0.046, 0.023, 0.02}, 0.35},
            };
            int i = 0;
            for (const Spec& sp : specs) {
                const detail::Ellipsoid e{{body.centre[0] + sp.c[0] * body.semi[0], body.centre[1] + sp.c[1] * body.semi[1],
                                           body.centre[2] + sp.c[2] * body.semi[2]},
                                          {std::max(sp.s[0] * body.semi[0], 0.75), std::max(sp.s[1] * body.semi[1], 0.75),
                                           std::max(sp.s[2] * body.semi[2], 0.75)}};
                const double chi = std::clamp(sp.chi + rng.uniform(-0.05, 0.05), -0.2, 0.5);
                const Primitive prim{"ellipsoid_" + std::to_string(i), 2 + i, chi};
                detail::paint(p, prim, [&](double x, double y, double z) { return e.contains(x, y, z); });
                ++i;
            }
            break;
        }
    }
    return p;
}

/// Background-field test object: the usual object mask with chi = 0 inside
/// and a few strong spheres (|chi| 5 to 10 ppm, air/tissue scale) centred
/// in the zero padding. Mask voxels are never painted, so everything the
/// object sees from them is background field.
inline SusceptibilityPhantom make_external_source_phantom(Shape3 shape, std::uint64_t seed, int count = 4) {
    require(shape.valid(), "phantom extents must be positive");
    require(count >= 1, "need at least one external source");
    SusceptibilityPhantom p = detail::empty_object(shape, seed);
    const detail::Ellipsoid body = detail::object_body(shape);
    RngStream rng(seed, 0x657874);
    const double min_extent = std::min({shape.nx, shape.ny, shape.nz});
    for (int i = 0; i < count; ++i) {
        const double r = rng.uniform(0.05, 0.1) * min_extent;
        Vec3 c{};
        for (int attempt = 0;; ++attempt) {
            require(attempt < 10000, "no room for external sources outside the object");
            for (int a = 0; a < 3; ++a) c[a] = rng.uniform(r, shape.extent(a) - r);
            const detail::Ellipsoid grown{body.centre, {body.semi[0] + r + 3.0, body.semi[1] + r + 3.0, body.semi[2] + r + 3.0}};
            if (!grown.contains(c[0], c[1], c[2])) break;
        }
        const double magnitude = rng.uniform(5.0, 10.0);
        const double chi = rng.uniform() < 0.5 ? -magnitude : magnitude;
        const int label = 2 + i;
        for (int z = 0; z < shape.nz; ++z)
            for (int y = 0; y < shape.ny; ++y)
                for (int x = 0; x < shape.nx; ++x) {
                    const double dx = x + 0.5 - c[0], dy = y + 0.5 - c[1], dz = z + 0.5 - c[2];
                    if (dx * dx + dy * dy + dz * dz <= r * r && !p.mask(x, y, z)) {
                        p.chi(x, y, z) = chi;
                        p.labels(x, y, z) = label;
                    }
                }
        p.primitives.push_back({"source_" + std::to_string(i), label, chi});
    }
    return p;
}

/// Multi-echo complex images plus the ground-truth field they encode.
struct EchoSeries {
    std::vector<ComplexVolume> echoes;
    std::vector<double> te_list;
    RealVolume field_ppm;
};

/// Noiseless GRE: magnitude = mask * exp(-TE R2*), phase = gamma_scale *
/// field_ppm * TE. Optional complex Gaussian noise with standard deviation
/// `noise_sigma` per component.
inline EchoSeries simulate_gre(const SusceptibilityPhantom& p, double noise_sigma = 0.0, std::uint64_t noise_seed = 0) {
    p.validate();
    EchoSeries out;
    out.te_list = p.te_list;
    out.field_ppm = dipole_field(p.chi, p.b0_dir);
    const CounterRng rng(noise_seed, 0x6e6f697365ull);
    for (std::size_t e = 0; e < p.te_list.size(); ++e) {
        const double te = p.te_list[e];
        ComplexVolume echo(p.chi.shape, Domain::image);
        const double mag = std::exp(-te * p.r2star);
        for (std::size_t i = 0; i < echo.size(); ++i) {
            if (p.mask[i]) echo[i] = std::polar(mag, p.b0_gamma_scale * out.field_ppm[i] * te);
            if (noise_sigma > 0.0) {
                const std::uint64_t idx = 2 * (e * echo.size() + i);
                echo[i] += noise_sigma * cplx(rng.normal(idx), rng.normal(idx + 1));
            }
        }
        out.echoes.push_back(std::move(echo));
    }
    return out;
}

}  // namespace cxqsm::qsm
