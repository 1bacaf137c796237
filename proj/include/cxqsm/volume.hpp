#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cxqsm/errors.hpp"

namespace cxqsm {

using cplx = std::complex<double>;

/// Which space a sample array lives in.
enum class Domain { image, kspace, wavelet };

inline const char* to_string(Domain d) {
    switch (d) {
        case Domain::image: return "image";
        case Domain::kspace: return "kspace";
        case Domain::wavelet: return "wavelet";
    }
    return "image";
}

inline Domain domain_from_string(const std::string& s) {
    if (s == "image") return Domain::image;
    if (s == "kspace") return Domain::kspace;
    if (s == "wavelet") return Domain::wavelet;
    fail(ErrorKind::format, "unknown domain tag '" + s + "'");
}

struct Shape3 {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    int extent(int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    bool valid() const { return nx > 0 && ny > 0 && nz > 0; }
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * static_cast<std::size_t>(z));
    }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Dense 3D array, x-fastest: index = x + nx * (y + ny * z).
template <class T>
struct Volume {
    Shape3 shape;
    std::vector<T> data;
    Domain domain = Domain::image;

    Volume() = default;
    explicit Volume(Shape3 s, Domain d = Domain::image, T fill = T{})
        : shape(s), data(s.size(), fill), domain(d) {
        require(s.valid(), "volume extents must be positive");
    }

    std::size_t size() const { return data.size(); }
    std::size_t index(int x, int y, int z) const { return shape.index(x, y, z); }
    T& operator()(int x, int y, int z) { return data[index(x, y, z)]; }
    const T& operator()(int x, int y, int z) const { return data[index(x, y, z)]; }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }
};

using ComplexVolume = Volume<cplx>;
using RealVolume = Volume<double>;
using BoolVolume = Volume<std::uint8_t>;

/// Dense 2D array over the (y, z) phase-encoding plane, y-fastest.
template <class T>
struct Plane {
    int ny = 0;
    int nz = 0;
    std::vector<T> data;
    Domain domain = Domain::image;

    Plane() = default;
    Plane(int ny_, int nz_, Domain d = Domain::image, T fill = T{})
        : ny(ny_), nz(nz_), data(static_cast<std::size_t>(ny_) * static_cast<std::size_t>(nz_), fill), domain(d) {
        require(ny_ > 0 && nz_ > 0, "plane extents must be positive");
    }

    std::size_t size() const { return data.size(); }
    std::size_t index(int y, int z) const {
        return static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * static_cast<std::size_t>(z);
    }
    T& operator()(int y, int z) { return data[index(y, z)]; }
    const T& operator()(int y, int z) const { return data[index(y, z)]; }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }
    bool same_shape(const Plane& o) const { return ny == o.ny && nz == o.nz; }
};

using ComplexSlice = Plane<cplx>;
using RealSlice = Plane<double>;

inline bool is_finite(const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }
inline bool is_finite(double v) { return std::isfinite(v); }

template <class Array>
void require_finite(const Array& a, const char* what) {
    for (const auto& v : a.data) {
        if (!is_finite(v)) fail(ErrorKind::validation, std::string(what) + " contains non-finite samples");
    }
}

/// Wrap an angle into (-pi, pi].
inline double wrap_phase(double p) {
    constexpr double two_pi = 2.0 * 3.14159265358979323846;
    double w = std::remainder(p, two_pi);
    if (w <= -3.14159265358979323846) w += two_pi;
    return w;
}

inline RealVolume magnitude(const ComplexVolume& v) {
    RealVolume out(v.shape, v.domain);
    std::transform(v.data.begin(), v.data.end(), out.data.begin(), [](const cplx& c) { return std::abs(c); });
    return out;
}

inline RealVolume phase(const ComplexVolume& v) {
    RealVolume out(v.shape, v.domain);
    std::transform(v.data.begin(), v.data.end(), out.data.begin(), [](const cplx& c) { return std::arg(c); });
    return out;
}

inline ComplexVolume polar(const RealVolume& m, const RealVolume& phi) {
    require(m.shape == phi.shape, "magnitude and phase shapes differ");
    ComplexVolume out(m.shape, Domain::image);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::polar(1.0, phi[i]) * m[i];
    return out;
}

inline ComplexVolume to_complex(const RealVolume& r) {
    ComplexVolume out(r.shape, r.domain);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = r[i];
    return out;
}

inline RealVolume real_part(const ComplexVolume& v) {
    RealVolume out(v.shape, v.domain);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i].real();
    return out;
}

template <class T>
double squared_norm(const std::vector<T>& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return s;
}

/// Conjugate-linear in the first argument.
inline cplx inner(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

/// Extract the (y, z) plane at readout index x.
template <class T>
Plane<T> plane_at(const Volume<T>& v, int x) {
    Plane<T> p(v.shape.ny, v.shape.nz, v.domain);
    for (int z = 0; z < v.shape.nz; ++z)
        for (int y = 0; y < v.shape.ny; ++y) p(y, z) = v(x, y, z);
    return p;
}

template <class T>
void set_plane(Volume<T>& v, int x, const Plane<T>& p) {
    for (int z = 0; z < v.shape.nz; ++z)
        for (int y = 0; y < v.shape.ny; ++y) v(x, y, z) = p(y, z);
}

}  // namespace cxqsm
