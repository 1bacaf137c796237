#pragma once

#include <algorithm>
#include <cmath>

#include "cxqsm/eval/metrics.hpp"
#include "cxqsm/qsm/phantom.hpp"

namespace cxqsm::eval {

/// One region per phantom primitive, plus "background" (object voxels
/// outside every primitive). If `within` is given, regions are clipped to it.
inline RoiMask phantom_rois(const qsm::SusceptibilityPhantom& p, const BoolVolume* within = nullptr) {
    RoiMask rois{p.chi.shape, {}};
    auto keep = [&](std::size_t i) { return within == nullptr || (*within)[i] != 0; };
    BoolVolume bg(p.chi.shape);
    for (std::size_t i = 0; i < bg.size(); ++i) bg[i] = p.labels[i] == 1 && keep(i) ? 1 : 0;
    rois.regions.emplace("background", std::move(bg));
    for (const qsm::Primitive& prim : p.primitives) {
        BoolVolume r(p.chi.shape);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = p.labels[i] == prim.label && keep(i) ? 1 : 0;
        rois.regions.emplace(prim.name, std::move(r));
    }
    return rois;
}

/// Regression region around the highest-susceptibility primitive (the
/// hemorrhage analogue): voxels of `support` within `margin` voxels of that
/// primitive's extent, so it holds both inclusion and surrounding tissue.
inline BoolVolume hemorrhage_region(const qsm::SusceptibilityPhantom& p, const BoolVolume& support, double margin = 3.0) {
    require(!p.primitives.empty(), "phantom has no primitives");
    const auto it = std::max_element(p.primitives.begin(), p.primitives.end(),
                                     [](const qsm::Primitive& a, const qsm::Primitive& b) { return a.chi < b.chi; });
    const Shape3 s = p.chi.shape;
    double c[3] = {0, 0, 0};
    std::size_t n = 0;
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x)
                if (p.labels(x, y, z) == it->label) {
                    c[0] += x;
                    c[1] += y;
                    c[2] += z;
                    ++n;
                }
    if (n == 0) fail(ErrorKind::validation, "primitive '" + it->name + "' has no voxels");
    for (double& v : c) v /= static_cast<double>(n);
    double radius = 0.0;
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x)
                if (p.labels(x, y, z) == it->label)
                    radius = std::max(radius, std::hypot(x - c[0], y - c[1], z - c[2]));
    BoolVolume out(s);
    const double reach = radius + margin;
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x)
                if (support(x, y, z) && std::hypot(x - c[0], y - c[1], z - c[2]) <= reach) out(x, y, z) = 1;
    return out;
}

}  // namespace cxqsm::eval
