#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cxqsm/forward.hpp"
#include "cxqsm/parallel.hpp"
#include "cxqsm/rng.hpp"
#include "cxqsm/sparse.hpp"

namespace cxqsm {

struct SolverConfig {
    double lambda1 = 1e-3;       // magnitude wavelet weight
    double lambda2 = 1e-3;       // phase regularisation weight
    double delta = 0.005;        // edge potential parameter
    int max_outer = 100;
    int inner_iters = 2;         // m- and phi-steps per outer iteration (CS_PR)
    double tol = 1e-5;           // relative cost change that counts as converged
    double step_scale = 0.9;     // fraction of 1/L
    int wavelet_levels = 3;
    int max_backtracks = 12;
    bool enforce_data_consistency = true;  // final projection onto the acquired samples

    void validate() const {
        require(lambda1 >= 0.0 && lambda2 >= 0.0, "regularisation weights must be non-negative");
        require(delta > 0.0, "delta must be positive");
        require(max_outer > 0 && inner_iters > 0, "iteration counts must be positive");
        require(tol > 0.0, "tolerance must be positive");
        require(step_scale > 0.0 && step_scale <= 1.0, "step_scale must lie in (0, 1]");
        require(max_backtracks >= 0, "max_backtracks must be non-negative");
    }
};

/// One row of the cost trace.
struct CostTerms {
    double data = 0.0;
    double reg_m = 0.0;
    double reg_phi = 0.0;
    double total = 0.0;
};

struct SolverResult {
    ComplexSlice image;          // m * exp(i phi), data-consistent if configured
    RealSlice magnitude;
    RealSlice phase;             // wrapped to (-pi, pi]
    std::vector<CostTerms> history;   // entry 0 is the initial point
    bool converged = false;
    int iterations = 0;
};

/// Spatially constant phase offsets for phase cycling; the first is always 0.
struct PhaseShiftSet {
    std::vector<double> shifts;
    std::uint64_t seed = 0;
    std::size_t count() const { return shifts.size(); }
};

/// Offsets drawn uniformly from [-pi, pi) by Philox(seed, stream "phase"),
/// after the mandatory zero shift. The zero-fill image only fixes the domain.
inline PhaseShiftSet gen_phase_shifts(const ComplexSlice& zero_fill, int count, std::uint64_t seed) {
    require(count >= 1, "phase shift count must be positive");
    (void)zero_fill;
    PhaseShiftSet set;
    set.seed = seed;
    set.shifts.push_back(0.0);
    const CounterRng rng(seed, 0x7068617365ull);
    for (int i = 1; i < count; ++i)
        set.shifts.push_back(-std::numbers::pi + 2.0 * std::numbers::pi * rng.uniform(static_cast<std::uint64_t>(i - 1)));
    return set;
}

/// Zero-fill magnitude (relative to its maximum) above which a pixel counts as
/// object when choosing the CS_PC starting phase.
inline constexpr double kSupportFraction = 0.3;

namespace detail {

/// Shared data term of all three solvers on one ky-kz slice:
/// 0.5 ||M F x - y||^2 with gradient F^H (M F x - y).
class SliceData {
public:
    SliceData(const ComplexSlice& y, const SamplingMask& mask) : y_(y), mask_(mask.plane) {
        require(y.ny == mask.plane.ny && y.nz == mask.plane.nz, "mask plane does not match the slice extents");
    }

    int ny() const { return y_.ny; }
    int nz() const { return y_.nz; }
    std::size_t size() const { return y_.size(); }

    double value(const std::vector<cplx>& x) const { return evaluate(x, nullptr); }

    double evaluate(const std::vector<cplx>& x, std::vector<cplx>* grad) const {
        std::vector<cplx> r = x;
        dft2_inplace(r, ny(), nz(), FftDirection::forward);
        double d = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = mask_[i] ? r[i] - y_[i] : cplx{0.0, 0.0};
            d += std::norm(r[i]);
        }
        if (grad) {
            dft2_inplace(r, ny(), nz(), FftDirection::inverse);
            *grad = std::move(r);
        }
        return 0.5 * d;
    }

    /// Largest eigenvalue of F^H M F by power iteration.
    double lipschitz(int iterations = 30) const {
        const CounterRng rng(0x4c495053ull);
        std::vector<cplx> v(size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(rng.normal(2 * i), rng.normal(2 * i + 1));
        double lambda = 0.0;
        for (int it = 0; it < iterations; ++it) {
            const double n = std::sqrt(squared_norm(v));
            if (n == 0.0) return 0.0;
            for (auto& c : v) c /= n;
            dft2_inplace(v, ny(), nz(), FftDirection::forward);
            for (std::size_t i = 0; i < v.size(); ++i)
                if (!mask_[i]) v[i] = 0.0;
            dft2_inplace(v, ny(), nz(), FftDirection::inverse);
            lambda = std::sqrt(squared_norm(v));
        }
        return lambda;
    }

    /// Replace the sampled k-space of x with the measurements.
    std::vector<cplx> project(std::vector<cplx> x) const {
        dft2_inplace(x, ny(), nz(), FftDirection::forward);
        for (std::size_t i = 0; i < x.size(); ++i)
            if (mask_[i]) x[i] = y_[i];
        dft2_inplace(x, ny(), nz(), FftDirection::inverse);
        return x;
    }

    std::vector<cplx> zero_fill() const {
        std::vector<cplx> x(y_.data);
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!mask_[i]) x[i] = 0.0;
        dft2_inplace(x, ny(), nz(), FftDirection::inverse);
        return x;
    }

private:
    const ComplexSlice& y_;
    const Plane<std::uint8_t>& mask_;
};

inline std::vector<cplx> compose(const std::vector<double>& m, const std::vector<double>& phi) {
    std::vector<cplx> x(m.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::polar(1.0, phi[i]) * m[i];
    return x;
}

inline double wavelet_l1(std::vector<double> v, int ny, int nz, WaveletSpec spec) {
    wavelet_fwd_inplace<double>(v, ny, nz, spec);
    double s = 0.0;
    for (double c : v) s += std::abs(c);
    return s;
}

/// argmin_u 0.5||u - v||^2 + t ||W u||_1 for orthonormal W.
inline std::vector<double> wavelet_shrink(std::vector<double> v, int ny, int nz, WaveletSpec spec, double t) {
    wavelet_fwd_inplace<double>(v, ny, nz, spec);
    soft_threshold_inplace<double>(v, t);
    wavelet_inv_inplace<double>(v, ny, nz, spec);
    return v;
}

inline bool accept(double candidate, double current) { return candidate <= current; }

inline bool converged(double previous, double current, double tol) {
    const double scale = std::max(std::abs(previous), 1e-300);
    return std::abs(previous - current) <= tol * scale || current <= 1e-300;
}

inline SolverResult finish(const SliceData& data, std::vector<double> m, std::vector<double> phi,
                           const SolverConfig& cfg, std::vector<CostTerms> history, bool conv, int iters) {
    std::vector<cplx> x = compose(m, phi);
    if (cfg.enforce_data_consistency) x = data.project(std::move(x));
    SolverResult r;
    r.image = ComplexSlice(data.ny(), data.nz());
    r.magnitude = RealSlice(data.ny(), data.nz());
    r.phase = RealSlice(data.ny(), data.nz());
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.image[i] = x[i];
        r.magnitude[i] = std::abs(x[i]);
        r.phase[i] = wrap_phase(std::arg(x[i]));
    }
    r.history = std::move(history);
    r.converged = conv;
    r.iterations = iters;
    return r;
}

inline double phase_reference(const std::vector<double>& m, const std::vector<double>& phi) {
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < m.size(); ++i) s += std::polar(1.0, phi[i]) * m[i];
    return std::abs(s) > 0.0 ? std::arg(s) : 0.0;
}

}  // namespace detail

/// Magnitude-only CS: proximal gradient on m with the phase held at
/// `phi_lowres`; wavelet soft-thresholding followed by projection onto m >= 0.
/// Steps that would raise the cost are halved (monotone variant).
inline SolverResult recon_magnitude_cs(const ComplexSlice& y, const SamplingMask& mask, const RealSlice& phi_lowres,
                                       const SolverConfig& cfg = {}) {
    cfg.validate();
    require(phi_lowres.ny == y.ny && phi_lowres.nz == y.nz, "phase estimate does not match the slice");
    const detail::SliceData data(y, mask);
    const WaveletSpec ws{cfg.wavelet_levels};
    const int ny = y.ny, nz = y.nz;
    const std::vector<double>& phi = phi_lowres.data;
    const double lip = std::max(data.lipschitz(), 1e-12);

    const std::vector<cplx> zf = data.zero_fill();
    std::vector<double> m(zf.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::max((zf[i] * std::polar(1.0, -phi[i])).real(), 0.0);

    auto cost_of = [&](const std::vector<double>& mm) {
        CostTerms c;
        c.data = data.value(detail::compose(mm, phi));
        c.reg_m = cfg.lambda1 * detail::wavelet_l1(mm, ny, nz, ws);
        c.total = c.data + c.reg_m;
        return c;
    };

    std::vector<CostTerms> history{cost_of(m)};
    bool conv = false;
    int it = 0;
    std::vector<cplx> g;
    for (; it < cfg.max_outer && !conv; ++it) {
        data.evaluate(detail::compose(m, phi), &g);
        std::vector<double> gm(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) gm[i] = (g[i] * std::polar(1.0, -phi[i])).real();
        double step = cfg.step_scale / lip;
        const CostTerms current = history.back();
        CostTerms best = current;
        bool moved = false;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt, step *= 0.5) {
            std::vector<double> trial(m.size());
            for (std::size_t i = 0; i < m.size(); ++i) trial[i] = m[i] - step * gm[i];
            trial = detail::wavelet_shrink(std::move(trial), ny, nz, ws, cfg.lambda1 * step);
            for (double& v : trial) v = std::max(v, 0.0);
            const CostTerms c = cost_of(trial);
            if (detail::accept(c.total, current.total)) {
                m = std::move(trial);
                best = c;
                moved = true;
                break;
            }
        }
        history.push_back(best);
        conv = !moved || detail::converged(current.total, best.total, cfg.tol);
    }
    return detail::finish(data, std::move(m), phi, cfg, std::move(history), conv, it);
}

inline SolverResult recon_magnitude_cs(const ComplexSlice& y, const SamplingMask& mask, const SolverConfig& cfg = {}) {
    return recon_magnitude_cs(y, mask, lowres_phase(y, mask), cfg);
}

/// CS with periodic phase regularisation: alternating proximal-gradient m-steps
/// and majorise-minimise phi-steps on
///   0.5||y - M F(m e^{i phi})||^2 + l1 ||W m||_1 + l2 sum_k psi(|[C e^{i phi}]_k|).
inline SolverResult recon_cspr(const ComplexSlice& y, const SamplingMask& mask, const SolverConfig& cfg = {}) {
    cfg.validate();
    const detail::SliceData data(y, mask);
    const WaveletSpec ws{cfg.wavelet_levels};
    const int ny = y.ny, nz = y.nz;
    const std::size_t n = data.size();
    const double lip = std::max(data.lipschitz(), 1e-12);

    const std::vector<cplx> zf = data.zero_fill();
    std::vector<double> m(n), phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = std::abs(zf[i]);
        phi[i] = std::arg(zf[i]);
    }

    // Differences of exp(i phi) along y and z (replicate edge, so the last
    // row of each axis contributes nothing).
    auto for_each_edge = [&](auto&& fn) {
        for (int z = 0; z < nz; ++z)
            for (int yy = 0; yy < ny; ++yy) {
                const std::size_t i = static_cast<std::size_t>(yy) + static_cast<std::size_t>(ny) * static_cast<std::size_t>(z);
                if (yy + 1 < ny) fn(i, i + 1);
                if (z + 1 < nz) fn(i, i + static_cast<std::size_t>(ny));
            }
    };
    auto reg_phi = [&](const std::vector<double>& p) {
        double s = 0.0;
        for_each_edge([&](std::size_t a, std::size_t b) {
            s += edge_psi(std::abs(std::polar(1.0, p[b]) - std::polar(1.0, p[a])), cfg.delta).value;
        });
        return cfg.lambda2 * s;
    };
    auto cost_of = [&](const std::vector<double>& mm, const std::vector<double>& pp) {
        CostTerms c;
        c.data = data.value(detail::compose(mm, pp));
        c.reg_m = cfg.lambda1 * detail::wavelet_l1(mm, ny, nz, ws);
        c.reg_phi = reg_phi(pp);
        c.total = c.data + c.reg_m + c.reg_phi;
        return c;
    };

    std::vector<CostTerms> history{cost_of(m, phi)};
    bool conv = false;
    int it = 0;
    std::vector<cplx> g;
    for (; it < cfg.max_outer && !conv; ++it) {
        const CostTerms start = history.back();
        CostTerms current = start;
        bool moved = false;

        // m-steps with phi fixed.
        for (int inner = 0; inner < cfg.inner_iters; ++inner) {
            data.evaluate(detail::compose(m, phi), &g);
            std::vector<double> gm(n);
            for (std::size_t i = 0; i < n; ++i) gm[i] = (g[i] * std::polar(1.0, -phi[i])).real();
            double step = cfg.step_scale / lip;
            for (int bt = 0; bt <= cfg.max_backtracks; ++bt, step *= 0.5) {
                std::vector<double> trial(n);
                for (std::size_t i = 0; i < n; ++i) trial[i] = m[i] - step * gm[i];
                trial = detail::wavelet_shrink(std::move(trial), ny, nz, ws, cfg.lambda1 * step);
                const CostTerms c = cost_of(trial, phi);
                if (detail::accept(c.total, current.total)) {
                    m = std::move(trial);
                    moved = moved || c.total < current.total;
                    current = c;
                    break;
                }
            }
        }

        // phi-steps on the half-quadratic surrogate with weights frozen here.
        std::vector<double> weight;
        for_each_edge([&](std::size_t a, std::size_t b) {
            weight.push_back(edge_psi(std::abs(std::polar(1.0, phi[b]) - std::polar(1.0, phi[a])), cfg.delta).weight);
        });
        auto surrogate = [&](const std::vector<double>& pp) {
            double s = 0.0;
            std::size_t e = 0;
            for_each_edge([&](std::size_t a, std::size_t b) { s += weight[e++] * (1.0 - std::cos(pp[b] - pp[a])); });
            return cfg.lambda2 * s;
        };
        const double w_max = weight.empty() ? 0.0 : *std::max_element(weight.begin(), weight.end());
        double m_max = 0.0;
        for (double v : m) m_max = std::max(m_max, std::abs(v));
        const double lip_phi = std::max(lip * m_max * m_max + 8.0 * cfg.lambda2 * w_max, 1e-12);

        std::vector<double> phi_start = phi;
        for (int inner = 0; inner < cfg.inner_iters; ++inner) {
            const double d0 = data.evaluate(detail::compose(m, phi), &g);
            const double obj0 = d0 + surrogate(phi);
            std::vector<double> gp(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) gp[i] = m[i] * (g[i] * std::polar(1.0, -phi[i])).imag();
            std::size_t e = 0;
            for_each_edge([&](std::size_t a, std::size_t b) {
                const double s = cfg.lambda2 * weight[e++] * std::sin(phi[b] - phi[a]);
                gp[b] += s;
                gp[a] -= s;
            });
            double step = cfg.step_scale / lip_phi;
            for (int bt = 0; bt <= cfg.max_backtracks; ++bt, step *= 0.5) {
                std::vector<double> trial(n);
                for (std::size_t i = 0; i < n; ++i) trial[i] = phi[i] - step * gp[i];
                const double obj = data.value(detail::compose(m, trial)) + surrogate(trial);
                if (obj <= obj0) {
                    phi = std::move(trial);
                    break;
                }
            }
        }
        // The surrogate upper-bounds the potential and touches it at phi_start,
        // so the true cost cannot rise; guard against round-off anyway.
        const CostTerms after = cost_of(m, phi);
        if (detail::accept(after.total, current.total)) {
            moved = moved || after.total < current.total;
            current = after;
        } else {
            phi = std::move(phi_start);
        }
        for (double& p : phi) p = wrap_phase(p);
        history.push_back(current);
        conv = !moved || detail::converged(start.total, current.total, cfg.tol);
    }
    return detail::finish(data, std::move(m), std::move(phi), cfg, std::move(history), conv, it);
}

/// Phase cycling: joint gradient step on (m, phi), wavelet shrinkage of m and
/// of the phase after its wraps are moved by one shift from the set (cycled in
/// order). Wraps are placed relative to the image's mean phase, so the result
/// is equivariant to a global phase and depends only on shift differences.
/// The reported cost averages the phase penalty over the whole shift set.
inline SolverResult recon_cspc(const ComplexSlice& y, const SamplingMask& mask, const SolverConfig& cfg,
                               const PhaseShiftSet& shifts) {
    cfg.validate();
    require(shifts.count() >= 1, "phase shift set is empty");
    const detail::SliceData data(y, mask);
    const WaveletSpec ws{cfg.wavelet_levels};
    const int ny = y.ny, nz = y.nz;
    const std::size_t n = data.size();
    const double lip = std::max(data.lipschitz(), 1e-12);
    const double count = static_cast<double>(shifts.count());
    std::vector<double> rel(shifts.shifts.size());
    for (std::size_t j = 0; j < rel.size(); ++j) rel[j] = shifts.shifts[j] - shifts.shifts.front();

    // Start from the zero-fill phase on the object and the calibration phase
    // elsewhere, so that m >= 0 cannot simply reproduce the sign flips of the
    // ringing.
    const std::vector<cplx> zf = data.zero_fill();
    std::vector<double> m(n), phi(lowres_phase(y, mask).data);
    double zf_max = 0.0;
    for (const cplx& c : zf) zf_max = std::max(zf_max, std::abs(c));
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(zf[i]) > kSupportFraction * zf_max) phi[i] = std::arg(zf[i]);
        m[i] = std::max((zf[i] * std::polar(1.0, -phi[i])).real(), 0.0);
    }
    const double ref = detail::phase_reference(m, phi);

    auto shifted = [&](const std::vector<double>& pp, double p) {
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = wrap_phase(pp[i] - ref + p);
        return s;
    };
    auto cost_of = [&](const std::vector<double>& mm, const std::vector<double>& pp) {
        CostTerms c;
        c.data = data.value(detail::compose(mm, pp));
        c.reg_m = cfg.lambda1 * detail::wavelet_l1(mm, ny, nz, ws);
        if (cfg.lambda2 > 0.0) {
            double s = 0.0;
            for (double p : rel) s += detail::wavelet_l1(shifted(pp, p), ny, nz, ws);
            c.reg_phi = cfg.lambda2 * s / count;
        }
        c.total = c.data + c.reg_m + c.reg_phi;
        return c;
    };

    std::vector<CostTerms> history{cost_of(m, phi)};
    bool conv = false;
    int it = 0;
    std::vector<cplx> g;
    for (; it < cfg.max_outer && !conv; ++it) {
        const CostTerms current = history.back();
        const double p = rel[static_cast<std::size_t>(it) % rel.size()];
        data.evaluate(detail::compose(m, phi), &g);
        std::vector<double> gm(n), gp(n);
        double m_max = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const cplx r = g[i] * std::polar(1.0, -phi[i]);
            gm[i] = r.real();
            gp[i] = m[i] * r.imag();
            m_max = std::max(m_max, std::abs(m[i]));
        }
        double step_m = cfg.step_scale / lip;
        double step_p = cfg.step_scale / (lip * std::max(m_max * m_max, 1e-12));
        CostTerms best = current;
        bool moved = false;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt, step_m *= 0.5, step_p *= 0.5) {
            std::vector<double> tm(n), tp(n);
            for (std::size_t i = 0; i < n; ++i) {
                tm[i] = m[i] - step_m * gm[i];
                tp[i] = phi[i] - step_p * gp[i];
            }
            tm = detail::wavelet_shrink(std::move(tm), ny, nz, ws, cfg.lambda1 * step_m);
            for (double& v : tm) v = std::max(v, 0.0);
            if (cfg.lambda2 > 0.0) {
                auto s = detail::wavelet_shrink(shifted(tp, p), ny, nz, ws, cfg.lambda2 * step_p / count);
                for (std::size_t i = 0; i < n; ++i) tp[i] = s[i] - p + ref;
            }
            for (double& v : tp) v = wrap_phase(v);
            const CostTerms c = cost_of(tm, tp);
            if (detail::accept(c.total, current.total)) {
                moved = c.total < current.total;
                m = std::move(tm);
                phi = std::move(tp);
                best = c;
                break;
            }
        }
        history.push_back(best);
        // A rejected step only ends the run once every shift has been tried.
        if (!moved) {
            conv = it + 1 >= static_cast<int>(rel.size()) &&
                   std::all_of(history.end() - static_cast<std::ptrdiff_t>(std::min<std::size_t>(rel.size(), history.size() - 1)),
                               history.end(), [&](const CostTerms& c) { return c.total == best.total; });
        } else {
            conv = detail::converged(current.total, best.total, cfg.tol);
        }
    }
    return detail::finish(data, std::move(m), std::move(phi), cfg, std::move(history), conv, it);
}

enum class CsMethod { magnitude, cspr, cspc };

inline const char* to_string(CsMethod m) {
    switch (m) {
        case CsMethod::magnitude: return "cs-mag";
        case CsMethod::cspr: return "cspr";
        case CsMethod::cspc: return "cspc";
    }
    return "?";
}

struct VolumeRecon {
    ComplexVolume image;
    std::vector<CostTerms> history;   // summed over slices; finished slices hold their last value
    bool converged = true;
    int max_iterations = 0;
};

/// Solve every x-slice of an undersampled k-space volume. The data are scaled
/// by 1/max|zero-fill| before solving and the result is scaled back, so the
/// regularisation weights refer to images of peak 1.
inline VolumeRecon recon_volume(const ComplexVolume& kspace, const SamplingMask& mask, CsMethod method,
                                const SolverConfig& cfg = {}, int shift_count = 8, std::uint64_t seed = 0,
                                int threads = 1) {
    cfg.validate();
    const ComplexVolume zf = zero_fill_recon(kspace, mask);
    double scale = 0.0;
    for (const cplx& c : zf.data) scale = std::max(scale, std::abs(c));
    std::vector<ComplexSlice> slices = slice_decompose(kspace);
    std::vector<SolverResult> results(slices.size());
    if (scale == 0.0) {
        VolumeRecon out;
        out.image = ComplexVolume(kspace.shape, Domain::image);
        out.history.assign(1, CostTerms{});
        return out;
    }
    parallel_for(slices.size(), threads, [&](std::size_t x) {
        ComplexSlice y = slices[x];
        for (cplx& c : y.data) c /= scale;
        switch (method) {
            case CsMethod::magnitude: results[x] = recon_magnitude_cs(y, mask, cfg); break;
            case CsMethod::cspr: results[x] = recon_cspr(y, mask, cfg); break;
            case CsMethod::cspc: {
                const PhaseShiftSet shifts = gen_phase_shifts(zero_fill_recon(y, mask), shift_count, seed);
                results[x] = recon_cspc(y, mask, cfg, shifts);
                break;
            }
        }
    });

    VolumeRecon out;
    std::size_t length = 0;
    for (const SolverResult& r : results) {
        length = std::max(length, r.history.size());
        out.converged = out.converged && r.converged;
        out.max_iterations = std::max(out.max_iterations, r.iterations);
    }
    out.history.assign(length, CostTerms{});
    std::vector<ComplexSlice> images;
    images.reserve(results.size());
    for (SolverResult& r : results) {
        for (std::size_t k = 0; k < length; ++k) {
            const CostTerms& c = r.history[std::min(k, r.history.size() - 1)];
            out.history[k].data += c.data;
            out.history[k].reg_m += c.reg_m;
            out.history[k].reg_phi += c.reg_phi;
            out.history[k].total += c.total;
        }
        for (cplx& c : r.image.data) c *= scale;
        images.push_back(std::move(r.image));
    }
    out.image = stack_slices(images, Domain::image);
    return out;
}

/// iteration,data_term,reg_m,reg_phi,total with 17 significant digits.
inline std::string cost_history_csv(const std::vector<CostTerms>& history) {
    std::string out = "iteration,data_term,reg_m,reg_phi,total\n";
    char line[160];
    for (std::size_t k = 0; k < history.size(); ++k) {
        const CostTerms& c = history[k];
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", k, c.data, c.reg_m, c.reg_phi, c.total);
        out += line;
    }
    return out;
}

}  // namespace cxqsm
