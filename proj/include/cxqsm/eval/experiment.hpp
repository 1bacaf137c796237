#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cxqsm/dcrnet/train.hpp"
#include "cxqsm/dcrnet/weights.hpp"
#include "cxqsm/eval/metrics.hpp"
#include "cxqsm/eval/report.hpp"
#include "cxqsm/eval/rois.hpp"
#include "cxqsm/qsm/pipeline.hpp"
#include "cxqsm/solvers.hpp"

namespace cxqsm::eval {

enum class ReconMethod { zero_fill, cs_mag, cspr, cspc, dcrnet };

inline const char* to_string(ReconMethod m) {
    switch (m) {
        case ReconMethod::zero_fill: return "zero-fill";
        case ReconMethod::cs_mag: return "cs-mag";
        case ReconMethod::cspr: return "cspr";
        case ReconMethod::cspc: return "cspc";
        case ReconMethod::dcrnet: return "dcrnet";
    }
    return "?";
}

inline ReconMethod recon_method_from_string(const std::string& s) {
    for (ReconMethod m : {ReconMethod::zero_fill, ReconMethod::cs_mag, ReconMethod::cspr, ReconMethod::cspc, ReconMethod::dcrnet})
        if (s == to_string(m)) return m;
    fail(ErrorKind::validation, "unknown reconstruction method '" + s + "'");
}

/// Library defaults, except CS_PC, whose phase weight is lowered to 1e-4:
/// on the reference phantom the default 1e-3 over-smooths the dipole phase.
inline SolverConfig preset_solver_config(ReconMethod m) {
    SolverConfig c;
    if (m == ReconMethod::cspc) c.lambda2 = 1e-4;
    return c;
}

struct ReconOptions {
    ReconMethod method = ReconMethod::zero_fill;
    SolverConfig solver;
    int shift_count = 8;
    std::uint64_t shift_seed = 0;
    int threads = 1;
};

struct ReconOutput {
    ComplexVolume image;
    std::vector<CostTerms> history;   // empty for zero-fill and DCRNet
    bool converged = true;
    int iterations = 0;
};

/// One k-space volume through the chosen method. DCRNet needs `model`.
inline ReconOutput reconstruct(const ComplexVolume& kspace, const SamplingMask& mask, const ReconOptions& o,
                               dcr::DcrNet* model = nullptr) {
    ReconOutput out;
    switch (o.method) {
        case ReconMethod::zero_fill: out.image = zero_fill_recon(kspace, mask); break;
        case ReconMethod::dcrnet:
            if (model == nullptr) fail(ErrorKind::validation, "dcrnet reconstruction needs a weights directory");
            out.image = dcr::recon_dcrnet(*model, kspace, mask);
            break;
        default: {
            const CsMethod m = o.method == ReconMethod::cs_mag ? CsMethod::magnitude
                               : o.method == ReconMethod::cspr ? CsMethod::cspr
                                                               : CsMethod::cspc;
            VolumeRecon r = recon_volume(kspace, mask, m, o.solver, o.shift_count, o.shift_seed, o.threads);
            out.image = std::move(r.image);
            out.history = std::move(r.history);
            out.converged = r.converged;
            out.iterations = r.max_iterations;
        }
    }
    return out;
}

struct PipelineOptions {
    qsm::PhantomKind phantom = qsm::PhantomKind::spheres;
    Shape3 shape{64, 64, 32};
    std::uint64_t seed = 42;
    int af = 4;
    ReconOptions recon{ReconMethod::cspc, preset_solver_config(ReconMethod::cspc)};
    std::optional<std::filesystem::path> weights;
    double noise_sigma = 0.0;
    qsm::ResharpConfig resharp;
    double tkd_threshold = 0.19;
    SsimParams ssim;
};

struct PipelineResult {
    Report report;
    std::vector<ComplexVolume> recon;    // one per echo
    qsm::FieldMap local;
    RealVolume chi;
    std::vector<CostTerms> history;      // summed over echoes
    std::vector<std::string> warnings;
};

namespace detail {

inline nlohmann::ordered_json solver_json(const SolverConfig& c) {
    return {{"lambda1", c.lambda1}, {"lambda2", c.lambda2}, {"delta", c.delta}, {"max_outer", c.max_outer},
            {"inner_iters", c.inner_iters}, {"tol", c.tol}, {"step_scale", c.step_scale},
            {"wavelet", "db4"}, {"wavelet_levels", c.wavelet_levels}, {"max_backtracks", c.max_backtracks},
            {"data_consistency", c.enforce_data_consistency}};
}

inline ComplexVolume concat(const std::vector<ComplexVolume>& v) {
    ComplexVolume out({v.front().shape.nx, v.front().shape.ny, v.front().shape.nz * static_cast<int>(v.size())});
    std::size_t k = 0;
    for (const ComplexVolume& e : v)
        for (const cplx& c : e.data) out[k++] = c;
    return out;
}

/// Complex, magnitude and phase fidelity of a multi-echo reconstruction,
/// pooled over echoes.
inline void image_metrics(Report& r, const std::string& method, const std::vector<ComplexVolume>& test,
                          const std::vector<ComplexVolume>& ref, const BoolVolume& object, const SsimParams& sp) {
    const ComplexVolume t = concat(test), f = concat(ref);
    r.add("complex", method, "psnr", psnr(t, f));
    r.add("complex", method, "rmse", rmse(std::span<const cplx>(t.data), std::span<const cplx>(f.data)));
    const RealVolume mt = magnitude(t), mf = magnitude(f);
    r.add("magnitude", method, "psnr", psnr(mt, mf));
    r.add("magnitude", method, "rmse", rmse(std::span<const double>(mt.data), std::span<const double>(mf.data)));
    double s = 0.0;
    for (std::size_t e = 0; e < ref.size(); ++e) s += ssim_volume(test[e], ref[e], sp);
    r.add("magnitude", method, "ssim", s / static_cast<double>(ref.size()));
    std::vector<std::uint8_t> m;
    for (std::size_t e = 0; e < ref.size(); ++e) m.insert(m.end(), object.data.begin(), object.data.end());
    r.add("phase", method, "rmse", phase_rmse(t.data, f.data, m));
}

inline RealVolume masked(const RealVolume& v, const BoolVolume& m) {
    RealVolume out = v;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!m[i]) out[i] = 0.0;
    return out;
}

/// Local field against the fully sampled chain and chi against the truth,
/// both inside `region`; ROI means, correlation and the hemorrhage-region
/// regression for chi.
inline void qsm_metrics(Report& r, const std::string& method, const qsm::FieldMap* local, const qsm::FieldMap* ref_local,
                        const RealVolume& chi, const qsm::SusceptibilityPhantom& p, const BoolVolume& region,
                        const SsimParams& sp) {
    if (local != nullptr && ref_local != nullptr) {
        const RealVolume a = masked(local->field, region), b = masked(ref_local->field, region);
        const auto va = masked_values(a, region), vb = masked_values(b, region);
        r.add("local_field", method, "psnr", psnr(std::span<const double>(va), std::span<const double>(vb)));
        r.add("local_field", method, "rmse", rmse(std::span<const double>(va), std::span<const double>(vb)));
        r.add("local_field", method, "ssim", ssim_volume(a, b, sp));
    }
    const RealVolume a = masked(chi, region), b = masked(p.chi, region);
    const auto va = masked_values(a, region), vb = masked_values(b, region);
    r.add("qsm", method, "psnr", psnr(std::span<const double>(va), std::span<const double>(vb)));
    r.add("qsm", method, "rmse", rmse(std::span<const double>(va), std::span<const double>(vb)));
    r.add("qsm", method, "ssim", ssim_volume(a, b, sp));
    r.add("qsm", method, "correlation", pearson(va, vb));
    const BoolVolume hem = hemorrhage_region(p, region);
    const RegressionResult lr = linreg(masked_values(p.chi, hem), masked_values(chi, hem));
    r.add("qsm", method, "slope", lr.slope, "hemorrhage");
    r.add("qsm", method, "intercept", lr.intercept, "hemorrhage");
    r.add("qsm", method, "r_squared", lr.r_squared, "hemorrhage");
    r.add("qsm", method, "sse", lr.sse, "hemorrhage");
    const RoiMask rois = phantom_rois(p, &region);
    std::vector<std::string> names{"background"};
    for (const qsm::Primitive& prim : p.primitives) names.push_back(prim.name);
    for (const std::string& n : names) {
        const BoolVolume& m = rois.regions.at(n);
        if (qsm::detail::voxel_count(m) == 0) continue;
        const RoiStats st = roi_stats(std::span<const double>(chi.data), std::span<const std::uint8_t>(m.data));
        r.add("qsm", method, "roi_mean", st.mean, n);
        r.add("qsm", method, "roi_std", st.std, n);
    }
}

inline BoolVolume intersect(const BoolVolume& a, const BoolVolume& b) {
    BoolVolume out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] && b[i] ? 1 : 0;
    return out;
}

}  // namespace detail

/// Phantom -> multi-echo GRE -> undersample -> reconstruct -> unwrap, fit,
/// RESHARP, TKD, with metrics for the chosen method, zero-fill and the fully
/// sampled chain.
inline PipelineResult run_pipeline(const PipelineOptions& o) {
    const auto p = qsm::make_phantom(o.phantom, o.shape, o.seed);
    const qsm::EchoSeries truth = qsm::simulate_gre(p, o.noise_sigma, o.seed);
    const MaskSpec spec = make_mask_spec(o.af, o.shape.ny, o.shape.nz, o.seed);
    const SamplingMask mask = realize_mask(spec);
    const ReconMethod method = o.recon.method;
    ReconOptions ro = o.recon;
    ro.shift_seed = o.seed;

    std::optional<dcr::DcrNet> model;
    if (method == ReconMethod::dcrnet) {
        if (!o.weights) fail(ErrorKind::validation, "dcrnet reconstruction needs a weights directory");
        model = dcr::load_weights(*o.weights);
    }

    PipelineResult out;
    std::vector<ComplexVolume> zf;
    for (std::size_t e = 0; e < truth.echoes.size(); ++e) {
        const ComplexVolume k = undersampled_forward(truth.echoes[e], mask);
        zf.push_back(zero_fill_recon(k, mask));
        ReconOutput r = reconstruct(k, mask, ro, model ? &*model : nullptr);
        if (!r.converged)
            out.warnings.push_back(std::string(to_string(method)) + " did not converge on echo " + std::to_string(e) +
                                   " within " + std::to_string(ro.solver.max_outer) + " iterations");
        if (out.history.size() < r.history.size()) out.history.resize(r.history.size(), out.history.empty() ? CostTerms{} : out.history.back());
        for (std::size_t i = 0; i < out.history.size() && !r.history.empty(); ++i) {
            const CostTerms& c = r.history[std::min(i, r.history.size() - 1)];
            out.history[i].data += c.data;
            out.history[i].reg_m += c.reg_m;
            out.history[i].reg_phi += c.reg_phi;
            out.history[i].total += c.total;
        }
        out.recon.push_back(std::move(r.image));
    }

    auto chain = [&](const std::vector<ComplexVolume>& echoes) {
        qsm::EchoSeries s{echoes, truth.te_list, truth.field_ppm};
        const qsm::FieldMap total = qsm::field_from_echoes(s, p.mask);
        return qsm::resharp_remove(total, p.mask, o.resharp);
    };
    const qsm::FieldMap ref_local = chain(truth.echoes);
    const RealVolume ref_chi = qsm::tkd_invert(ref_local, p.b0_dir, o.tkd_threshold, p.b0_gamma_scale);
    out.local = chain(out.recon);
    out.chi = qsm::tkd_invert(out.local, p.b0_dir, o.tkd_threshold, p.b0_gamma_scale);

    Report& r = out.report;
    r.inputs["phantom"] = qsm::to_string(o.phantom);
    r.inputs["shape"] = {o.shape.nx, o.shape.ny, o.shape.nz};
    r.inputs["seed"] = o.seed;
    r.inputs["af"] = o.af;
    r.inputs["method"] = to_string(method);
    r.inputs["echo_times_s"] = truth.te_list;
    r.inputs["b0_dir"] = p.b0_dir;
    r.inputs["noise_sigma"] = o.noise_sigma;

    r.config["mask"] = {{"pa", spec.pa}, {"pb", spec.pb}, {"af", spec.af}, {"calib_y", spec.calib_y},
                        {"calib_z", spec.calib_z}, {"seed", spec.seed}, {"sampled_fraction", mask.fraction()}};
    if (method == ReconMethod::cs_mag || method == ReconMethod::cspr || method == ReconMethod::cspc)
        r.config["solver"] = detail::solver_json(ro.solver);
    if (method == ReconMethod::cspc) r.config["phase_shifts"] = {{"count", ro.shift_count}, {"seed", ro.shift_seed}};
    if (model) {
        r.config["dcrnet"] = {{"blocks", model->config.blocks}, {"channels", model->config.channels},
                              {"convention", dcr::to_string(model->config.convention)}, {"lambda", model->lambda()}};
    }
    r.config["resharp"] = {{"radius", o.resharp.radius}, {"tik", o.resharp.tik}, {"cg_tol", o.resharp.cg_tol},
                           {"cg_max_iter", o.resharp.cg_max_iter}};
    r.config["tkd"] = {{"threshold", o.tkd_threshold}, {"b0_gamma_scale", p.b0_gamma_scale}};
    r.config["metrics"] = {
        {"psnr", "20 log10(max |reference| / RMSE), |diff| for complex data"},
        {"ssim", {{"window", o.ssim.window}, {"sigma", o.ssim.sigma}, {"k1", o.ssim.k1}, {"k2", o.ssim.k2},
                  {"data_range", "max - min of the reference volume"}, {"average", "mean over x-slices"}}},
        {"image_pooling", "all echoes"},
        {"phase_region", "object mask"},
        {"qsm_region", "RESHARP support of both chains"},
        {"qsm_reference", "true chi; local field against the fully sampled chain"}};

    const std::string name = to_string(method);
    detail::image_metrics(r, name, out.recon, truth.echoes, p.mask, o.ssim);
    if (method != ReconMethod::zero_fill) detail::image_metrics(r, "zero-fill", zf, truth.echoes, p.mask, o.ssim);

    const BoolVolume region = detail::intersect(out.local.valid, ref_local.valid);
    detail::qsm_metrics(r, name, &out.local, &ref_local, out.chi, p, region, o.ssim);
    if (method != ReconMethod::zero_fill) {
        const qsm::FieldMap zf_local = chain(zf);
        const BoolVolume zregion = detail::intersect(zf_local.valid, ref_local.valid);
        detail::qsm_metrics(r, "zero-fill", &zf_local, &ref_local,
                            qsm::tkd_invert(zf_local, p.b0_dir, o.tkd_threshold, p.b0_gamma_scale), p, zregion, o.ssim);
    }
    detail::qsm_metrics(r, "fully-sampled", nullptr, nullptr, ref_chi, p, ref_local.valid, o.ssim);

    if (!out.history.empty()) {
        r.add("solver", name, "iterations_max", static_cast<double>(out.history.size() - 1));
        r.add("solver", name, "final_cost", out.history.back().total);
        r.add("solver", name, "converged", out.warnings.empty() ? 1.0 : 0.0);
    }
    return out;
}

}  // namespace cxqsm::eval
