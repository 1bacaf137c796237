#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cxqsm/dcrnet/toy.hpp"
#include "cxqsm/dcrnet/weights.hpp"
#include "cxqsm/eval/experiment.hpp"
#include "cxqsm/io.hpp"

using namespace cxqsm;
using namespace cxqsm::io;
namespace fs = std::filesystem;

namespace {

// Exit codes: 2 usage, 3 io, 4 format, 5 validation, 6 architecture,
// 7 non-convergence promoted by --strict, 1 anything else.
int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::io: return 3;
        case ErrorKind::format: return 4;
        case ErrorKind::validation: return 5;
        case ErrorKind::architecture: return 6;
        case ErrorKind::convergence: return 7;
    }
    return 1;
}

struct Globals {
    std::uint64_t seed = 42;
    int threads = 1;
    std::string trace;
    bool strict = false;
};

struct SolverFlags {
    std::optional<double> lambda1, lambda2, delta, tol, step_scale;
    std::optional<int> max_outer, shifts;

    void add(CLI::App* c) {
        c->add_option("--lambda1", lambda1, "magnitude wavelet weight");
        c->add_option("--lambda2", lambda2, "phase regularisation weight");
        c->add_option("--delta", delta, "edge potential parameter (CS_PR)");
        c->add_option("--max-outer", max_outer, "outer iteration cap");
        c->add_option("--tol", tol, "relative cost change stop");
        c->add_option("--step-scale", step_scale, "step as a fraction of 1/L");
        c->add_option("--shifts", shifts, "phase shift count (CS_PC)");
    }

    eval::ReconOptions apply(eval::ReconMethod m, const Globals& g) const {
        eval::ReconOptions o{m, eval::preset_solver_config(m)};
        if (lambda1) o.solver.lambda1 = *lambda1;
        if (lambda2) o.solver.lambda2 = *lambda2;
        if (delta) o.solver.delta = *delta;
        if (tol) o.solver.tol = *tol;
        if (step_scale) o.solver.step_scale = *step_scale;
        if (max_outer) o.solver.max_outer = *max_outer;
        if (shifts) o.shift_count = *shifts;
        o.shift_seed = g.seed;
        o.threads = g.threads;
        o.solver.validate();
        return o;
    }
};

Shape3 parse_shape(const std::vector<int>& v) {
    require(v.size() == 3, "--shape takes three extents nx ny nz");
    const Shape3 s{v[0], v[1], v[2]};
    require(s.nx > 0 && s.ny > 0 && s.nz > 0, "shape extents must be positive");
    return s;
}

qsm::Vec3 parse_vec3(const std::vector<double>& v, const std::string& what) {
    require(v.size() == 3, what + " takes three components");
    return qsm::normalized({v[0], v[1], v[2]});
}

BoolVolume read_bool_volume(const fs::path& path) {
    const RealVolume r = read_real_cvol(path);
    BoolVolume b(r.shape);
    for (std::size_t i = 0; i < r.size(); ++i) b[i] = r[i] != 0.0 ? 1 : 0;
    return b;
}

RealVolume to_real(const BoolVolume& b) {
    RealVolume r(b.shape);
    for (std::size_t i = 0; i < b.size(); ++i) r[i] = b[i] ? 1.0 : 0.0;
    return r;
}

void write_phantom_files(const qsm::SusceptibilityPhantom& p, const fs::path& dir) {
    write_real_cvol(dir / "chi.cvol", p.chi, "ppm");
    write_real_cvol(dir / "mask.cvol", to_real(p.mask));
    nlohmann::ordered_json j;
    j["kind"] = qsm::to_string(p.kind);
    j["seed"] = p.seed;
    j["shape"] = {p.chi.shape.nx, p.chi.shape.ny, p.chi.shape.nz};
    j["b0_dir"] = p.b0_dir;
    j["te_list_s"] = p.te_list;
    j["delta_te_s"] = p.delta_te;
    j["b0_gamma_scale"] = p.b0_gamma_scale;
    j["r2star"] = p.r2star;
    j["primitives"] = nlohmann::ordered_json::array();
    for (const qsm::Primitive& prim : p.primitives)
        j["primitives"].push_back({{"name", prim.name}, {"label", prim.label}, {"chi_ppm", prim.chi}});
    write_atomic(dir / "phantom.json", j.dump(2) + "\n");
}

void finish_recon_warnings(const std::vector<std::string>& warnings, const Globals& g) {
    for (const std::string& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (g.strict && !warnings.empty()) fail(ErrorKind::convergence, warnings.front());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Accelerated QSM reconstruction toolkit: masks, phantoms, CS and DCRNet reconstruction, QSM chain, metrics"};
    app.set_version_flag("--version", std::string(eval::kVersion));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads for slice-parallel work")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--trace", g.trace, "write a CSV trace (cost history or training loss)");
    app.add_flag("--strict", g.strict, "treat solver non-convergence as an error");

    // gen-mask
    auto* gen_mask = app.add_subcommand("gen-mask", "variable-density k-space sampling mask");
    int gm_af = 4, gm_ny = 64, gm_nz = 64;
    std::optional<int> gm_cy, gm_cz;
    std::optional<double> gm_pa, gm_pb;
    std::string gm_out;
    gen_mask->add_option("--af", gm_af, "acceleration factor (1 = fully sampled)")->required();
    gen_mask->add_option("--ny", gm_ny, "phase-encode lines along y")->required();
    gen_mask->add_option("--nz", gm_nz, "phase-encode lines along z")->required();
    gen_mask->add_option("--calib-y", gm_cy, "calibration half-width along y");
    gen_mask->add_option("--calib-z", gm_cz, "calibration half-width along z");
    gen_mask->add_option("--pa", gm_pa, "density scale Pa");
    gen_mask->add_option("--pb", gm_pb, "density exponent Pb");
    gen_mask->add_option("-o,--out", gm_out, "output .mask")->required();

    // phantom / simulate
    std::string ph_kind = "spheres", ph_out;
    std::vector<int> ph_shape{64, 64, 32};
    double sim_noise = 0.0;
    auto* phantom = app.add_subcommand("phantom", "synthetic susceptibility phantom");
    phantom->add_option("--kind", ph_kind, "spheres | cylinders | shepp3d")->capture_default_str();
    phantom->add_option("--shape", ph_shape, "nx ny nz")->expected(3);
    phantom->add_option("-o,--out", ph_out, "output directory")->required();
    auto* simulate = app.add_subcommand("simulate", "multi-echo GRE images of a phantom");
    simulate->add_option("--kind", ph_kind, "spheres | cylinders | shepp3d")->capture_default_str();
    simulate->add_option("--shape", ph_shape, "nx ny nz")->expected(3);
    simulate->add_option("--noise", sim_noise, "complex Gaussian noise std per component");
    simulate->add_option("-o,--out", ph_out, "output directory")->required();

    // undersample
    auto* undersample = app.add_subcommand("undersample", "masked k-space of an image volume");
    std::string us_in, us_mask, us_out;
    undersample->add_option("--in", us_in, "image .cvol")->required();
    undersample->add_option("--mask", us_mask, ".mask")->required();
    undersample->add_option("-o,--out", us_out, "k-space .cvol")->required();

    // recon
    auto* recon = app.add_subcommand("recon", "reconstruct images from undersampled k-space");
    std::string rc_method, rc_in, rc_mask, rc_out, rc_truth, rc_weights;
    SolverFlags rc_flags;
    recon->add_option("--method", rc_method, "zero-fill | cs-mag | cspr | cspc | dcrnet")
        ->required()
        ->check(CLI::IsMember({"zero-fill", "cs-mag", "cspr", "cspc", "dcrnet"}));
    recon->add_option("--in", rc_in, "k-space .cvol")->required();
    recon->add_option("--mask", rc_mask, ".mask")->required();
    recon->add_option("-o,--out", rc_out, "image .cvol")->required();
    recon->add_option("--truth", rc_truth, "reference image .cvol; prints PSNR/SSIM");
    recon->add_option("--weights", rc_weights, "DCRNet weights directory");
    rc_flags.add(recon);

    // train-toy
    auto* train = app.add_subcommand("train-toy", "train a small DCRNet on phantom slices");
    int tr_af = 4, tr_channels = 8, tr_blocks = 2, tr_batch = 8;
    long tr_steps = 200;
    std::string tr_out, tr_convention = "printed";
    bool tr_f64 = false;
    train->add_option("--af", tr_af, "acceleration factor")->capture_default_str();
    train->add_option("--steps", tr_steps, "Adam steps")->capture_default_str();
    train->add_option("--channels", tr_channels)->capture_default_str();
    train->add_option("--blocks", tr_blocks)->capture_default_str();
    train->add_option("--batch", tr_batch)->capture_default_str();
    train->add_option("--convention", tr_convention, "printed | complex-multiply")
        ->check(CLI::IsMember({"printed", "complex-multiply"}));
    train->add_flag("--f64", tr_f64, "store weights as f64le");
    train->add_option("-o,--out", tr_out, "weights directory")->required();

    // qsm
    auto* qsm_cmd = app.add_subcommand("qsm", "QSM chain stages");
    qsm_cmd->require_subcommand(1);
    std::vector<std::string> q_in;
    std::string q_mask, q_out;
    std::vector<double> q_te, q_b0{0.0, 0.0, 1.0}, q_b0s;
    int q_radius = 4;
    double q_tik = 1e-3, q_threshold = 0.19;
    auto* q_unwrap = qsm_cmd->add_subcommand("unwrap", "unwrap the phase of a complex image");
    auto* q_fit = qsm_cmd->add_subcommand("fit", "field map from multi-echo images");
    auto* q_resharp = qsm_cmd->add_subcommand("resharp", "background field removal");
    auto* q_tkd = qsm_cmd->add_subcommand("tkd", "truncated k-space division");
    auto* q_cosmos = qsm_cmd->add_subcommand("cosmos", "multi-orientation inversion");
    for (auto* c : {q_unwrap, q_fit, q_resharp, q_tkd, q_cosmos}) {
        c->add_option("--mask", q_mask, "object mask .cvol (nonzero = inside)")->required();
        c->add_option("-o,--out", q_out, "output .cvol")->required();
    }
    q_unwrap->add_option("--in", q_in, "complex image .cvol")->required()->expected(1);
    q_fit->add_option("--in", q_in, "echo .cvol files in TE order")->required()->expected(2, 64);
    q_fit->add_option("--te", q_te, "echo times in seconds (default 3 ms + 3.3 ms spacing)");
    q_resharp->add_option("--in", q_in, "total field .cvol (rad/s)")->required()->expected(1);
    q_resharp->add_option("--radius", q_radius, "SMV radius in voxels")->capture_default_str();
    q_resharp->add_option("--tik", q_tik, "Tikhonov weight")->capture_default_str();
    q_tkd->add_option("--in", q_in, "local field .cvol (rad/s)")->required()->expected(1);
    q_tkd->add_option("--b0", q_b0, "field direction")->expected(3);
    q_tkd->add_option("--threshold", q_threshold, "kernel threshold")->capture_default_str();
    q_cosmos->add_option("--in", q_in, "local field .cvol per orientation")->required()->expected(3, 64);
    q_cosmos->add_option("--b0", q_b0s, "field directions, three numbers per input")->required();

    // metrics
    auto* metrics = app.add_subcommand("metrics", "compare a volume against a reference");
    std::string mt_test, mt_ref, mt_mask, mt_stage = "complex", mt_out;
    metrics->add_option("--test", mt_test, ".cvol under test")->required();
    metrics->add_option("--ref", mt_ref, "reference .cvol")->required();
    metrics->add_option("--mask", mt_mask, "region .cvol (nonzero = inside)");
    metrics->add_option("--stage", mt_stage, "complex | magnitude | phase | local_field | qsm")
        ->check(CLI::IsMember({"complex", "magnitude", "phase", "local_field", "qsm"}));
    metrics->add_option("-o,--out", mt_out, "report .json (default: stdout)");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "phantom to susceptibility map with a metrics report");
    std::string pl_phantom = "spheres", pl_method = "cspc", pl_report, pl_weights;
    int pl_af = 4;
    std::vector<int> pl_shape{64, 64, 32};
    double pl_noise = 0.0;
    SolverFlags pl_flags;
    pipeline->add_option("--phantom", pl_phantom, "spheres | cylinders | shepp3d")->capture_default_str();
    pipeline->add_option("--shape", pl_shape, "nx ny nz")->expected(3);
    pipeline->add_option("--af", pl_af, "acceleration factor")->capture_default_str();
    pipeline->add_option("--method", pl_method, "zero-fill | cs-mag | cspr | cspc | dcrnet")
        ->check(CLI::IsMember({"zero-fill", "cs-mag", "cspr", "cspc", "dcrnet"}))
        ->capture_default_str();
    pipeline->add_option("--weights", pl_weights, "DCRNet weights directory");
    pipeline->add_option("--noise", pl_noise, "complex Gaussian noise std per component");
    pipeline->add_option("--report", pl_report, "output directory")->required();
    pl_flags.add(pipeline);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen_mask) {
            // AF 1 is full sampling; the density parameters are then irrelevant.
            MaskSpec spec = make_mask_spec(gm_af == 1 ? 2 : gm_af, gm_ny, gm_nz, g.seed);
            spec.af = gm_af;
            if (gm_cy) spec.calib_y = *gm_cy;
            if (gm_cz) spec.calib_z = *gm_cz;
            if (gm_pa) spec.pa = *gm_pa;
            if (gm_pb) spec.pb = *gm_pb;
            const SamplingMask m = realize_mask(spec);
            write_mask(gm_out, m);
            std::printf("mask %dx%d af %d: %zu of %zu lines sampled\n", gm_ny, gm_nz, gm_af, m.count(), m.plane.size());
        } else if (*phantom) {
            const auto p = qsm::make_phantom(qsm::phantom_kind_from_string(ph_kind), parse_shape(ph_shape), g.seed);
            write_phantom_files(p, ph_out);
            std::printf("phantom %s: %zu primitives\n", ph_kind.c_str(), p.primitives.size());
        } else if (*simulate) {
            require(sim_noise >= 0.0, "noise must be non-negative");
            const auto p = qsm::make_phantom(qsm::phantom_kind_from_string(ph_kind), parse_shape(ph_shape), g.seed);
            const qsm::EchoSeries s = qsm::simulate_gre(p, sim_noise, g.seed);
            write_phantom_files(p, ph_out);
            write_real_cvol(fs::path(ph_out) / "field_ppm.cvol", s.field_ppm, "ppm");
            for (std::size_t e = 0; e < s.echoes.size(); ++e) {
                char name[32];
                std::snprintf(name, sizeof name, "echo_%02zu.cvol", e);
                write_cvol(fs::path(ph_out) / name, s.echoes[e]);
            }
            std::printf("simulated %zu echoes\n", s.echoes.size());
        } else if (*undersample) {
            const CvolFile in = read_cvol(us_in);
            if (in.volume.domain != Domain::image) fail(ErrorKind::validation, us_in + " is not an image-domain volume");
            write_cvol(us_out, undersampled_forward(in.volume, read_mask(us_mask)));
        } else if (*recon) {
            const CvolFile in = read_cvol(rc_in);
            if (in.volume.domain != Domain::kspace) fail(ErrorKind::validation, rc_in + " is not a k-space volume");
            const SamplingMask mask = read_mask(rc_mask);
            const eval::ReconMethod m = eval::recon_method_from_string(rc_method);
            std::optional<dcr::DcrNet> model;
            if (m == eval::ReconMethod::dcrnet) {
                if (rc_weights.empty()) fail(ErrorKind::validation, "--weights is required for dcrnet");
                model = dcr::load_weights(rc_weights);
            }
            ComplexVolume k = in.volume;
            apply_mask(k, mask);
            const eval::ReconOutput r = eval::reconstruct(k, mask, rc_flags.apply(m, g), model ? &*model : nullptr);
            if (!g.trace.empty() && !r.history.empty()) write_atomic(g.trace, cost_history_csv(r.history));
            if (!rc_truth.empty()) {
                const ComplexVolume t = read_cvol(rc_truth).volume;
                require(t.shape == r.image.shape, "truth and reconstruction differ in shape");
                const double v = eval::psnr(r.image, t);
                std::printf("psnr %s ssim %.6f\n", std::isinf(v) ? "inf" : std::to_string(v).c_str(), eval::ssim_volume(r.image, t));
            }
            std::vector<std::string> warnings;
            if (!r.converged) warnings.push_back(rc_method + " did not converge");
            write_cvol(rc_out, r.image);
            finish_recon_warnings(warnings, g);
        } else if (*train) {
            require(tr_steps >= 0, "--steps must be non-negative");
            const auto p = qsm::make_phantom(qsm::PhantomKind::spheres, {64, 64, 32}, g.seed);
            const ComplexVolume truth = qsm::simulate_gre(p).echoes.front();
            const SamplingMask mask = realize_mask(make_mask_spec(tr_af, 64, 32, g.seed));
            const dcr::ToySplit split = dcr::toy_split(truth, mask);
            dcr::DcrNetConfig cfg{tr_channels, tr_blocks,
                                  tr_convention == "printed" ? dcr::ConvConvention::printed : dcr::ConvConvention::complex_multiply};
            cfg.validate();
            dcr::DcrNet model = dcr::make_dcrnet(cfg, g.seed);
            dcr::TrainConfig tc = dcr::toy_train_config(g.seed);
            tc.batch = tr_batch;
            const dcr::ToyOutcome o = dcr::run_toy(split, model, tc, tr_steps);
            dcr::save_weights(model, tr_out, tr_f64 ? dcr::WeightDtype::f64le : dcr::WeightDtype::f32le);
            if (!g.trace.empty()) write_atomic(g.trace, dcr::train_trace_csv(o.trace));
            std::printf("train mse %.6e -> %.6e; held-out psnr %.3f dB (zero-fill %.3f dB); lambda %.6f\n", o.mse_before,
                        o.mse_after, o.psnr_model, o.psnr_zero_fill, model.lambda());
        } else if (*qsm_cmd) {
            const BoolVolume mask = read_bool_volume(q_mask);
            if (*q_unwrap) {
                const ComplexVolume img = read_cvol(q_in.front()).volume;
                require(img.shape == mask.shape, "image and mask shapes differ");
                write_real_cvol(q_out, qsm::unwrap_phase(phase(img), mask), "rad");
            } else if (*q_fit) {
                qsm::EchoSeries s;
                for (const std::string& f : q_in) s.echoes.push_back(read_cvol(f).volume);
                s.te_list = q_te.empty() ? qsm::default_echo_times(static_cast<int>(s.echoes.size())) : q_te;
                const qsm::FieldMap f = qsm::field_from_echoes(s, mask);
                write_real_cvol(q_out, f.field, "rad_s");
            } else if (*q_resharp) {
                qsm::ResharpConfig rc;
                rc.radius = q_radius;
                rc.tik = q_tik;
                const qsm::FieldMap total{read_real_cvol(q_in.front()), mask, "rad_s"};
                require(total.field.shape == mask.shape, "field and mask shapes differ");
                write_real_cvol(q_out, qsm::resharp_remove(total, mask, rc).field, "rad_s");
            } else if (*q_tkd) {
                const qsm::FieldMap local{read_real_cvol(q_in.front()), mask, "rad_s"};
                require(local.field.shape == mask.shape, "field and mask shapes differ");
                write_real_cvol(q_out, qsm::tkd_invert(local, parse_vec3(q_b0, "--b0"), q_threshold), "ppm");
            } else if (*q_cosmos) {
                require(q_b0s.size() == 3 * q_in.size(), "--b0 needs three numbers per input field");
                std::vector<qsm::OrientedField> fields;
                for (std::size_t i = 0; i < q_in.size(); ++i) {
                    qsm::FieldMap f{read_real_cvol(q_in[i]), mask, "rad_s"};
                    require(f.field.shape == mask.shape, "field and mask shapes differ");
                    fields.push_back({std::move(f), parse_vec3({q_b0s[3 * i], q_b0s[3 * i + 1], q_b0s[3 * i + 2]}, "--b0")});
                }
                write_real_cvol(q_out, qsm::cosmos_invert(fields), "ppm");
            }
        } else if (*metrics) {
            const ComplexVolume t = read_cvol(mt_test).volume, r = read_cvol(mt_ref).volume;
            require(t.shape == r.shape, "test and reference differ in shape");
            BoolVolume region(r.shape, Domain::image, 1);
            if (!mt_mask.empty()) region = read_bool_volume(mt_mask);
            require(region.shape == r.shape, "mask and reference differ in shape");
            eval::Report rep;
            rep.inputs["test"] = mt_test;
            rep.inputs["ref"] = mt_ref;
            rep.inputs["mask"] = mt_mask.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(mt_mask);
            rep.inputs["stage"] = mt_stage;
            rep.config["psnr"] = "20 log10(max |reference| / RMSE) over the region";
            rep.config["ssim"] = {{"window", 11}, {"sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03},
                                  {"data_range", "max - min of the reference volume"}, {"average", "mean over x-slices"}};
            if (mt_stage == "phase") {
                rep.add("phase", "test", "rmse", eval::phase_rmse(t.data, r.data, region.data));
            } else if (mt_stage == "complex") {
                std::vector<cplx> a, b;
                for (std::size_t i = 0; i < r.size(); ++i)
                    if (region[i]) {
                        a.push_back(t[i]);
                        b.push_back(r[i]);
                    }
                rep.add("complex", "test", "psnr", eval::psnr(std::span<const cplx>(a), std::span<const cplx>(b)));
                rep.add("complex", "test", "rmse", eval::rmse(std::span<const cplx>(a), std::span<const cplx>(b)));
                rep.add("complex", "test", "ssim", eval::ssim_volume(t, r));
            } else {
                // Magnitude for image stages, the real part for field and chi maps.
                const bool mag = mt_stage == "magnitude";
                const RealVolume a = eval::detail::masked(mag ? magnitude(t) : real_part(t), region);
                const RealVolume b = eval::detail::masked(mag ? magnitude(r) : real_part(r), region);
                const auto va = eval::masked_values(a, region), vb = eval::masked_values(b, region);
                rep.add(mt_stage, "test", "psnr", eval::psnr(std::span<const double>(va), std::span<const double>(vb)));
                rep.add(mt_stage, "test", "rmse", eval::rmse(std::span<const double>(va), std::span<const double>(vb)));
                rep.add(mt_stage, "test", "ssim", eval::ssim_volume(a, b));
                if (!mag) rep.add(mt_stage, "test", "correlation", eval::pearson(va, vb));
            }
            if (mt_out.empty())
                std::cout << rep.dump();
            else
                write_atomic(mt_out, rep.dump());
        } else if (*pipeline) {
            eval::PipelineOptions o;
            o.phantom = qsm::phantom_kind_from_string(pl_phantom);
            o.shape = parse_shape(pl_shape);
            o.seed = g.seed;
            o.af = pl_af;
            o.noise_sigma = pl_noise;
            require(pl_noise >= 0.0, "noise must be non-negative");
            const eval::ReconMethod m = eval::recon_method_from_string(pl_method);
            o.recon = pl_flags.apply(m, g);
            if (!pl_weights.empty()) o.weights = pl_weights;
            const eval::PipelineResult r = eval::run_pipeline(o);
            const fs::path dir(pl_report);
            write_atomic(dir / "report.json", r.report.dump());
            write_real_cvol(dir / "chi.cvol", r.chi, "ppm");
            write_real_cvol(dir / "local_field.cvol", r.local.field, "rad_s");
            if (!g.trace.empty() && !r.history.empty()) write_atomic(g.trace, cost_history_csv(r.history));
            const eval::MetricEntry* psnr = r.report.find("complex", pl_method, "psnr");
            const eval::MetricEntry* zf = r.report.find("complex", "zero-fill", "psnr");
            const eval::MetricEntry* corr = r.report.find("qsm", pl_method, "correlation");
            std::printf("%s: complex psnr %.3f dB (zero-fill %.3f dB), chi correlation %.4f\n", pl_method.c_str(),
                        psnr ? psnr->value : 0.0, zf ? zf->value : 0.0, corr ? corr->value : 0.0);
            finish_recon_warnings(r.warnings, g);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
