#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cxqsm/qsm/pipeline.hpp"
#include "cxqsm/rng.hpp"

using namespace cxqsm;
using namespace cxqsm::qsm;

namespace {

constexpr double kPi = std::numbers::pi;

const SusceptibilityPhantom& reference_phantom() {
    static const SusceptibilityPhantom p = make_phantom(PhantomKind::spheres, {64, 64, 32}, 42);
    return p;
}

RealVolume scaled(RealVolume v, double c) {
    for (auto& x : v.data) x *= c;
    return v;
}

RealVolume wrap_all(const RealVolume& v) {
    RealVolume out = v;
    for (auto& x : out.data) x = std::remainder(x, 2.0 * kPi);
    return out;
}

double rmse(const RealVolume& a, const RealVolume& b, const BoolVolume& m) {
    double se = 0.0, n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (m[i]) {
            se += (a[i] - b[i]) * (a[i] - b[i]);
            n += 1.0;
        }
    return std::sqrt(se / n);
}

double range_over(const RealVolume& v, const BoolVolume& m) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (m[i]) {
            lo = std::min(lo, v[i]);
            hi = std::max(hi, v[i]);
        }
    return hi - lo;
}

FieldMap true_field(const SusceptibilityPhantom& p, Vec3 dir, const BoolVolume& valid) {
    return {scaled(dipole_field(p.chi, dir), p.b0_gamma_scale), valid, "rad_s"};
}

BoolVolume all_true(Shape3 s) { return BoolVolume(s, Domain::image, 1); }

}  // namespace

TEST(Dipole, KernelValues) {
    const Shape3 s{16, 16, 16};
    const RealVolume d = dipole_kernel(s, {0.0, 0.0, 1.0});
    EXPECT_EQ(d(8, 8, 8), 0.0);
    EXPECT_NEAR(d(8, 8, 11), -2.0 / 3.0, 1e-15);
    EXPECT_NEAR(d(3, 8, 8), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(d(13, 3, 8), 1.0 / 3.0, 1e-15);
    // |kx| = |ky| = |kz| lies on the magic-angle cone.
    EXPECT_NEAR(d(10, 6, 10), 0.0, 1e-15);
    // Tilted field: k parallel to b.
    const RealVolume t = dipole_kernel(s, {1.0, 1.0, 0.0});
    EXPECT_NEAR(t(10, 10, 8), -2.0 / 3.0, 1e-15);
}

TEST(Phantom, DeterministicAndZeroOutsideMask) {
    const auto a = make_phantom(PhantomKind::spheres, {32, 32, 16}, 7);
    const auto b = make_phantom(PhantomKind::spheres, {32, 32, 16}, 7);
    EXPECT_EQ(a.chi.data, b.chi.data);
    EXPECT_EQ(a.mask.data, b.mask.data);
    for (PhantomKind k : {PhantomKind::spheres, PhantomKind::cylinders, PhantomKind::shepp3d}) {
        const auto p = make_phantom(k, {48, 48, 24}, 3);
        for (std::size_t i = 0; i < p.chi.size(); ++i) {
            if (!p.mask[i]) EXPECT_EQ(p.chi[i], 0.0);
            EXPECT_GE(p.chi[i], -0.2);
            EXPECT_LE(p.chi[i], 0.5);
        }
    }
}

TEST(Phantom, ReferenceHistogramFrozen) {
    struct Entry {
        const char* name;
        int voxels;
        double chi;
    };
    const Entry expected[] = {
        {"sphere_0", 8, -0.1563127399550274},   {"sphere_1", 3, 0.4090231443284334},
        {"sphere_2", 36, 0.45319724535282185},  {"sphere_3", 10, 0.00089520750925042858},
        {"sphere_4", 12, 0.44889057043411557},  {"sphere_5", 10, -0.084810936435124898},
        {"sphere_6", 20, 0.31349849671015989},  {"sphere_7", 10, 0.34788393901667264},
        {"sphere_8", 26, 0.40120410008164048},  {"sphere_9", 16, 0.32331289756284171},
        {"sphere_10", 12, -0.11117537820430957}, {"sphere_11", 43, -0.04520820832309802},
        {"sphere_12", 16, 0.040663628091291842}, {"sphere_13", 12, 0.083516022665451273},
        {"sphere_14", 18, 0.087683286980382746}, {"sphere_15", 31, 0.29557054623555873},
        {"sphere_16", 29, 0.31049983621855443}, {"sphere_17", 26, -0.017090961487930656},
        {"sphere_18", 10, 0.29488565266162176}, {"sphere_19", 43, 0.46987683641734662},
        {"sphere_20", 13, 0.12345384199883119}, {"sphere_21", 16, 0.18962234056302946},
        {"sphere_22", 25, 0.45591457788217943}, {"sphere_23", 18, 0.19600223467344652},
    };
    const auto& p = reference_phantom();
    ASSERT_EQ(p.primitives.size(), std::size(expected));
    for (std::size_t j = 0; j < p.primitives.size(); ++j) {
        const Primitive& prim = p.primitives[j];
        int count = 0;
        for (int l : p.labels.data) count += l == prim.label;
        EXPECT_EQ(prim.name, expected[j].name);
        EXPECT_EQ(count, expected[j].voxels) << prim.name;
        EXPECT_DOUBLE_EQ(prim.chi, expected[j].chi) << prim.name;
    }
    int mask_voxels = 0;
    for (auto v : p.mask.data) mask_voxels += v;
    EXPECT_EQ(mask_voxels, 29056);
}

TEST(Phantom, ExternalSourcesStayOutsideObject) {
    const auto p = make_external_source_phantom({64, 64, 32}, 42);
    int outside = 0;
    for (std::size_t i = 0; i < p.chi.size(); ++i) {
        if (p.mask[i]) EXPECT_EQ(p.chi[i], 0.0);
        else outside += p.chi[i] != 0.0;
    }
    EXPECT_GT(outside, 0);
}

TEST(Simulate, ZeroChiGivesZeroPhase) {
    auto p = make_phantom(PhantomKind::spheres, {24, 24, 16}, 1);
    std::fill(p.chi.data.begin(), p.chi.data.end(), 0.0);
    const auto s = simulate_gre(p);
    ASSERT_EQ(s.echoes.size(), p.te_list.size());
    for (const auto& e : s.echoes)
        for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(std::arg(e[i]), 0.0);
}

TEST(Simulate, FieldIsLinearInChi) {
    auto p = make_phantom(PhantomKind::cylinders, {24, 24, 16}, 5);
    auto q = p;
    q.chi = scaled(p.chi, 2.0);
    EXPECT_EQ(simulate_gre(q).field_ppm.data, scaled(simulate_gre(p).field_ppm, 2.0).data);
}

TEST(Simulate, UniformChiGivesNoField) {
    auto p = make_phantom(PhantomKind::spheres, {16, 16, 16}, 1);
    std::fill(p.chi.data.begin(), p.chi.data.end(), 0.3);
    const auto s = simulate_gre(p);
    for (double f : s.field_ppm.data) EXPECT_NEAR(f, 0.0, 1e-14);
}

TEST(Simulate, MagnitudeDecay) {
    const auto& p = reference_phantom();
    const auto s = simulate_gre(p);
    for (std::size_t e = 0; e < s.echoes.size(); ++e) {
        const double expect = std::exp(-p.te_list[e] * p.r2star);
        for (std::size_t i = 0; i < p.mask.size(); i += 97)
            EXPECT_NEAR(std::abs(s.echoes[e][i]), p.mask[i] ? expect : 0.0, 1e-15);
    }
}

TEST(Unwrap, SmoothPhaseIsUnchanged) {
    const Shape3 s{12, 10, 8};
    RealVolume truth(s);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) truth(x, y, z) = -2.5 + 0.2 * x + 0.15 * y + 0.1 * z;
    const RealVolume out = unwrap_phase(truth, all_true(s));
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], truth[i], 1e-14);
}

TEST(Unwrap, RampSpanningSixPi) {
    const Shape3 s{40, 12, 6};
    RealVolume truth(s);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) truth(x, y, z) = -3.0 * kPi + 6.0 * kPi * x / (s.nx - 1) + 0.05 * y - 0.03 * z;
    const RealVolume out = unwrap_phase(wrap_all(truth), all_true(s));
    double mean = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) mean += out[i] - truth[i];
    mean /= static_cast<double>(out.size());
    double var = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) var += std::pow(out[i] - truth[i] - mean, 2);
    EXPECT_LT(std::sqrt(var / static_cast<double>(out.size())), 1e-6);
    const double k = mean / (2.0 * kPi);
    EXPECT_NEAR(k, std::round(k), 1e-9);
}

TEST(Unwrap, DisconnectedRegionsIndependent) {
    const Shape3 s{30, 8, 4};
    RealVolume truth(s);
    BoolVolume mask(s);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                if (x == 14 || x == 15) continue;
                mask(x, y, z) = 1;
                truth(x, y, z) = x < 14 ? 0.9 * x : 5.0 - 0.8 * x;
            }
    const RealVolume out = unwrap_phase(wrap_all(truth), mask);
    for (int region = 0; region < 2; ++region) {
        double offset = 0.0;
        bool first = true;
        for (int z = 0; z < s.nz; ++z)
            for (int y = 0; y < s.ny; ++y)
                for (int x = region ? 16 : 0; x < (region ? s.nx : 14); ++x) {
                    const double d = out(x, y, z) - truth(x, y, z);
                    if (first) offset = d, first = false;
                    EXPECT_NEAR(d, offset, 1e-9);
                }
        EXPECT_NEAR(offset / (2.0 * kPi), std::round(offset / (2.0 * kPi)), 1e-9);
    }
}

TEST(Unwrap, EmptyMaskThrows) {
    const Shape3 s{4, 4, 4};
    EXPECT_THROW(unwrap_phase(RealVolume(s), BoolVolume(s)), Error);
}

TEST(FieldFit, ExactLine) {
    const Shape3 s{1, 1, 1};
    std::vector<RealVolume> ph, mag;
    for (double v : {0.1, 0.2, 0.3}) {
        ph.push_back(RealVolume(s, Domain::image, v));
        mag.push_back(RealVolume(s, Domain::image, 1.0));
    }
    const FieldMap f = fit_field(ph, mag, {1e-3, 2e-3, 3e-3});
    EXPECT_NEAR(f.field[0], 100.0, 1e-9);
    EXPECT_TRUE(f.valid[0]);
}

TEST(FieldFit, ZeroWeightIgnoresEcho) {
    const Shape3 s{1, 1, 1};
    const std::vector<double> te{1e-3, 2e-3, 3e-3};
    std::vector<RealVolume> ph{RealVolume(s, Domain::image, 0.1), RealVolume(s, Domain::image, 7.0),
                               RealVolume(s, Domain::image, 0.5)};
    std::vector<RealVolume> mag{RealVolume(s, Domain::image, 1.0), RealVolume(s, Domain::image, 0.0),
                                RealVolume(s, Domain::image, 1.0)};
    const double with_garbage = fit_field(ph, mag, te).field[0];
    ph[1][0] = -3.0;
    EXPECT_EQ(fit_field(ph, mag, te).field[0], with_garbage);
    EXPECT_NEAR(with_garbage, 200.0, 1e-9);
}

TEST(FieldFit, ZeroWeightsMarkInvalid) {
    const Shape3 s{2, 1, 1};
    std::vector<RealVolume> ph(2, RealVolume(s)), mag(2, RealVolume(s));
    mag[0][1] = mag[1][1] = 1.0;
    const FieldMap f = fit_field(ph, mag, {1e-3, 2e-3});
    EXPECT_FALSE(f.valid[0]);
    EXPECT_TRUE(f.valid[1]);
    EXPECT_THROW(fit_field({ph[0]}, {mag[0]}, {1e-3}), Error);
}

TEST(FieldFit, NoiselessChainRecoversField) {
    const auto& p = reference_phantom();
    const auto s = simulate_gre(p);
    const FieldMap f = field_from_echoes(s, p.mask);
    double scale = 0.0;
    for (std::size_t i = 0; i < f.field.size(); ++i) scale = std::max(scale, std::abs(p.b0_gamma_scale * s.field_ppm[i]));
    for (std::size_t i = 0; i < f.field.size(); ++i) {
        if (!p.mask[i]) {
            EXPECT_FALSE(f.valid[i]);
            continue;
        }
        ASSERT_TRUE(f.valid[i]);
        EXPECT_NEAR(f.field[i], p.b0_gamma_scale * s.field_ppm[i], 1e-9 * scale);
    }
}

TEST(FieldFit, ScalingChiScalesField) {
    auto p = make_phantom(PhantomKind::spheres, {32, 32, 16}, 9);
    p.chi = scaled(p.chi, 0.1);  // no wraps at any echo
    auto q = p;
    q.chi = scaled(p.chi, 3.0);
    const FieldMap a = field_from_echoes(simulate_gre(p), p.mask);
    const FieldMap b = field_from_echoes(simulate_gre(q), q.mask);
    double scale = 0.0;
    for (double v : b.field.data) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < a.field.size(); ++i) EXPECT_NEAR(b.field[i], 3.0 * a.field[i], 1e-9 * scale);
}

TEST(Resharp, ZeroAndConstantFields) {
    const auto& p = reference_phantom();
    const Shape3 s = p.mask.shape;
    const FieldMap zero = resharp_remove({RealVolume(s), p.mask, "rad_s"}, p.mask);
    for (double v : zero.field.data) EXPECT_EQ(v, 0.0);
    const FieldMap flat = resharp_remove({RealVolume(s, Domain::image, 40.0), p.mask, "rad_s"}, p.mask);
    for (std::size_t i = 0; i < flat.field.size(); ++i)
        if (flat.valid[i]) EXPECT_NEAR(flat.field[i], 0.0, 1e-6);
}

TEST(Resharp, SmvKernelIsNormalised) {
    const RealVolume k = smv_spectrum({16, 16, 16}, 3);
    EXPECT_NEAR(k(8, 8, 8), 1.0, 1e-12);
}

TEST(Resharp, ExternalSourcesRemoved) {
    const auto p = make_external_source_phantom({64, 64, 32}, 42);
    const FieldMap total = true_field(p, p.b0_dir, p.mask);
    const FieldMap local = resharp_remove(total, p.mask);
    double bg = 0.0, left = 0.0;
    for (std::size_t i = 0; i < local.field.size(); ++i)
        if (local.valid[i]) {
            bg += total.field[i] * total.field[i];
            left += local.field[i] * local.field[i];
        }
    EXPECT_LT(std::sqrt(left / bg), 0.02);
}

TEST(Resharp, InvalidInputs) {
    const auto& p = reference_phantom();
    const FieldMap f{RealVolume(p.mask.shape), p.mask, "rad_s"};
    ResharpConfig cfg;
    cfg.radius = 0;
    EXPECT_THROW(resharp_remove(f, p.mask, cfg), Error);
    cfg.radius = 40;
    EXPECT_THROW(resharp_remove(f, p.mask, cfg), Error);
}

TEST(Tkd, ZeroFieldGivesZeroChi) {
    const Shape3 s{16, 16, 8};
    const RealVolume chi = tkd_invert({RealVolume(s), all_true(s), "rad_s"}, {0.0, 0.0, 1.0});
    for (double v : chi.data) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(tkd_invert({RealVolume(s), all_true(s), "rad_s"}, {0.0, 0.0, 1.0}, 0.7), Error);
    EXPECT_THROW(tkd_invert({RealVolume(s), all_true(s), "rad_s"}, {0.0, 0.0, 1.0}, 0.0), Error);
}

TEST(Tkd, ReferencePhantomRmseFrozen) {
    const auto& p = reference_phantom();
    const RealVolume chi = tkd_invert(true_field(p, p.b0_dir, p.mask), p.b0_dir);
    const double r = rmse(chi, p.chi, p.mask);
    EXPECT_LT(r, 0.1 * range_over(p.chi, p.mask));
    EXPECT_NEAR(r, 0.012417936950677621, 1e-9);
}

TEST(Tkd, RaisingThresholdDegradesMonotonically) {
    const auto& p = reference_phantom();
    const FieldMap f = true_field(p, p.b0_dir, p.mask);
    double prev = 0.0;
    for (double th : {0.05, 0.1, 0.19, 0.3, 0.45, 0.6, 0.66}) {
        const double r = rmse(tkd_invert(f, p.b0_dir, th), p.chi, p.mask);
        EXPECT_GT(r, prev) << "threshold " << th;
        prev = r;
    }
}

TEST(Cosmos, OrthogonalOrientationsBeatTkd) {
    const auto& p = reference_phantom();
    std::vector<OrientedField> fields;
    for (Vec3 b : {Vec3{0, 0, 1}, Vec3{1, 0, 0}, Vec3{0, 1, 0}}) fields.push_back({true_field(p, b, p.mask), b});
    const RealVolume chi = cosmos_invert(fields);
    const double r = rmse(chi, p.chi, p.mask);
    EXPECT_LT(r, 0.02 * range_over(p.chi, p.mask));
    EXPECT_LT(r, rmse(tkd_invert(fields.front().field, p.b0_dir), p.chi, p.mask));
}

TEST(Cosmos, LeastSquaresOptimalPerFrequency) {
    auto p = make_phantom(PhantomKind::shepp3d, {24, 24, 16}, 3);
    const Shape3 s = p.chi.shape;
    const std::vector<Vec3> dirs{{0, 0, 1}, {0.3, 0, 0.95}, {0, 0.4, 0.9}, {0.2, 0.2, 0.9}};
    // Perturbed fields so no chi fits exactly.
    RngStream rng(11);
    std::vector<OrientedField> fields;
    for (const Vec3& d : dirs) {
        FieldMap f = true_field(p, d, all_true(s));
        for (auto& v : f.field.data) v += rng.normal();
        fields.push_back({f, d});
    }
    auto residual = [&](const RealVolume& chi) {
        double r = 0.0;
        for (const auto& of : fields) {
            const RealVolume model = dipole_field(chi, of.b0_dir);
            for (std::size_t i = 0; i < chi.size(); ++i) r += std::pow(model[i] - of.field.field[i] / p.b0_gamma_scale, 2);
        }
        return r;
    };
    for (double reg : {0.0, 1e-3}) {
        const RealVolume est = cosmos_invert(fields, reg);
        double penalty = 0.0;
        for (double v : p.chi.data) penalty += reg * v * v;
        EXPECT_LE(residual(est), residual(p.chi) + penalty + 1e-12);
    }
}

TEST(Cosmos, DegenerateOrientationsRejected) {
    const Shape3 s{8, 8, 8};
    const FieldMap f{RealVolume(s), all_true(s), "rad_s"};
    const Vec3 z{0, 0, 1};
    EXPECT_THROW(cosmos_invert({{f, z}, {f, z}}), Error);
    EXPECT_THROW(cosmos_invert({{f, z}, {f, z}, {f, z}}), Error);
    EXPECT_THROW(cosmos_invert({{f, {1, 0, 0}}, {f, {0, 1, 0}}, {f, {1, 1, 0}}}), Error);
    EXPECT_NO_THROW(cosmos_invert({{f, {1, 0, 0}}, {f, {0, 1, 0}}, {f, z}}));
}
