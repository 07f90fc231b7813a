#include <catch_amalgamated.hpp>

#include <chrono>

#include "ldif/grad.hpp"

using namespace ldif;

namespace {

// A smooth synthetic signed-distance grid (sphere of radius 0.3).
SdfGrid sphere_grid() {
    SdfGrid grid;
    grid.resolution = 32;
    grid.bounds = Box3(Vec3::Constant(-0.55), Vec3::Constant(0.55));
    grid.values.resize(32u * 32 * 32);
    for (int ix = 0; ix < 32; ++ix)
        for (int iy = 0; iy < 32; ++iy)
            for (int iz = 0; iz < 32; ++iz)
                grid.at(ix, iy, iz) = grid.node_position(ix, iy, iz).norm() - 0.3;
    return grid;
}

// Random parameters kept away from the activation kinks (|y_c| = 0,
// |y_e| = pi/4) so central differences stay valid.
ParameterVector random_params(const ParamLayout& layout, Rng& rng) {
    RawModel raw;
    raw.raw.resize(layout.n);
    for (auto& r : raw.raw) {
        r.y_c = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.5);
        r.y_p = 0.4 * rng.normal3();
        r.y_r = rng.normal3();
        r.y_e = Vec3(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7));
    }
    raw.latents.resize(layout.n);
    for (auto& z : raw.latents) {
        z.resize(layout.m);
        for (int k = 0; k < layout.m; ++k) z[k] = 0.5 * rng.normal();
    }
    raw.decoder = DecoderWeights::zeros(layout.h, layout.m);
    auto fill = [&](Linear& l) {
        for (int r = 0; r < l.weight.rows(); ++r)
            for (int c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = 0.4 * rng.normal();
        for (int r = 0; r < l.bias.size(); ++r) l.bias[r] = 0.2 * rng.normal();
    };
    fill(raw.decoder.input);
    for (int k = 0; k < 3; ++k) {
        fill(raw.decoder.cbn_gamma[k]);
        fill(raw.decoder.cbn_beta[k]);
    }
    fill(raw.decoder.res1);
    fill(raw.decoder.res2);
    fill(raw.decoder.output);
    return pack(raw);
}

LabeledSampleSet random_samples(int count, const LossConfig& cfg, Rng& rng) {
    LabeledSampleSet s;
    for (int i = 0; i < count; ++i) {
        s.points.push_back(0.35 * rng.normal3());
        s.inside.push_back(rng.uniform() < 0.5 ? 1 : 0);
        s.weights.push_back(rng.uniform() < 0.5 ? cfg.w_s : cfg.w_u);
    }
    return s;
}

double loss_of(const ParameterVector& params, const LabeledSampleSet& samples, const SdfGrid& grid,
               const GradConfig& cfg) {
    LdifModel model = to_model(unpack(params), cfg.sym_count, cfg.sym_axis);
    return loss_total(model, samples, grid, cfg.loss);
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    // 20 random configs at N=2, M=4, H=4 with 32 samples; relative error
    // below 1e-4 on every coordinate with magnitude above 1e-6. Must run
    // in under 10 seconds.
    auto started = std::chrono::steady_clock::now();
    SdfGrid grid = sphere_grid();
    Rng rng(20240517);
    const double h = 1e-5;
    for (int config = 0; config < 20; ++config) {
        GradConfig cfg;
        cfg.loss.beta = grid.half_cell_width();
        cfg.sym_count = config % 3 == 0 ? 1 : 0;  // exercise the mirrored path too
        ParamLayout layout{2, 4, 4};
        ParameterVector params = random_params(layout, rng);
        Rng sample_rng = rng.sub(static_cast<uint64_t>(config));
        LabeledSampleSet samples = random_samples(32, cfg.loss, sample_rng);

        ParameterVector analytic = grad_loss(params, samples, grid, cfg);
        for (long i = 0; i < layout.total(); ++i) {
            ParameterVector hi = params, lo = params;
            hi.values[i] += h;
            lo.values[i] -= h;
            double fd = (loss_of(hi, samples, grid, cfg) - loss_of(lo, samples, grid, cfg)) / (2 * h);
            double ga = analytic.values[i];
            double scale = std::max(std::abs(fd), std::abs(ga));
            if (scale <= 1e-6) continue;
            REQUIRE(std::abs(ga - fd) / scale < 1e-4);
        }
    }
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    CHECK(elapsed < 10.0);
}

TEST_CASE("gradient is linear in the loss weights") {
    SdfGrid grid = sphere_grid();
    Rng rng(404);
    ParamLayout layout{3, 3, 4};
    ParameterVector params = random_params(layout, rng);
    LossConfig base;
    base.beta = grid.half_cell_width();
    LabeledSampleSet samples = random_samples(48, base, rng);

    const double a = 0.7, b = 2.3;
    GradConfig only_p, only_c, both;
    only_p.loss = base;
    only_p.loss.w_p = a;
    only_p.loss.w_c = 0;
    only_c.loss = base;
    only_c.loss.w_p = 0;
    only_c.loss.w_c = b;
    both.loss = base;
    both.loss.w_p = a;
    both.loss.w_c = b;

    ParameterVector gp = grad_loss(params, samples, grid, only_p);
    ParameterVector gc = grad_loss(params, samples, grid, only_c);
    ParameterVector gb = grad_loss(params, samples, grid, both);
    for (long i = 0; i < layout.total(); ++i)
        REQUIRE(gb.values[i] == Catch::Approx(gp.values[i] + gc.values[i]).margin(1e-10));
}

TEST_CASE("zero final decoder layer kills the latent gradient path") {
    SdfGrid grid = sphere_grid();
    Rng rng(505);
    ParamLayout layout{2, 4, 4};
    ParameterVector params = random_params(layout, rng);
    RawModel raw = unpack(params);
    raw.decoder.output = Linear::zeros(1, layout.h);
    params = pack(raw);
    GradConfig cfg;
    cfg.loss.beta = grid.half_cell_width();
    LabeledSampleSet samples = random_samples(32, cfg.loss, rng);

    ParameterVector g = grad_loss(params, samples, grid, cfg);
    for (int i = 0; i < layout.n; ++i)
        REQUIRE(g.values.segment(layout.latent_offset(i), layout.m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("center loss gradient vanishes on the conservative branch") {
    // grid deep value below beta everywhere: every center satisfies G <= beta
    SdfGrid grid;
    grid.resolution = 32;
    grid.bounds = Box3(Vec3::Constant(-2.0), Vec3::Constant(2.0));
    grid.values.assign(32u * 32 * 32, -0.5);
    Rng rng(606);
    ParamLayout layout{2, 2, 2};
    ParameterVector params = random_params(layout, rng);
    GradConfig cfg;
    cfg.loss.beta = grid.half_cell_width();
    cfg.loss.w_p = 0.0;  // isolate L_C
    LabeledSampleSet samples = random_samples(8, cfg.loss, rng);
    ParameterVector g = grad_loss(params, samples, grid, cfg);
    REQUIRE(g.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradients are deterministic and thread-count independent") {
    SdfGrid grid = sphere_grid();
    Rng rng(707);
    ParamLayout layout{3, 4, 4};
    ParameterVector params = random_params(layout, rng);
    GradConfig cfg;
    cfg.loss.beta = grid.half_cell_width();
    cfg.sym_count = 1;
    LabeledSampleSet samples = random_samples(700, cfg.loss, rng);

    set_num_threads(1);
    ParameterVector g1 = grad_loss(params, samples, grid, cfg);
    set_num_threads(2);
    ParameterVector g2 = grad_loss(params, samples, grid, cfg);
    set_num_threads(0);
    ParameterVector g3 = grad_loss(params, samples, grid, cfg);
    for (long i = 0; i < layout.total(); ++i) {
        REQUIRE(g1.values[i] == g2.values[i]);
        REQUIRE(g1.values[i] == g3.values[i]);
    }
}

TEST_CASE("pack/unpack round trip") {
    Rng rng(808);
    ParamLayout layout{4, 3, 5};
    ParameterVector params = random_params(layout, rng);
    ParameterVector back = pack(unpack(params));
    REQUIRE(back.values == params.values);
}

TEST_CASE("adam") {
    SECTION("first-step hand case") {
        ParamLayout layout{0, 0, 1};  // tiny layout: decoder only
        ParameterVector params = ParameterVector::zeros(layout);
        ParameterVector grads = ParameterVector::zeros(layout);
        grads.values.setOnes();
        AdamState state = AdamState::init(layout, 0.1);
        VecX before = params.values;
        adam_step(state, params, grads);
        for (long i = 0; i < params.values.size(); ++i)
            REQUIRE(params.values[i] - before[i] == Catch::Approx(-0.1).margin(1e-6));
    }
    SECTION("zero gradient leaves parameters bit-identical") {
        ParamLayout layout{1, 2, 2};
        Rng rng(11);
        ParameterVector params = random_params(layout, rng);
        VecX before = params.values;
        ParameterVector zero = ParameterVector::zeros(layout);
        AdamState state = AdamState::init(layout, 0.05);
        adam_step(state, params, zero);
        adam_step(state, params, zero);
        REQUIRE(params.values == before);
    }
    SECTION("constant positive gradient decreases parameters monotonically") {
        ParamLayout layout{1, 1, 1};
        ParameterVector params = ParameterVector::zeros(layout);
        ParameterVector grads = ParameterVector::zeros(layout);
        grads.values.setConstant(0.5);
        AdamState state = AdamState::init(layout, 0.01);
        VecX prev = params.values;
        for (int step = 0; step < 5; ++step) {
            adam_step(state, params, grads);
            for (long i = 0; i < params.values.size(); ++i) REQUIRE(params.values[i] < prev[i]);
            prev = params.values;
        }
    }
    SECTION("layout mismatch is rejected") {
        ParamLayout a{1, 1, 1}, b{2, 1, 1};
        ParameterVector params = ParameterVector::zeros(a);
        ParameterVector grads = ParameterVector::zeros(b);
        AdamState state = AdamState::init(a, 0.01);
        CHECK_THROWS_AS(adam_step(state, params, grads), IoError);
    }
}
