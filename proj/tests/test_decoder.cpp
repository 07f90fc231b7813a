#include <catch_amalgamated.hpp>

#include "ldif/decoder.hpp"

using namespace ldif;

TEST_CASE("parameter count formula") {
    // Breakdown at (32, 32): input 128 + residual 2112 + 3 CBNs of 2112 +
    // output 33.
    CHECK(param_count(32, 32) == 8609);
    // Per-layer sum at (1, 1): input 4 + residual 4 + CBNs 12 + output 2.
    CHECK(param_count(1, 1) == 22);
    CHECK(DecoderWeights::zeros(32, 32).total_params() == 8609);
    CHECK(DecoderWeights::zeros(1, 1).total_params() == param_count(1, 1));
    CHECK(DecoderWeights::zeros(4, 4).total_params() == param_count(4, 4));

    SECTION("monotone in hidden width") {
        long prev = param_count(32, 1);
        for (int h = 2; h <= 64; ++h) {
            long cur = param_count(32, h);
            REQUIRE(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("zero output layer forces f to vanish") {
    Rng rng(3);
    DecoderWeights w = DecoderWeights::zeros(5, 4);
    auto fill = [&](Linear& l) {
        for (int r = 0; r < l.weight.rows(); ++r)
            for (int c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.normal();
        for (int r = 0; r < l.bias.size(); ++r) l.bias[r] = rng.normal();
    };
    fill(w.input);
    for (int k = 0; k < 3; ++k) {
        fill(w.cbn_gamma[k]);
        fill(w.cbn_beta[k]);
    }
    fill(w.res1);
    fill(w.res2);
    for (int trial = 0; trial < 200; ++trial) {
        Vec3 x = rng.normal3();
        VecX z(4);
        for (int k = 0; k < 4; ++k) z[k] = rng.normal();
        REQUIRE(decoder_forward(x, z, w) == 0.0);
    }
}

TEST_CASE("toy forward trace with all-ones weights") {
    // H = 1, M = 1, every weight 1, every bias 0, x = (1,0,0), z = (1):
    // h0 = 1; cbn1 -> 2; W1 -> 2; cbn2 -> 3; W2 -> 3; h1 = 4; cbn3 -> 5;
    // output -> 5.
    DecoderWeights w = DecoderWeights::zeros(1, 1);
    w.input.weight << 1, 1, 1;
    for (int k = 0; k < 3; ++k) {
        w.cbn_gamma[k].weight << 1;
        w.cbn_beta[k].weight << 1;
    }
    w.res1.weight << 1;
    w.res2.weight << 1;
    w.output.weight << 1;
    VecX z(1);
    z << 1.0;
    CHECK(decoder_forward(Vec3(1, 0, 0), z, w) == Catch::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("forward pass is deterministic") {
    Rng rng(9);
    DecoderWeights w = DecoderWeights::zeros(8, 8);
    auto fill = [&](Linear& l) {
        for (int r = 0; r < l.weight.rows(); ++r)
            for (int c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.normal();
        for (int r = 0; r < l.bias.size(); ++r) l.bias[r] = rng.normal();
    };
    fill(w.input);
    for (int k = 0; k < 3; ++k) {
        fill(w.cbn_gamma[k]);
        fill(w.cbn_beta[k]);
    }
    fill(w.res1);
    fill(w.res2);
    fill(w.output);
    VecX z(8);
    for (int k = 0; k < 8; ++k) z[k] = rng.normal();
    Vec3 x(0.3, -0.4, 0.9);
    double first = decoder_forward(x, z, w);
    for (int i = 0; i < 10; ++i) REQUIRE(decoder_forward(x, z, w) == first);
}

TEST_CASE("latent length mismatch is rejected") {
    DecoderWeights w = DecoderWeights::zeros(4, 4);
    VecX z(3);
    z.setZero();
    CHECK_THROWS_AS(decoder_forward(Vec3(0, 0, 0), z, w), IoError);
}
