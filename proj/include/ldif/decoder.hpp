#pragma once

#include <array>

#include "ldif/common.hpp"

namespace ldif {

struct Linear {
    MatX weight;  // rows = out, cols = in
    VecX bias;

    int out_dim() const { return static_cast<int>(weight.rows()); }
    int in_dim() const { return static_cast<int>(weight.cols()); }
    long param_count() const { return weight.size() + bias.size(); }

    static Linear zeros(int out, int in) {
        Linear l;
        l.weight = MatX::Zero(out, in);
        l.bias = VecX::Zero(out);
        return l;
    }

    VecX operator()(const VecX& x) const { return weight * x + bias; }
};

// The shared deep residual function f(x_local, z): a 3->H input layer, one
// residual block, and an H->1 output layer, conditioned on z through three
// conditional-affine (CBN) stages. Normalization inside CBN is the
// identity, so f is a pure function of (x, z, weights).
struct DecoderWeights {
    int hidden = 32;
    int latent = 32;
    Linear input;                    // 3 -> H
    std::array<Linear, 3> cbn_gamma;  // M -> H each
    std::array<Linear, 3> cbn_beta;   // M -> H each
    Linear res1, res2;               // H -> H
    Linear output;                   // H -> 1

    static DecoderWeights zeros(int hidden, int latent) {
        DecoderWeights w;
        w.hidden = hidden;
        w.latent = latent;
        w.input = Linear::zeros(hidden, 3);
        for (int k = 0; k < 3; ++k) {
            w.cbn_gamma[k] = Linear::zeros(hidden, latent);
            w.cbn_beta[k] = Linear::zeros(hidden, latent);
        }
        w.res1 = Linear::zeros(hidden, hidden);
        w.res2 = Linear::zeros(hidden, hidden);
        w.output = Linear::zeros(1, hidden);
        return w;
    }

    bool shapes_consistent() const {
        if (input.out_dim() != hidden || input.in_dim() != 3) return false;
        for (int k = 0; k < 3; ++k)
            if (cbn_gamma[k].out_dim() != hidden || cbn_gamma[k].in_dim() != latent ||
                cbn_beta[k].out_dim() != hidden || cbn_beta[k].in_dim() != latent)
                return false;
        if (res1.out_dim() != hidden || res1.in_dim() != hidden) return false;
        if (res2.out_dim() != hidden || res2.in_dim() != hidden) return false;
        return output.out_dim() == 1 && output.in_dim() == hidden;
    }

    long total_params() const {
        long n = input.param_count() + res1.param_count() + res2.param_count() + output.param_count();
        for (int k = 0; k < 3; ++k) n += cbn_gamma[k].param_count() + cbn_beta[k].param_count();
        return n;
    }
};

// Exact scalar parameter total for latent width M and hidden width H:
// input (3H+H) + residual 2(H^2+H) + three CBNs 2(MH+H) each + output (H+1).
inline long param_count(int latent_m, int hidden_h) {
    long m = latent_m, h = hidden_h;
    return (3 * h + h) + 2 * (h * h + h) + 3 * 2 * (m * h + h) + (h + 1);
}

// The z-conditioned affine coefficients of the three CBN stages. They
// depend only on (z, weights), so hot paths compute them once per element.
struct CbnAffine {
    std::array<VecX, 3> gamma;
    std::array<VecX, 3> beta;
};

inline CbnAffine cbn_affine(const VecX& z, const DecoderWeights& w) {
    if (z.size() != w.latent) throw IoError("latent code length does not match decoder latent width");
    CbnAffine a;
    for (int k = 0; k < 3; ++k) {
        a.gamma[k] = w.cbn_gamma[k](z);
        a.beta[k] = w.cbn_beta[k](z);
    }
    return a;
}

inline VecX relu(const VecX& x) { return x.cwiseMax(0.0); }

// Forward pass with precomputed CBN affines.
inline double decoder_forward(const Vec3& x_local, const CbnAffine& a, const DecoderWeights& w) {
    VecX h0 = w.input.weight * x_local + w.input.bias;
    VecX a1 = relu((a.gamma[0].cwiseProduct(h0) + a.beta[0]).eval());
    VecX u = w.res1(a1);
    VecX a2 = relu((a.gamma[1].cwiseProduct(u) + a.beta[1]).eval());
    VecX h1 = h0 + w.res2(a2);
    VecX a3 = relu((a.gamma[2].cwiseProduct(h1) + a.beta[2]).eval());
    return w.output.weight.row(0).dot(a3) + w.output.bias[0];
}

// f(x_local, z). x_local is the element-transformed query point.
inline double decoder_forward(const Vec3& x_local, const VecX& z, const DecoderWeights& w) {
    return decoder_forward(x_local, cbn_affine(z, w), w);
}

}  // namespace ldif
