#pragma once

#include <array>
#include <string>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/decoder.hpp"
#include "ldif/geom.hpp"
#include "ldif/loss.hpp"
#include "ldif/model.hpp"

namespace ldif {

// Flat parameter vector layout: per-element raw variables
// (y_c, y_p, y_r, y_e) x N, then latents x N, then decoder weights in model
// file order (each layer weights row-major, then bias).
struct ParamLayout {
    int n = 0, m = 0, h = 0;

    long raw_offset(int elem) const { return static_cast<long>(elem) * 10; }
    long latent_offset(int elem) const { return static_cast<long>(n) * 10 + static_cast<long>(elem) * m; }
    long decoder_offset() const { return static_cast<long>(n) * 10 + static_cast<long>(n) * m; }
    long decoder_size() const { return param_count(m, h); }
    long total() const { return decoder_offset() + decoder_size(); }

    bool operator==(const ParamLayout&) const = default;
};

struct ParameterVector {
    ParamLayout layout;
    VecX values;

    static ParameterVector zeros(const ParamLayout& layout) {
        return ParameterVector{layout, VecX::Zero(layout.total())};
    }
};

// The optimizer-side model state: unconstrained element variables plus
// latents and decoder weights.
struct RawModel {
    std::vector<RawElementVars> raw;
    std::vector<VecX> latents;
    DecoderWeights decoder;

    ParamLayout layout() const {
        return ParamLayout{static_cast<int>(raw.size()), decoder.latent, decoder.hidden};
    }
};

namespace detail {

inline long pack_linear(VecX& dst, long at, const Linear& l) {
    for (int r = 0; r < l.weight.rows(); ++r)
        for (int c = 0; c < l.weight.cols(); ++c) dst[at++] = l.weight(r, c);
    for (int r = 0; r < l.bias.size(); ++r) dst[at++] = l.bias[r];
    return at;
}

inline long unpack_linear(const VecX& src, long at, Linear& l) {
    for (int r = 0; r < l.weight.rows(); ++r)
        for (int c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = src[at++];
    for (int r = 0; r < l.bias.size(); ++r) l.bias[r] = src[at++];
    return at;
}

template <typename Fn>
void for_each_decoder_layer(DecoderWeights& w, const Fn& fn) {
    fn(w.input);
    fn(w.cbn_gamma[0]);
    fn(w.cbn_beta[0]);
    fn(w.res1);
    fn(w.cbn_gamma[1]);
    fn(w.cbn_beta[1]);
    fn(w.res2);
    fn(w.cbn_gamma[2]);
    fn(w.cbn_beta[2]);
    fn(w.output);
}

}  // namespace detail

inline ParameterVector pack(const RawModel& model) {
    ParameterVector p = ParameterVector::zeros(model.layout());
    for (int i = 0; i < p.layout.n; ++i) {
        long at = p.layout.raw_offset(i);
        const RawElementVars& r = model.raw[i];
        p.values[at++] = r.y_c;
        for (int a = 0; a < 3; ++a) p.values[at++] = r.y_p[a];
        for (int a = 0; a < 3; ++a) p.values[at++] = r.y_r[a];
        for (int a = 0; a < 3; ++a) p.values[at++] = r.y_e[a];
        p.values.segment(p.layout.latent_offset(i), p.layout.m) = model.latents[i];
    }
    long at = p.layout.decoder_offset();
    DecoderWeights w = model.decoder;  // layer visitation order needs non-const refs
    detail::for_each_decoder_layer(w, [&](Linear& l) { at = detail::pack_linear(p.values, at, l); });
    return p;
}

inline RawModel unpack(const ParameterVector& p) {
    RawModel model;
    model.raw.resize(p.layout.n);
    model.latents.resize(p.layout.n);
    for (int i = 0; i < p.layout.n; ++i) {
        long at = p.layout.raw_offset(i);
        RawElementVars& r = model.raw[i];
        r.y_c = p.values[at++];
        for (int a = 0; a < 3; ++a) r.y_p[a] = p.values[at++];
        for (int a = 0; a < 3; ++a) r.y_r[a] = p.values[at++];
        for (int a = 0; a < 3; ++a) r.y_e[a] = p.values[at++];
        model.latents[i] = p.values.segment(p.layout.latent_offset(i), p.layout.m);
    }
    model.decoder = DecoderWeights::zeros(p.layout.h, p.layout.m);
    long at = p.layout.decoder_offset();
    detail::for_each_decoder_layer(model.decoder, [&](Linear& l) { at = detail::unpack_linear(p.values, at, l); });
    return model;
}

inline LdifModel to_model(const RawModel& raw, int sym_count, int sym_axis) {
    LdifModel model;
    model.n_elements = static_cast<int>(raw.raw.size());
    model.latent_dim = raw.decoder.latent;
    model.sym_count = sym_count;
    model.sym_axis = sym_axis;
    model.decoder = raw.decoder;
    model.latents = raw.latents;
    model.elements.reserve(raw.raw.size());
    for (const RawElementVars& r : raw.raw) model.elements.push_back(activate(r));
    model.validate();
    return model;
}

struct GradConfig {
    LossConfig loss;
    int sym_count = 0;
    int sym_axis = 0;
    bool freeze_decoder = false;
};

struct LossAndGrad {
    double l_p = 0, l_c = 0, total = 0;
    ParameterVector grad;
};

namespace detail {

// Per-element quantities fixed for one parameter vector.
struct ElemForward {
    ElementParams params;
    Mat3 world_to_local;  // diag(1/r) R^T
    Mat3 rotation;
    CbnAffine affine;
    Mat3 rotation_derivs[3];
    // activation derivative factors
    double dc_dyc = 0;
    Vec3 dr_dyr = Vec3::Zero();
    Vec3 de_dye = Vec3::Zero();
};

struct ElemAccum {
    double c_adj = 0;
    Vec3 p_adj = Vec3::Zero();
    Vec3 r_adj = Vec3::Zero();
    Mat3 rot_adj = Mat3::Zero();
    std::array<VecX, 3> gamma_adj;
    std::array<VecX, 3> beta_adj;

    void init(int hidden) {
        for (int k = 0; k < 3; ++k) {
            gamma_adj[k] = VecX::Zero(hidden);
            beta_adj[k] = VecX::Zero(hidden);
        }
    }
};

struct DecoderAccum {
    MatX input_w;
    VecX input_b;
    MatX res1_w, res2_w;
    VecX res1_b, res2_b;
    VecX output_w;  // row vector
    double output_b = 0;

    void init(int hidden) {
        input_w = MatX::Zero(hidden, 3);
        input_b = VecX::Zero(hidden);
        res1_w = MatX::Zero(hidden, hidden);
        res2_w = MatX::Zero(hidden, hidden);
        res1_b = VecX::Zero(hidden);
        res2_b = VecX::Zero(hidden);
        output_w = VecX::Zero(hidden);
        output_b = 0;
    }
};

struct ChunkAccum {
    std::vector<ElemAccum> elems;
    DecoderAccum dec;
    double weighted_error_sum = 0;  // sum of w_i (sig - I)^2 over the chunk

    void init(int n, int hidden) {
        elems.resize(n);
        for (auto& e : elems) e.init(hidden);
        dec.init(hidden);
    }
};

// One element evaluation at one query point, everything the backward pass
// needs.
struct EvalCache {
    Vec3 query, local;
    double expo = 0, g = 0, f = 0;
    VecX h0, q1, a1, u, q2, a2, h1, q3, a3;

    void init(int hidden) {
        h0.resize(hidden);
        q1.resize(hidden);
        a1.resize(hidden);
        u.resize(hidden);
        q2.resize(hidden);
        a2.resize(hidden);
        h1.resize(hidden);
        q3.resize(hidden);
        a3.resize(hidden);
    }
};

struct BackwardScratch {
    VecX a3_adj, q3_adj, h1_adj, a2_adj, q2_adj, u_adj, a1_adj, q1_adj, h0_adj;

    void init(int hidden) {
        a3_adj.resize(hidden);
        q3_adj.resize(hidden);
        h1_adj.resize(hidden);
        a2_adj.resize(hidden);
        q2_adj.resize(hidden);
        u_adj.resize(hidden);
        a1_adj.resize(hidden);
        q1_adj.resize(hidden);
        h0_adj.resize(hidden);
    }
};

inline void forward_eval(const ElemForward& ef, const DecoderWeights& w, const Vec3& query, EvalCache& cache) {
    cache.query = query;
    cache.local = ef.world_to_local * (query - ef.params.center_p);
    cache.expo = std::exp(-0.5 * cache.local.squaredNorm());
    cache.g = ef.params.scale_c * cache.expo;
    cache.h0.noalias() = w.input.weight * cache.local;
    cache.h0 += w.input.bias;
    cache.q1 = ef.affine.gamma[0].cwiseProduct(cache.h0) + ef.affine.beta[0];
    cache.a1 = cache.q1.cwiseMax(0.0);
    cache.u.noalias() = w.res1.weight * cache.a1;
    cache.u += w.res1.bias;
    cache.q2 = ef.affine.gamma[1].cwiseProduct(cache.u) + ef.affine.beta[1];
    cache.a2 = cache.q2.cwiseMax(0.0);
    cache.h1.noalias() = w.res2.weight * cache.a2;
    cache.h1 += w.res2.bias + cache.h0;
    cache.q3 = ef.affine.gamma[2].cwiseProduct(cache.h1) + ef.affine.beta[2];
    cache.a3 = cache.q3.cwiseMax(0.0);
    cache.f = w.output.weight.row(0).dot(cache.a3) + w.output.bias[0];
}

// kappa is dL/d(term); accumulates parameter adjoints for one cached
// element evaluation.
inline void backward_eval(const ElemForward& ef, const DecoderWeights& w, const EvalCache& c, double kappa,
                          ElemAccum& ea, DecoderAccum& da, BackwardScratch& s) {
    double g_adj = kappa * (1.0 + c.f);
    double f_adj = kappa * c.g;

    // decoder
    s.a3_adj = f_adj * w.output.weight.row(0).transpose();
    da.output_w += f_adj * c.a3;
    da.output_b += f_adj;
    s.q3_adj = (c.q3.array() > 0.0).select(s.a3_adj, 0.0);
    ea.gamma_adj[2] += s.q3_adj.cwiseProduct(c.h1);
    ea.beta_adj[2] += s.q3_adj;
    s.h1_adj = s.q3_adj.cwiseProduct(ef.affine.gamma[2]);
    da.res2_w.noalias() += s.h1_adj * c.a2.transpose();
    da.res2_b += s.h1_adj;
    s.a2_adj.noalias() = w.res2.weight.transpose() * s.h1_adj;
    s.h0_adj = s.h1_adj;  // residual skip
    s.q2_adj = (c.q2.array() > 0.0).select(s.a2_adj, 0.0);
    ea.gamma_adj[1] += s.q2_adj.cwiseProduct(c.u);
    ea.beta_adj[1] += s.q2_adj;
    s.u_adj = s.q2_adj.cwiseProduct(ef.affine.gamma[1]);
    da.res1_w.noalias() += s.u_adj * c.a1.transpose();
    da.res1_b += s.u_adj;
    s.a1_adj.noalias() = w.res1.weight.transpose() * s.u_adj;
    s.q1_adj = (c.q1.array() > 0.0).select(s.a1_adj, 0.0);
    ea.gamma_adj[0] += s.q1_adj.cwiseProduct(c.h0);
    ea.beta_adj[0] += s.q1_adj;
    s.h0_adj += s.q1_adj.cwiseProduct(ef.affine.gamma[0]);
    da.input_w.noalias() += s.h0_adj * c.local.transpose();
    da.input_b += s.h0_adj;
    Vec3 local_adj = w.input.weight.transpose() * s.h0_adj;

    // gaussian: g = c * exp(-|s|^2/2); d g / d local = -g * local
    ea.c_adj += g_adj * c.expo;
    local_adj += (-g_adj * c.g) * c.local;

    // local = diag(1/r) R^T (query - p)
    const Vec3& r = ef.params.radii_r;
    Vec3 u_adj3 = local_adj.cwiseQuotient(r);                       // adjoint of R^T (query - p)
    ea.r_adj -= local_adj.cwiseProduct(c.local).cwiseQuotient(r);   // ds_a/dr_a = -s_a/r_a
    Vec3 t_adj = ef.rotation * u_adj3;
    ea.rot_adj += (c.query - ef.params.center_p) * u_adj3.transpose();
    ea.p_adj -= t_adj;
}

}  // namespace detail

// Reverse-mode gradient of w_p*L_P + w_c*L_C with respect to every entry
// of the parameter vector, plus the loss values themselves. Per-point
// partials combine in fixed chunk order, so results are bit-identical for
// any thread count. Subgradient conventions: clamp passes gradient inside
// [-pi/4, pi/4] and zero outside; d|y|/dy uses sign(y) with sign(0)=0;
// relu'(0)=0.
inline LossAndGrad loss_and_grad(const ParameterVector& params, const LabeledSampleSet& samples,
                                 const SdfGrid& grid, const GradConfig& cfg) {
    if (samples.size() == 0) throw IoError("loss_and_grad: empty sample set");
    const ParamLayout& layout = params.layout;
    const int n = layout.n, hidden = layout.h;
    RawModel raw = unpack(params);

    // Per-element forward-fixed data.
    std::vector<detail::ElemForward> elems(n);
    for (int i = 0; i < n; ++i) {
        detail::ElemForward& ef = elems[i];
        const RawElementVars& rv = raw.raw[i];
        ef.params = activate(rv);
        ef.rotation = rotation_from_euler(ef.params.euler_e);
        ef.world_to_local = ef.params.radii_r.cwiseInverse().asDiagonal() * ef.rotation.transpose();
        ef.affine = cbn_affine(raw.latents[i], raw.decoder);
        rotation_derivatives(ef.params.euler_e, ef.rotation_derivs);
        ef.dc_dyc = rv.y_c > 0 ? -1.0 : (rv.y_c < 0 ? 1.0 : 0.0);
        for (int a = 0; a < 3; ++a) {
            double sig = sigmoid(rv.y_r[a]);
            ef.dr_dyr[a] = kRadiusCap * sig * (1.0 - sig);
            ef.de_dye[a] = std::abs(rv.y_e[a]) <= kEulerClamp ? 1.0 : 0.0;
        }
    }

    const double inv_count = 1.0 / static_cast<double>(samples.size());
    const size_t chunk_size = 256;
    const size_t n_chunks = n_chunks_for(samples.size(), chunk_size);
    std::vector<detail::ChunkAccum> accums(n_chunks);

    parallel_chunks(samples.size(), chunk_size, [&](size_t chunk, size_t begin, size_t end) {
        detail::ChunkAccum& acc = accums[chunk];
        acc.init(n, hidden);
        detail::BackwardScratch scratch;
        scratch.init(hidden);
        std::vector<detail::EvalCache> caches(static_cast<size_t>(n) + cfg.sym_count);
        for (auto& c : caches) c.init(hidden);
        std::vector<double> kappa_of(caches.size());
        std::vector<int> elem_of(caches.size());
        for (size_t p = begin; p < end; ++p) {
            const Vec3& x = samples.points[p];
            double field = 0.0;
            size_t n_evals = 0;
            for (int i = 0; i < n; ++i) {
                detail::forward_eval(elems[i], raw.decoder, x, caches[n_evals]);
                elem_of[n_evals] = i;
                field += caches[n_evals].g * (1.0 + caches[n_evals].f);
                ++n_evals;
                if (i < cfg.sym_count) {
                    detail::forward_eval(elems[i], raw.decoder, reflect(x, cfg.sym_axis), caches[n_evals]);
                    elem_of[n_evals] = i;
                    field += caches[n_evals].g * (1.0 + caches[n_evals].f);
                    ++n_evals;
                }
            }
            double sig = sigmoid(cfg.loss.alpha * (field - cfg.loss.isolevel));
            double indicator = samples.inside[p] ? 0.0 : 1.0;
            double err = sig - indicator;
            acc.weighted_error_sum += samples.weights[p] * err * err;
            double kappa = cfg.loss.w_p * inv_count * samples.weights[p] * 2.0 * err * sig * (1.0 - sig) *
                           cfg.loss.alpha;
            for (size_t e = 0; e < n_evals; ++e)
                detail::backward_eval(elems[elem_of[e]], raw.decoder, caches[e], kappa, acc.elems[elem_of[e]],
                                      acc.dec, scratch);
        }
    });

    // Reduce chunks in fixed order.
    detail::ChunkAccum total;
    total.init(n, hidden);
    double weighted_error = 0;
    for (const auto& acc : accums) {
        weighted_error += acc.weighted_error_sum;
        for (int i = 0; i < n; ++i) {
            total.elems[i].c_adj += acc.elems[i].c_adj;
            total.elems[i].p_adj += acc.elems[i].p_adj;
            total.elems[i].r_adj += acc.elems[i].r_adj;
            total.elems[i].rot_adj += acc.elems[i].rot_adj;
            for (int k = 0; k < 3; ++k) {
                total.elems[i].gamma_adj[k] += acc.elems[i].gamma_adj[k];
                total.elems[i].beta_adj[k] += acc.elems[i].beta_adj[k];
            }
        }
        total.dec.input_w += acc.dec.input_w;
        total.dec.input_b += acc.dec.input_b;
        total.dec.res1_w += acc.dec.res1_w;
        total.dec.res1_b += acc.dec.res1_b;
        total.dec.res2_w += acc.dec.res2_w;
        total.dec.res2_b += acc.dec.res2_b;
        total.dec.output_w += acc.dec.output_w;
        total.dec.output_b += acc.dec.output_b;
    }
    double l_p = weighted_error * inv_count;

    // Center loss and its direct contribution to p adjoints.
    double l_c = 0;
    for (int i = 0; i < n; ++i) {
        const Vec3& p = elems[i].params.center_p;
        if (!grid.contains(p)) {
            Vec3 grad;
            l_c += grid.squared_exterior_distance(p, &grad);
            total.elems[i].p_adj += cfg.loss.w_c * grad;
        } else {
            Vec3 grad;
            double g = grid.trilinear(p, &grad);
            if (g > cfg.loss.beta) {
                l_c += g * g;
                total.elems[i].p_adj += cfg.loss.w_c * 2.0 * g * grad;
            }
        }
    }

    // Assemble the flat gradient.
    ParameterVector out = ParameterVector::zeros(layout);
    for (int i = 0; i < n; ++i) {
        const detail::ElemAccum& ea = total.elems[i];
        const detail::ElemForward& ef = elems[i];
        Vec3 e_adj;
        for (int k = 0; k < 3; ++k)
            e_adj[k] = ea.rot_adj.cwiseProduct(ef.rotation_derivs[k]).sum();
        long at = layout.raw_offset(i);
        out.values[at++] = ea.c_adj * ef.dc_dyc;
        for (int a = 0; a < 3; ++a) out.values[at++] = ea.p_adj[a] * 0.5;
        for (int a = 0; a < 3; ++a) out.values[at++] = ea.r_adj[a] * ef.dr_dyr[a];
        for (int a = 0; a < 3; ++a) out.values[at++] = e_adj[a] * ef.de_dye[a];
        // latents and CBN weights through the per-element affine adjoints
        VecX z_adj = VecX::Zero(layout.m);
        for (int k = 0; k < 3; ++k) {
            z_adj.noalias() += raw.decoder.cbn_gamma[k].weight.transpose() * ea.gamma_adj[k];
            z_adj.noalias() += raw.decoder.cbn_beta[k].weight.transpose() * ea.beta_adj[k];
        }
        out.values.segment(layout.latent_offset(i), layout.m) = z_adj;
    }

    if (!cfg.freeze_decoder) {
        DecoderWeights dgrad = DecoderWeights::zeros(hidden, layout.m);
        dgrad.input.weight = total.dec.input_w;
        dgrad.input.bias = total.dec.input_b;
        dgrad.res1.weight = total.dec.res1_w;
        dgrad.res1.bias = total.dec.res1_b;
        dgrad.res2.weight = total.dec.res2_w;
        dgrad.res2.bias = total.dec.res2_b;
        dgrad.output.weight.row(0) = total.dec.output_w.transpose();
        dgrad.output.bias[0] = total.dec.output_b;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < n; ++i) {
                dgrad.cbn_gamma[k].weight.noalias() += total.elems[i].gamma_adj[k] * raw.latents[i].transpose();
                dgrad.cbn_gamma[k].bias += total.elems[i].gamma_adj[k];
                dgrad.cbn_beta[k].weight.noalias() += total.elems[i].beta_adj[k] * raw.latents[i].transpose();
                dgrad.cbn_beta[k].bias += total.elems[i].beta_adj[k];
            }
        long at = layout.decoder_offset();
        detail::for_each_decoder_layer(dgrad, [&](Linear& l) { at = detail::pack_linear(out.values, at, l); });
    }

    // Report non-finite gradients with the offending segment.
    for (int i = 0; i < n; ++i) {
        if (!out.values.segment(layout.raw_offset(i), 10).allFinite())
            throw DivergedError("non-finite gradient in raw element vars of element " + std::to_string(i), -1);
        if (!out.values.segment(layout.latent_offset(i), layout.m).allFinite())
            throw DivergedError("non-finite gradient in latent code of element " + std::to_string(i), -1);
    }
    if (!out.values.segment(layout.decoder_offset(), layout.decoder_size()).allFinite())
        throw DivergedError("non-finite gradient in decoder weights", -1);

    LossAndGrad result;
    result.l_p = l_p;
    result.l_c = l_c;
    result.total = cfg.loss.w_p * l_p + cfg.loss.w_c * l_c;
    result.grad = std::move(out);
    return result;
}

// Gradient only (the spec-level operation).
inline ParameterVector grad_loss(const ParameterVector& params, const LabeledSampleSet& samples,
                                 const SdfGrid& grid, const GradConfig& cfg) {
    return loss_and_grad(params, samples, grid, cfg).grad;
}

// Adam with bias correction. Moments share the parameter layout and start
// at zero.
struct AdamState {
    VecX first_moment, second_moment;
    long step_count = 0;
    double beta1 = 0.9, beta2 = 0.999, lr = 5e-5, eps = 1e-8;

    static AdamState init(const ParamLayout& layout, double lr, double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8) {
        AdamState s;
        s.first_moment = VecX::Zero(layout.total());
        s.second_moment = VecX::Zero(layout.total());
        s.lr = lr;
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.eps = eps;
        return s;
    }
};

inline void adam_step(AdamState& state, ParameterVector& params, const ParameterVector& grads) {
    if (params.values.size() != grads.values.size() || params.values.size() != state.first_moment.size())
        throw IoError("adam_step: layout mismatch");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads.values;
    state.second_moment =
        state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.values.cwiseProduct(grads.values);
    double c1 = 1.0 - std::pow(state.beta1, t);
    double c2 = 1.0 - std::pow(state.beta2, t);
    VecX m_hat = state.first_moment / c1;
    VecX v_hat = state.second_moment / c2;
    params.values -= state.lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

}  // namespace ldif
