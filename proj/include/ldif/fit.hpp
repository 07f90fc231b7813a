#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/geom.hpp"
#include "ldif/grad.hpp"
#include "ldif/loss.hpp"
#include "ldif/mesher.hpp"
#include "ldif/model.hpp"

namespace ldif {

// Auto-decoder fitting configuration. Loss hyperparameters default to the
// published table; the learning rate defaults to 1e-3, which suits direct
// per-shape optimization (the published 5e-5 was tuned for encoder
// training and remains selectable).
struct FitConfig {
    int n_elements = 32;
    int latent_dim = 32;
    int hidden = 32;
    int steps = 5000;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    uint64_t seed = 7;
    int near_count = 1024;
    int uniform_count = 1024;
    double near_sigma = 0.01;
    bool freeze_decoder = false;
    int sym_count = 0;
    int sym_axis = 0;
    LossConfig loss;
    double init_scale = -1.0;        // initial element amplitude c
    double init_radius = 0.05;       // initial isotropic radius r
    double decoder_init_std = 0.02;  // all layers except the zeroed output
    int kmeans_rounds = 50;
    int init_samples = 10000;
};

struct TraceRow {
    int step = 0;
    double l_p = 0, l_c = 0, total = 0;
};

struct FitResult {
    LdifModel model;
    std::vector<TraceRow> trace;
    SimilarityTransform normalization;  // world -> fitting frame
};

namespace detail {

// Lloyd iterations from kmeans++ seeds with a fixed round count; empty
// clusters are reseeded from the sample set so the result stays
// deterministic.
inline std::vector<Vec3> kmeans(const std::vector<Vec3>& points, int k, int rounds, Rng rng) {
    if (points.empty()) throw IoError("k-means: no input points");
    std::vector<Vec3> centers;
    centers.reserve(k);
    centers.push_back(points[rng.below(points.size())]);
    std::vector<double> dist2(points.size(), 0.0);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0;
        for (size_t p = 0; p < points.size(); ++p) {
            double d = (points[p] - centers.back()).squaredNorm();
            if (centers.size() == 1 || d < dist2[p]) dist2[p] = d;
            total += dist2[p];
        }
        double pick = rng.uniform() * total;
        size_t chosen = points.size() - 1;
        double acc = 0;
        for (size_t p = 0; p < points.size(); ++p) {
            acc += dist2[p];
            if (acc >= pick) {
                chosen = p;
                break;
            }
        }
        centers.push_back(points[chosen]);
    }
    std::vector<int> assign(points.size(), 0);
    for (int round = 0; round < rounds; ++round) {
        for (size_t p = 0; p < points.size(); ++p) {
            double best = (points[p] - centers[0]).squaredNorm();
            int best_k = 0;
            for (int c = 1; c < k; ++c) {
                double d = (points[p] - centers[c]).squaredNorm();
                if (d < best) {
                    best = d;
                    best_k = c;
                }
            }
            assign[p] = best_k;
        }
        std::vector<Vec3> sums(k, Vec3::Zero());
        std::vector<long> counts(k, 0);
        for (size_t p = 0; p < points.size(); ++p) {
            sums[assign[p]] += points[p];
            counts[assign[p]] += 1;
        }
        for (int c = 0; c < k; ++c)
            centers[c] = counts[c] > 0 ? Vec3(sums[c] / static_cast<double>(counts[c]))
                                       : points[rng.below(points.size())];
    }
    return centers;
}

inline Linear random_linear(int out, int in, double std, Rng& rng) {
    Linear l = Linear::zeros(out, in);
    for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) l.weight(r, c) = std * rng.normal();
    for (int r = 0; r < out; ++r) l.bias[r] = std * rng.normal();
    return l;
}

}  // namespace detail

// Initialization: element centers at k-means of surface samples (mapped
// through the inverse activation), c = init_scale, r = init_radius,
// e = 0, latents zero, decoder weights small random with the output layer
// zeroed — so the model starts exactly as a SIF.
inline std::pair<RawModel, AdamState> initialize(const TriMesh& mesh, const FitConfig& cfg, Rng rng) {
    if (mesh.surface_area() <= 0) throw IoError("initialize: mesh has zero surface area");
    Rng init_rng = rng.sub("init");
    SurfaceSamples surf = sample_surface(mesh, cfg.init_samples, init_rng.sub("samples"));
    std::vector<Vec3> centers =
        detail::kmeans(surf.points, cfg.n_elements, cfg.kmeans_rounds, init_rng.sub("kmeans"));

    RawModel raw;
    raw.raw.reserve(cfg.n_elements);
    for (int i = 0; i < cfg.n_elements; ++i) {
        ElementParams p;
        p.scale_c = cfg.init_scale;
        p.center_p = centers[i];
        p.radii_r = Vec3::Constant(cfg.init_radius);
        p.euler_e = Vec3::Zero();
        raw.raw.push_back(raw_from_params(p));
    }
    raw.latents.assign(cfg.n_elements, VecX::Zero(cfg.latent_dim));

    Rng weight_rng = init_rng.sub("decoder");
    DecoderWeights w = DecoderWeights::zeros(cfg.hidden, cfg.latent_dim);
    w.input = detail::random_linear(cfg.hidden, 3, cfg.decoder_init_std, weight_rng);
    for (int k = 0; k < 3; ++k) {
        w.cbn_gamma[k] = detail::random_linear(cfg.hidden, cfg.latent_dim, cfg.decoder_init_std, weight_rng);
        // scale starts at 1 (batch-norm convention), so the stage passes
        // signal through at the zero-latent starting point
        w.cbn_gamma[k].bias.setOnes();
        w.cbn_beta[k] = detail::random_linear(cfg.hidden, cfg.latent_dim, cfg.decoder_init_std, weight_rng);
        w.cbn_beta[k].bias.setZero();
    }
    w.res1 = detail::random_linear(cfg.hidden, cfg.hidden, cfg.decoder_init_std, weight_rng);
    w.res2 = detail::random_linear(cfg.hidden, cfg.hidden, cfg.decoder_init_std, weight_rng);
    // output layer stays zero: the fit starts from the pure Gaussian sum
    raw.decoder = w;

    AdamState adam = AdamState::init(raw.layout(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    return {raw, adam};
}

// Fits one watertight mesh. Internally the mesh is normalized (bbox center
// at the origin, longest edge 1) and triangles are put in a canonical
// order, so the result depends only on geometry and the seed; the returned
// model is mapped back to the input mesh's world frame.
inline FitResult fit(const TriMesh& input_mesh, const FitConfig& cfg) {
    if (cfg.n_elements < 1) throw IoError("fit: need at least one element");
    if (cfg.sym_count < 0 || cfg.sym_count > cfg.n_elements) throw IoError("fit: sym_count out of range");
    auto [mesh_raw, norm] = normalize_frame(input_mesh);
    TriMesh mesh = canonical_triangle_order(mesh_raw);
    MeshQuery query(mesh);  // rejects non-watertight input

    SdfGrid grid = build_sdf_grid(query);
    GradConfig grad_cfg;
    grad_cfg.loss = cfg.loss;
    grad_cfg.loss.beta = grid.half_cell_width();
    grad_cfg.sym_count = cfg.sym_count;
    grad_cfg.sym_axis = cfg.sym_axis;
    grad_cfg.freeze_decoder = cfg.freeze_decoder;

    Rng rng(cfg.seed);
    auto [raw, adam] = initialize(mesh, cfg, rng);
    ParameterVector params = pack(raw);

    Box3 bbox = mesh.bounds();
    Rng sample_rng = rng.sub("sample");

    FitResult result;
    result.normalization = norm;
    result.trace.reserve(cfg.steps);
    for (int step = 0; step < cfg.steps; ++step) {
        Rng step_rng = sample_rng.sub(static_cast<uint64_t>(step));
        LabeledSampleSet near =
            sample_near_surface(query, cfg.near_count, cfg.near_sigma, step_rng.sub("near"), grad_cfg.loss.w_s);
        // Half the uniform budget samples the mesh bbox, half the model's
        // current region of influence: the residual can push faint Gaussian
        // tails below the isolevel outside the bbox, and surface there is
        // junk unless some samples reach it.
        Box3 support_box = bbox;
        RawModel snapshot = unpack(params);
        for (int i = 0; i < cfg.n_elements; ++i) {
            Box3 support = element_support_box(activate(snapshot.raw[i]), 5.0);
            support_box.extend(support);
            if (i < cfg.sym_count) {
                Vec3 lo = reflect(support.min(), cfg.sym_axis);
                Vec3 hi = reflect(support.max(), cfg.sym_axis);
                support_box.extend(lo.cwiseMin(hi));
                support_box.extend(lo.cwiseMax(hi));
            }
        }
        int wide_count = cfg.uniform_count / 2;
        LabeledSampleSet uni = sample_uniform(bbox, cfg.uniform_count - wide_count, query,
                                              step_rng.sub("uniform"), grad_cfg.loss.w_u);
        LabeledSampleSet wide =
            sample_uniform(support_box, wide_count, query, step_rng.sub("support"), grad_cfg.loss.w_u);
        LabeledSampleSet combined = merge(merge(near, uni), wide);

        LossAndGrad lg;
        try {
            lg = loss_and_grad(params, combined, grid, grad_cfg);
        } catch (const DivergedError& e) {
            throw DivergedError(std::string(e.what()) + " at step " + std::to_string(step), step);
        }
        if (!std::isfinite(lg.total))
            throw DivergedError("non-finite loss at step " + std::to_string(step), step);
        result.trace.push_back({step, lg.l_p, lg.l_c, lg.total});
        adam_step(adam, params, lg.grad);
    }

    RawModel final_raw = unpack(params);
    LdifModel model = to_model(final_raw, cfg.sym_count, cfg.sym_axis);
    // Back to the world frame: positions and radii scale by 1/norm.scale.
    for (ElementParams& e : model.elements) {
        e.center_p = norm.apply_inverse(e.center_p);
        e.radii_r /= norm.scale;
    }
    result.model = std::move(model);
    return result;
}

inline std::string serialize_trace(const std::vector<TraceRow>& trace) {
    std::string out = "step,l_p,l_c,total\n";
    char buf[128];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.step, row.l_p, row.l_c, row.total);
        out += buf;
    }
    return out;
}

inline void save_trace(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open trace file for writing: " + path);
    out << serialize_trace(trace);
    if (!out) throw IoError("failed writing trace file: " + path);
}

// Moving average of the total-loss trace over `window` steps; entry k
// covers steps [k, k+window).
inline std::vector<double> trace_moving_average(const std::vector<TraceRow>& trace, int window) {
    std::vector<double> out;
    if (window <= 0 || static_cast<size_t>(window) > trace.size()) return out;
    double sum = 0;
    for (int i = 0; i < window; ++i) sum += trace[i].total;
    out.push_back(sum / window);
    for (size_t i = window; i < trace.size(); ++i) {
        sum += trace[i].total - trace[i - window].total;
        out.push_back(sum / window);
    }
    return out;
}

}  // namespace ldif
