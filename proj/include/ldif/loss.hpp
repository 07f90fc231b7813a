#pragma once

#include "ldif/common.hpp"
#include "ldif/geom.hpp"
#include "ldif/model.hpp"

namespace ldif {

// Weights and thresholds of the combined objective
// L = w_p * L_P + w_c * L_C.
struct LossConfig {
    double alpha = 100.0;     // sigmoid sharpness
    double w_s = 0.1;         // near-surface sample weight
    double w_u = 1.0;         // uniform sample weight
    double w_p = 1.0;         // point-sample term weight
    double w_c = 10.0;        // center term weight
    double isolevel = -0.07;  // surface extraction level, offsets the sigmoid
    double beta = 0.0;        // grid threshold; bind to half the SdfGrid cell width
};

// (1/|C|) sum_i w_i (sig(alpha * (LDIF(x_i) - isolevel)) - I(x_i))^2 with
// I = 0 inside, 1 outside. The isolevel offset puts the classification
// boundary on the extracted surface.
inline double loss_point_sample(const LdifEvaluator& eval, const LabeledSampleSet& samples,
                                const LossConfig& cfg) {
    if (samples.size() == 0) throw IoError("point-sample loss: empty sample set");
    double total = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double field = eval(samples.points[i]);
        double predicted = sigmoid(cfg.alpha * (field - cfg.isolevel));
        double indicator = samples.inside[i] ? 0.0 : 1.0;
        double d = predicted - indicator;
        total += samples.weights[i] * d * d;
    }
    return total / static_cast<double>(samples.size());
}

inline double loss_point_sample(const LdifModel& model, const LabeledSampleSet& samples, const LossConfig& cfg) {
    return loss_point_sample(LdifEvaluator(model), samples, cfg);
}

// Per-element center penalty against the coarse SDF grid: G(p)^2 where the
// trilinear G(p) exceeds beta, zero otherwise; centers outside the grid box
// pay their squared distance to the box instead.
inline double loss_center(const LdifModel& model, const SdfGrid& grid, const LossConfig& cfg) {
    double total = 0.0;
    for (const ElementParams& e : model.elements) {
        const Vec3& p = e.center_p;
        if (!grid.contains(p)) {
            total += grid.squared_exterior_distance(p);
        } else {
            double g = grid.trilinear(p);
            if (g > cfg.beta) total += g * g;
        }
    }
    return total;
}

inline double loss_total(const LdifModel& model, const LabeledSampleSet& samples, const SdfGrid& grid,
                         const LossConfig& cfg) {
    return cfg.w_p * loss_point_sample(model, samples, cfg) + cfg.w_c * loss_center(model, grid, cfg);
}

}  // namespace ldif
