#pragma once

#include <cmath>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/decoder.hpp"

namespace ldif {

constexpr double kRadiusCap = 0.15;
constexpr double kEulerClamp = M_PI / 4.0;

// The ten analytic variables of one shape element: density amplitude
// (<= 0), center, per-axis radii, Euler angles.
struct ElementParams {
    double scale_c = -1.0;
    Vec3 center_p = Vec3::Zero();
    Vec3 radii_r = Vec3::Constant(0.05);
    Vec3 euler_e = Vec3::Zero();
};

// Unconstrained optimization variables; activate() maps them into the
// valid analytic ranges.
struct RawElementVars {
    double y_c = 1.0;
    Vec3 y_p = Vec3::Zero();
    Vec3 y_r = Vec3::Zero();
    Vec3 y_e = Vec3::Zero();
};

// c = -|y_c|, p = y_p/2, r = 0.15*sig(y_r), e = clamp(y_e, +-pi/4).
inline ElementParams activate(const RawElementVars& raw) {
    ElementParams p;
    p.scale_c = -std::abs(raw.y_c);
    p.center_p = raw.y_p / 2.0;
    for (int a = 0; a < 3; ++a) {
        p.radii_r[a] = kRadiusCap * sigmoid(raw.y_r[a]);
        p.euler_e[a] = std::clamp(raw.y_e[a], -kEulerClamp, kEulerClamp);
    }
    return p;
}

// Right inverse of activate for in-range parameters; used to seed fits.
inline RawElementVars raw_from_params(const ElementParams& p) {
    RawElementVars raw;
    raw.y_c = -p.scale_c;
    raw.y_p = 2.0 * p.center_p;
    for (int a = 0; a < 3; ++a) {
        double frac = std::clamp(p.radii_r[a] / kRadiusCap, 1e-9, 1.0 - 1e-9);
        raw.y_r[a] = logit(frac);
        raw.y_e[a] = std::clamp(p.euler_e[a], -kEulerClamp, kEulerClamp);
    }
    return raw;
}

// Intrinsic z-y-x convention: R = Rz(e3) * Ry(e2) * Rx(e1).
inline Mat3 rotation_from_euler(const Vec3& e) {
    double c1 = std::cos(e[0]), s1 = std::sin(e[0]);
    double c2 = std::cos(e[1]), s2 = std::sin(e[1]);
    double c3 = std::cos(e[2]), s3 = std::sin(e[2]);
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, c1, -s1, 0, s1, c1;
    ry << c2, 0, s2, 0, 1, 0, -s2, 0, c2;
    rz << c3, -s3, 0, s3, c3, 0, 0, 0, 1;
    return rz * ry * rx;
}

// dR/de_k for the same convention.
inline void rotation_derivatives(const Vec3& e, Mat3 deriv[3]) {
    double c1 = std::cos(e[0]), s1 = std::sin(e[0]);
    double c2 = std::cos(e[1]), s2 = std::sin(e[1]);
    double c3 = std::cos(e[2]), s3 = std::sin(e[2]);
    Mat3 rx, ry, rz, dx, dy, dz;
    rx << 1, 0, 0, 0, c1, -s1, 0, s1, c1;
    ry << c2, 0, s2, 0, 1, 0, -s2, 0, c2;
    rz << c3, -s3, 0, s3, c3, 0, 0, 0, 1;
    dx << 0, 0, 0, 0, -s1, -c1, 0, c1, -s1;
    dy << -s2, 0, c2, 0, 0, 0, -c2, 0, -s2;
    dz << -s3, -c3, 0, c3, -s3, 0, 0, 0, 0;
    deriv[0] = rz * ry * dx;
    deriv[1] = rz * dy * rx;
    deriv[2] = dz * ry * rx;
}

// World -> local affine map: T x = diag(1/r) * R^T * (x - p). The local
// frame is isotropic, oriented, and centered on the element.
struct ElementTransform {
    Mat3 linear;
    Vec3 translation;

    Vec3 apply(const Vec3& x) const { return linear * x + translation; }

    // Recovers x from a local point; the linear part is diag(1/r) R^T, so
    // the inverse is R diag(r).
    Vec3 apply_inverse(const Vec3& s) const { return linear.inverse() * (s - translation); }
};

inline ElementTransform element_transform(const ElementParams& params) {
    if (params.radii_r.minCoeff() <= 0) throw IoError("element transform: radii must be positive");
    Mat3 r_t = rotation_from_euler(params.euler_e).transpose();
    ElementTransform t;
    t.linear = params.radii_r.cwiseInverse().asDiagonal() * r_t;
    t.translation = -(t.linear * params.center_p);
    return t;
}

// g(x, theta) = c * exp(-||T x||^2 / 2), Values lie in [c, 0].
inline double eval_gaussian(const Vec3& x, const ElementParams& params) {
    ElementTransform t = element_transform(params);
    return params.scale_c * std::exp(-0.5 * t.apply(x).squaredNorm());
}

// N shape elements + latent codes + one shared decoder + symmetry
// configuration. Immutable after construction; evaluation is pure.
struct LdifModel {
    int n_elements = 0;
    int latent_dim = 0;
    std::vector<ElementParams> elements;
    std::vector<VecX> latents;
    DecoderWeights decoder;
    int sym_count = 0;  // first sym_count elements are also evaluated at S x
    int sym_axis = 0;   // reflection plane normal axis (plane x_axis = 0)

    void validate() const {
        if (n_elements < 0 || static_cast<int>(elements.size()) != n_elements ||
            static_cast<int>(latents.size()) != n_elements)
            throw IoError("model: element/latent counts inconsistent");
        if (sym_count < 0 || sym_count > n_elements) throw IoError("model: sym_count out of range");
        if (sym_axis < 0 || sym_axis > 2) throw IoError("model: sym_axis out of range");
        if (decoder.latent != latent_dim || !decoder.shapes_consistent())
            throw IoError("model: decoder shapes inconsistent with latent_dim");
        for (const auto& z : latents)
            if (z.size() != latent_dim) throw IoError("model: latent length != latent_dim");
        for (const auto& e : elements)
            if (e.radii_r.minCoeff() <= 0) throw IoError("model: element radii must be positive");
    }
};

inline Vec3 reflect(const Vec3& x, int axis) {
    Vec3 y = x;
    y[axis] = -y[axis];
    return y;
}

// Caches per-element transforms and CBN affines; cheap to evaluate many
// times. Read-only and safe to share across threads.
class LdifEvaluator {
  public:
    explicit LdifEvaluator(const LdifModel& model) : model_(&model) {
        model.validate();
        transforms_.reserve(model.n_elements);
        affines_.reserve(model.n_elements);
        for (int i = 0; i < model.n_elements; ++i) {
            transforms_.push_back(element_transform(model.elements[i]));
            affines_.push_back(cbn_affine(model.latents[i], model.decoder));
        }
    }

    // Sum over elements of g(x)(1 + f(Tx, z)), plus the mirrored term for
    // symmetric elements; element index order is fixed for determinism.
    double operator()(const Vec3& x) const {
        double total = 0.0;
        for (int i = 0; i < model_->n_elements; ++i) {
            total += term(i, x);
            if (i < model_->sym_count) total += term(i, reflect(x, model_->sym_axis));
        }
        return total;
    }

    double term(int i, const Vec3& query) const {
        Vec3 local = transforms_[i].apply(query);
        double g = model_->elements[i].scale_c * std::exp(-0.5 * local.squaredNorm());
        double f = decoder_forward(local, affines_[i], model_->decoder);
        return g * (1.0 + f);
    }

    const LdifModel& model() const { return *model_; }

  private:
    const LdifModel* model_;
    std::vector<ElementTransform> transforms_;
    std::vector<CbnAffine> affines_;
};

inline double eval_ldif(const Vec3& x, const LdifModel& model) { return LdifEvaluator(model)(x); }

inline std::vector<double> eval_ldif_batch(const std::vector<Vec3>& points, const LdifModel& model) {
    LdifEvaluator eval(model);
    std::vector<double> out(points.size());
    parallel_chunks(points.size(), 1024, [&](size_t, size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) out[i] = eval(points[i]);
    });
    return out;
}

}  // namespace ldif
