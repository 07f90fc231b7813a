#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/geom.hpp"
#include "ldif/kdtree.hpp"
#include "ldif/mesher.hpp"
#include "ldif/model.hpp"

namespace ldif {

// Evaluation report. IoU is absent when the ground truth is not
// watertight. Chamfer carries the conventional x100 factor; F-Score is a
// percentage.
struct MetricsReport {
    std::optional<double> iou;
    double chamfer = 0;
    double fscore = 0;
    double tau = 0.01;
    long samples = 100000;
};

struct MetricsConfig {
    long samples = 100000;
    double tau = 0.01;
    uint64_t seed = 7;
    double isolevel = -0.07;  // labels LdifModel predictions
};

namespace detail {

inline Box3 pad_box(const Box3& box, double fraction) {
    Vec3 half = 0.5 * (1.0 + fraction) * box.sizes();
    return Box3(box.center() - half, box.center() + half);
}

inline std::vector<Vec3> box_samples(const Box3& box, long count, Rng& rng) {
    std::vector<Vec3> out;
    out.reserve(count);
    for (long i = 0; i < count; ++i)
        out.emplace_back(rng.uniform(box.min().x(), box.max().x()), rng.uniform(box.min().y(), box.max().y()),
                         rng.uniform(box.min().z(), box.max().z()));
    return out;
}

template <typename InsideA, typename InsideB>
double iou_from_labels(const std::vector<Vec3>& samples, const InsideA& in_a, const InsideB& in_b,
                       bool* degenerate = nullptr) {
    std::vector<uint8_t> a(samples.size()), b(samples.size());
    parallel_chunks(samples.size(), 2048, [&](size_t, size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            a[i] = in_a(samples[i]) ? 1 : 0;
            b[i] = in_b(samples[i]) ? 1 : 0;
        }
    });
    long both = 0, either = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        both += a[i] & b[i];
        either += a[i] | b[i];
    }
    if (degenerate) *degenerate = either == 0;
    return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

inline double mean_squared_nn(const std::vector<Vec3>& from, const KdTree& to) {
    std::vector<double> partial(n_chunks_for(from.size(), 2048), 0.0);
    parallel_chunks(from.size(), 2048, [&](size_t chunk, size_t begin, size_t end) {
        double s = 0;
        for (size_t i = begin; i < end; ++i) s += to.nearest(from[i]).squared_distance;
        partial[chunk] = s;
    });
    double total = 0;
    for (double s : partial) total += s;
    return total / static_cast<double>(from.size());
}

inline double fraction_within(const std::vector<Vec3>& from, const KdTree& to, double tau) {
    std::vector<long> partial(n_chunks_for(from.size(), 2048), 0);
    double tau2 = tau * tau;
    parallel_chunks(from.size(), 2048, [&](size_t chunk, size_t begin, size_t end) {
        long c = 0;
        for (size_t i = begin; i < end; ++i)
            if (to.nearest(from[i]).squared_distance <= tau2) ++c;
        partial[chunk] = c;
    });
    long total = 0;
    for (long c : partial) total += c;
    return static_cast<double>(total) / static_cast<double>(from.size());
}

}  // namespace detail

// Point-set Chamfer distance:
// 100 * (mean_A min_B |a-b|^2 + mean_B min_A |a-b|^2).
inline double chamfer_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw IoError("chamfer: empty point set");
    KdTree tree_a(a), tree_b(b);
    return 100.0 * (detail::mean_squared_nn(a, tree_b) + detail::mean_squared_nn(b, tree_a));
}

// Point-set F-Score (percent) at absolute point-to-point threshold tau.
inline double fscore_points(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double tau) {
    if (pred.empty() || gt.empty()) throw IoError("f-score: empty point set");
    KdTree tree_pred(pred), tree_gt(gt);
    double precision = 100.0 * detail::fraction_within(pred, tree_gt, tau);
    double recall = 100.0 * detail::fraction_within(gt, tree_pred, tau);
    if (precision + recall <= 0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// IoU between two meshes from uniform samples in their joint bbox (padded
// 5%), labeled by the parity oracle.
inline double metric_iou(const TriMesh& pred, const TriMesh& gt, long n = 100000, uint64_t seed = 7) {
    MeshQuery qa(pred), qb(gt);
    Box3 box = pred.bounds();
    box.extend(gt.bounds());
    Rng rng = Rng(seed).sub("iou");
    std::vector<Vec3> samples = detail::box_samples(detail::pad_box(box, 0.05), n, rng);
    return detail::iou_from_labels(
        samples, [&](const Vec3& x) { return qa.inside(x); }, [&](const Vec3& x) { return qb.inside(x); });
}

// IoU with an implicit-model prediction: inside means field < isolevel.
inline double metric_iou(const LdifModel& pred, const TriMesh& gt, long n = 100000, uint64_t seed = 7,
                         double isolevel = -0.07) {
    LdifEvaluator eval(pred);
    MeshQuery qb(gt);
    Box3 box = model_support_bounds(pred);
    box.extend(gt.bounds());
    Rng rng = Rng(seed).sub("iou");
    std::vector<Vec3> samples = detail::box_samples(detail::pad_box(box, 0.05), n, rng);
    return detail::iou_from_labels(
        samples, [&](const Vec3& x) { return eval(x) < isolevel; }, [&](const Vec3& x) { return qb.inside(x); });
}

// Both sides sample with the same substream: identical meshes then yield
// identical point sets (self-comparison scores exactly 100 / 0), while
// distinct meshes decorrelate through their geometry.
inline double metric_chamfer(const TriMesh& pred, const TriMesh& gt, long n = 100000, uint64_t seed = 7) {
    Rng rng = Rng(seed).sub("chamfer");
    auto a = sample_surface(pred, n, rng);
    auto b = sample_surface(gt, n, rng);
    return chamfer_points(a.points, b.points);
}

inline double metric_fscore(const TriMesh& pred, const TriMesh& gt, double tau = 0.01, long n = 100000,
                            uint64_t seed = 7) {
    Rng rng = Rng(seed).sub("fscore");
    auto a = sample_surface(pred, n, rng);
    auto b = sample_surface(gt, n, rng);
    return fscore_points(a.points, b.points, tau);
}

// Full report in the normalized frame of the ground-truth mesh: both
// meshes are mapped by gt's bbox normalization, so tau and the Chamfer
// factor are expressed in units of the gt bounding box. IoU requires a
// watertight gt (and pred); it is omitted with a warning flag otherwise.
inline MetricsReport evaluate(const TriMesh& pred, const TriMesh& gt, const MetricsConfig& cfg = {}) {
    auto [gt_norm, transform] = normalize_frame(gt);
    TriMesh pred_norm = apply_transform(pred, transform);
    MetricsReport report;
    report.tau = cfg.tau;
    report.samples = cfg.samples;
    if (gt_norm.is_watertight() && pred_norm.is_watertight())
        report.iou = metric_iou(pred_norm, gt_norm, cfg.samples, cfg.seed);
    report.chamfer = metric_chamfer(pred_norm, gt_norm, cfg.samples, cfg.seed);
    report.fscore = metric_fscore(pred_norm, gt_norm, cfg.tau, cfg.samples, cfg.seed);
    return report;
}

inline std::string report_csv(const MetricsReport& r) {
    char buf[256];
    if (r.iou)
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.4f,%.6g,%ld", *r.iou, r.chamfer, r.fscore, r.tau, r.samples);
    else
        std::snprintf(buf, sizeof(buf), ",%.6f,%.4f,%.6g,%ld", r.chamfer, r.fscore, r.tau, r.samples);
    return std::string(buf);
}

inline std::string report_pretty(const MetricsReport& r) {
    char buf[320];
    if (r.iou)
        std::snprintf(buf, sizeof(buf), "IoU      %.4f\nChamfer  %.6f (x100)\nF-Score  %.2f%% (tau=%g, n=%ld)",
                      *r.iou, r.chamfer, r.fscore, r.tau, r.samples);
    else
        std::snprintf(buf, sizeof(buf),
                      "IoU      n/a (non-watertight input)\nChamfer  %.6f (x100)\nF-Score  %.2f%% (tau=%g, n=%ld)",
                      r.chamfer, r.fscore, r.tau, r.samples);
    return std::string(buf);
}

}  // namespace ldif
