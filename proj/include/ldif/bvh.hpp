#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/trimesh.hpp"

namespace ldif {

// Axis-aligned BVH over triangles. Supports counting ray crossings (for
// parity inside/outside tests) and exact closest-point distance queries.
class TriangleBvh {
  public:
    explicit TriangleBvh(const TriMesh& mesh) : mesh_(&mesh) {
        size_t n = mesh.triangle_count();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        centroids_.resize(n);
        for (size_t t = 0; t < n; ++t)
            centroids_[t] = (mesh.corner(t, 0) + mesh.corner(t, 1) + mesh.corner(t, 2)) / 3.0;
        nodes_.reserve(n == 0 ? 1 : 2 * n);
        if (n > 0) build(0, n);
        centroids_.clear();
        centroids_.shrink_to_fit();
    }

    // Number of ray-triangle intersections with t > 0. Intersections on
    // shared edges may be counted per incident triangle; callers use random
    // directions and majority voting to make such events irrelevant.
    int count_crossings(const Vec3& origin, const Vec3& dir) const {
        if (nodes_.empty()) return 0;
        Vec3 inv_dir(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
        int count = 0;
        walk_ray(0, origin, dir, inv_dir, count);
        return count;
    }

    // Squared distance from p to the nearest triangle.
    double squared_distance(const Vec3& p) const {
        if (nodes_.empty()) return std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        walk_closest(0, p, best);
        return best;
    }

    double distance(const Vec3& p) const { return std::sqrt(squared_distance(p)); }

  private:
    struct Node {
        Box3 box;
        int left = -1, right_ = -1;  // internal: child indices; leaf: -1
        int begin = 0, end = 0;      // leaf triangle range in order_
    };

    static constexpr size_t kLeafSize = 8;

    int build(size_t begin, size_t end) {
        int idx = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Box3 box;
        for (size_t i = begin; i < end; ++i) {
            size_t t = order_[i];
            box.extend(mesh_->corner(t, 0));
            box.extend(mesh_->corner(t, 1));
            box.extend(mesh_->corner(t, 2));
        }
        nodes_[idx].box = box;
        if (end - begin <= kLeafSize) {
            nodes_[idx].begin = static_cast<int>(begin);
            nodes_[idx].end = static_cast<int>(end);
            return idx;
        }
        Vec3 extent = box.sizes();
        int axis = 0;
        if (extent.y() > extent.x()) axis = 1;
        if (extent.z() > extent[axis]) axis = 2;
        size_t mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](size_t a, size_t b) { return centroids_[a][axis] < centroids_[b][axis]; });
        int left = build(begin, mid);
        int right = build(mid, end);
        nodes_[idx].left = left;
        nodes_[idx].right_ = right;
        return idx;
    }

    static bool ray_hits_box(const Box3& box, const Vec3& origin, const Vec3& inv_dir) {
        double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            double t1 = (box.min()[a] - origin[a]) * inv_dir[a];
            double t2 = (box.max()[a] - origin[a]) * inv_dir[a];
            if (t1 > t2) std::swap(t1, t2);
            tmin = std::max(tmin, t1);
            tmax = std::min(tmax, t2);
            if (tmin > tmax) return false;
        }
        return true;
    }

    // Moller-Trumbore, counts strictly forward hits.
    bool ray_hits_triangle(size_t t, const Vec3& origin, const Vec3& dir) const {
        Vec3 a = mesh_->corner(t, 0);
        Vec3 e1 = mesh_->corner(t, 1) - a;
        Vec3 e2 = mesh_->corner(t, 2) - a;
        Vec3 pvec = dir.cross(e2);
        double det = e1.dot(pvec);
        if (det == 0.0) return false;
        double inv_det = 1.0 / det;
        Vec3 tvec = origin - a;
        double u = tvec.dot(pvec) * inv_det;
        if (u < 0.0 || u > 1.0) return false;
        Vec3 qvec = tvec.cross(e1);
        double v = dir.dot(qvec) * inv_det;
        if (v < 0.0 || u + v > 1.0) return false;
        double hit_t = e2.dot(qvec) * inv_det;
        return hit_t > 0.0;
    }

    void walk_ray(int node, const Vec3& origin, const Vec3& dir, const Vec3& inv_dir, int& count) const {
        const Node& n = nodes_[node];
        if (!ray_hits_box(n.box, origin, inv_dir)) return;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i)
                if (ray_hits_triangle(order_[i], origin, dir)) ++count;
            return;
        }
        walk_ray(n.left, origin, dir, inv_dir, count);
        walk_ray(n.right_, origin, dir, inv_dir, count);
    }

    static double squared_distance_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
        // Ericson, Real-Time Collision Detection, closest point on triangle.
        Vec3 ab = b - a, ac = c - a, ap = p - a;
        double d1 = ab.dot(ap), d2 = ac.dot(ap);
        if (d1 <= 0.0 && d2 <= 0.0) return ap.squaredNorm();
        Vec3 bp = p - b;
        double d3 = ab.dot(bp), d4 = ac.dot(bp);
        if (d3 >= 0.0 && d4 <= d3) return bp.squaredNorm();
        double vc = d1 * d4 - d3 * d2;
        if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
            double v = d1 / (d1 - d3);
            return (ap - v * ab).squaredNorm();
        }
        Vec3 cp = p - c;
        double d5 = ab.dot(cp), d6 = ac.dot(cp);
        if (d6 >= 0.0 && d5 <= d6) return cp.squaredNorm();
        double vb = d5 * d2 - d1 * d6;
        if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
            double w = d2 / (d2 - d6);
            return (ap - w * ac).squaredNorm();
        }
        double va = d3 * d6 - d5 * d4;
        if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
            double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return (bp - w * (c - b)).squaredNorm();
        }
        double denom = 1.0 / (va + vb + vc);
        double v = vb * denom, w = vc * denom;
        return (ap - (ab * v + ac * w)).squaredNorm();
    }

    void walk_closest(int node, const Vec3& p, double& best) const {
        const Node& n = nodes_[node];
        if (n.box.squaredExteriorDistance(p) >= best) return;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                size_t t = order_[i];
                best = std::min(best, squared_distance_point_triangle(
                                          p, mesh_->corner(t, 0), mesh_->corner(t, 1), mesh_->corner(t, 2)));
            }
            return;
        }
        double dl = nodes_[n.left].box.squaredExteriorDistance(p);
        double dr = nodes_[n.right_].box.squaredExteriorDistance(p);
        if (dl < dr) {
            walk_closest(n.left, p, best);
            walk_closest(n.right_, p, best);
        } else {
            walk_closest(n.right_, p, best);
            walk_closest(n.left, p, best);
        }
    }

    const TriMesh* mesh_;
    std::vector<size_t> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

}  // namespace ldif
