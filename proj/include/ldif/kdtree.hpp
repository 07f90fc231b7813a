#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "ldif/common.hpp"

namespace ldif {

// Exact nearest-neighbor kd-tree over 3D points (median split on the
// widest axis, array-packed nodes).
class KdTree {
  public:
    explicit KdTree(const std::vector<Vec3>& points) : points_(points) {
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), 0);
        if (!points.empty()) {
            nodes_.reserve(2 * points.size() / kLeafSize + 2);
            root_ = build(0, points.size());
        }
    }

    struct Hit {
        size_t index = 0;
        double squared_distance = std::numeric_limits<double>::infinity();
    };

    Hit nearest(const Vec3& q) const {
        Hit best;
        if (root_ >= 0) search(root_, q, best);
        return best;
    }

    size_t size() const { return points_.size(); }

  private:
    static constexpr size_t kLeafSize = 16;

    struct Node {
        Box3 box;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };

    int build(size_t begin, size_t end) {
        int idx = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Box3 box;
        for (size_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
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
                         [&](size_t a, size_t b) { return points_[a][axis] < points_[b][axis]; });
        int l = build(begin, mid);
        int r = build(mid, end);
        nodes_[idx].left = l;
        nodes_[idx].right = r;
        return idx;
    }

    void search(int node, const Vec3& q, Hit& best) const {
        const Node& n = nodes_[node];
        if (n.box.squaredExteriorDistance(q) >= best.squared_distance) return;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                size_t p = order_[i];
                double d = (points_[p] - q).squaredNorm();
                if (d < best.squared_distance) {
                    best.squared_distance = d;
                    best.index = p;
                }
            }
            return;
        }
        double dl = nodes_[n.left].box.squaredExteriorDistance(q);
        double dr = nodes_[n.right].box.squaredExteriorDistance(q);
        if (dl < dr) {
            search(n.left, q, best);
            search(n.right, q, best);
        } else {
            search(n.right, q, best);
            search(n.left, q, best);
        }
    }

    const std::vector<Vec3>& points_;
    std::vector<size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace ldif
