#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ldif/common.hpp"

namespace ldif {

// Indexed triangle mesh. Inside/outside labeling requires watertightness
// (every edge shared by exactly two triangles); metrics do not.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    size_t vertex_count() const { return vertices.size(); }
    size_t triangle_count() const { return triangles.size(); }
    bool empty() const { return triangles.empty(); }

    Vec3 corner(size_t tri, int k) const { return vertices[triangles[tri][k]]; }

    Box3 bounds() const {
        Box3 box;
        for (const Vec3& v : vertices) box.extend(v);
        return box;
    }

    double triangle_area(size_t t) const {
        Vec3 a = corner(t, 0);
        return 0.5 * (corner(t, 1) - a).cross(corner(t, 2) - a).norm();
    }

    double surface_area() const {
        double s = 0;
        for (size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
        return s;
    }

    // Signed volume by the divergence theorem; positive for outward-oriented
    // closed meshes.
    double signed_volume() const {
        double v = 0;
        for (const auto& t : triangles)
            v += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]]));
        return v / 6.0;
    }

    bool indices_valid() const {
        int n = static_cast<int>(vertices.size());
        for (const auto& t : triangles)
            for (int k = 0; k < 3; ++k)
                if (t[k] < 0 || t[k] >= n) return false;
        return true;
    }

    size_t edge_count() const {
        std::unordered_map<uint64_t, int> edges;
        for (const auto& t : triangles)
            for (int k = 0; k < 3; ++k) {
                uint64_t a = t[k], b = t[(k + 1) % 3];
                if (a > b) std::swap(a, b);
                edges[(a << 32) | b]++;
            }
        return edges.size();
    }

    // Every undirected edge shared by exactly two triangles.
    bool is_watertight() const {
        if (triangles.empty()) return false;
        std::unordered_map<uint64_t, int> edges;
        for (const auto& t : triangles) {
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return false;
            for (int k = 0; k < 3; ++k) {
                uint64_t a = t[k], b = t[(k + 1) % 3];
                if (a > b) std::swap(a, b);
                edges[(a << 32) | b]++;
            }
        }
        for (const auto& [key, count] : edges)
            if (count != 2) return false;
        return true;
    }

    int euler_characteristic() const {
        return static_cast<int>(vertex_count()) - static_cast<int>(edge_count()) +
               static_cast<int>(triangle_count());
    }
};

// Reorders triangles into a vertex-order-independent canonical form: each
// triangle's vertex cycle is rotated so its lexicographically smallest
// coordinate comes first (orientation preserved), then triangles are sorted
// by their coordinate 9-tuples. Two meshes equal up to index permutation
// canonicalize to the same triangle sequence.
inline TriMesh canonical_triangle_order(const TriMesh& mesh) {
    auto key_less = [](const Vec3& a, const Vec3& b) {
        if (a.x() != b.x()) return a.x() < b.x();
        if (a.y() != b.y()) return a.y() < b.y();
        return a.z() < b.z();
    };
    TriMesh out;
    out.vertices = mesh.vertices;
    out.triangles = mesh.triangles;
    for (auto& t : out.triangles) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (key_less(mesh.vertices[t[k]], mesh.vertices[t[best]])) best = k;
        std::rotate(t.begin(), t.begin() + best, t.end());
    }
    auto tri_less = [&](const std::array<int, 3>& a, const std::array<int, 3>& b) {
        for (int k = 0; k < 3; ++k) {
            const Vec3 &va = mesh.vertices[a[k]], &vb = mesh.vertices[b[k]];
            if (key_less(va, vb)) return true;
            if (key_less(vb, va)) return false;
        }
        return false;
    };
    std::stable_sort(out.triangles.begin(), out.triangles.end(), tri_less);
    return out;
}

}  // namespace ldif
