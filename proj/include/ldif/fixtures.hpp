#pragma once

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/trimesh.hpp"

namespace ldif {

// Analytic, watertight test shapes with known volume/membership.

inline TriMesh make_icosphere(int subdivisions = 3, double radius = 1.0, const Vec3& center = Vec3::Zero()) {
    if (subdivisions < 0 || subdivisions > 7) throw IoError("icosphere subdivisions out of range [0,7]");
    if (radius <= 0) throw IoError("icosphere radius must be positive");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh mesh;
    mesh.vertices = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
    };
    mesh.triangles = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (Vec3& v : mesh.vertices) v.normalize();
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = (mesh.vertices[a] + mesh.vertices[b]).normalized();
            int idx = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(m);
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(mesh.triangles.size() * 4);
        for (const auto& t : mesh.triangles) {
            int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        mesh.triangles = std::move(next);
    }
    for (Vec3& v : mesh.vertices) v = center + radius * v;
    return mesh;
}

// Axis-aligned box with outward-oriented faces.
inline TriMesh make_box(const Vec3& lo, const Vec3& hi) {
    if ((hi - lo).minCoeff() <= 0) throw IoError("box extents must be positive");
    TriMesh mesh;
    mesh.vertices = {
        {lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()}, {lo.x(), hi.y(), lo.z()},
        {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()}, {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()},
    };
    mesh.triangles = {
        {0, 2, 1}, {0, 3, 2},  // bottom (z = lo)
        {4, 5, 6}, {4, 6, 7},  // top
        {0, 1, 5}, {0, 5, 4},  // front (y = lo)
        {2, 3, 7}, {2, 7, 6},  // back
        {1, 2, 6}, {1, 6, 5},  // right (x = hi)
        {3, 0, 4}, {3, 4, 7},  // left
    };
    return mesh;
}

inline TriMesh make_unit_box() { return make_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)); }

// Torus around the z axis: ring radius R, tube radius r.
inline TriMesh make_torus(double major = 0.35, double minor = 0.15, int segments = 64, int sides = 32) {
    if (major <= 0 || minor <= 0 || minor >= major) throw IoError("torus radii must satisfy 0 < minor < major");
    if (segments < 3 || sides < 3) throw IoError("torus tessellation too coarse");
    TriMesh mesh;
    mesh.vertices.reserve(static_cast<size_t>(segments) * sides);
    for (int i = 0; i < segments; ++i) {
        double u = 2.0 * M_PI * i / segments;
        for (int j = 0; j < sides; ++j) {
            double v = 2.0 * M_PI * j / sides;
            double w = major + minor * std::cos(v);
            mesh.vertices.emplace_back(w * std::cos(u), w * std::sin(u), minor * std::sin(v));
        }
    }
    auto idx = [&](int i, int j) { return (i % segments) * sides + (j % sides); };
    for (int i = 0; i < segments; ++i)
        for (int j = 0; j < sides; ++j) {
            int a = idx(i, j), b = idx(i + 1, j), c = idx(i + 1, j + 1), d = idx(i, j + 1);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    return mesh;
}

// Four exactly stacked boxes (two side panels, seat, back), mirror
// symmetric about x = 0. Boxes touch on shared planes but do not overlap,
// so ray-parity labeling stays exact.
inline TriMesh make_chair() {
    std::vector<TriMesh> parts = {
        make_box(Vec3(-0.45, -0.40, -0.50), Vec3(-0.35, 0.40, -0.10)),  // left panel
        make_box(Vec3(0.35, -0.40, -0.50), Vec3(0.45, 0.40, -0.10)),    // right panel
        make_box(Vec3(-0.45, -0.40, -0.10), Vec3(0.45, 0.40, 0.00)),    // seat
        make_box(Vec3(-0.45, 0.30, 0.00), Vec3(0.45, 0.40, 0.50)),      // back
    };
    TriMesh mesh;
    for (const TriMesh& part : parts) {
        int base = static_cast<int>(mesh.vertices.size());
        mesh.vertices.insert(mesh.vertices.end(), part.vertices.begin(), part.vertices.end());
        for (const auto& t : part.triangles)
            mesh.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    }
    return mesh;
}

inline TriMesh make_fixture(const std::string& kind) {
    if (kind == "icosphere") return make_icosphere();
    if (kind == "box") return make_unit_box();
    if (kind == "torus") return make_torus();
    if (kind == "chair") return make_chair();
    throw IoError("unknown fixture kind: " + kind + " (expect icosphere|box|torus|chair)");
}

}  // namespace ldif
