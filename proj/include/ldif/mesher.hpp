#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/fixtures.hpp"
#include "ldif/mc_tables.hpp"
#include "ldif/model.hpp"
#include "ldif/trimesh.hpp"

namespace ldif {

struct MeshingConfig {
    int resolution = 128;              // grid nodes per axis
    std::optional<Box3> bounds;        // default: element bbox at 3 sigma, at least [-0.6,0.6]^3
    double isolevel = -0.07;
};

// AABB of one element's region of influence out to the given number of
// local standard deviations.
inline Box3 element_support_box(const ElementParams& e, double sigmas) {
    Mat3 rot = rotation_from_euler(e.euler_e);
    Vec3 half;
    for (int a = 0; a < 3; ++a)
        half[a] = sigmas * rot.row(a).cwiseProduct(e.radii_r.transpose()).norm();
    return Box3(e.center_p - half, e.center_p + half);
}

// Axis-aligned union of the elements' sigma boxes (including mirrored
// copies); beyond it the field cannot reach a typical isolevel.
inline Box3 model_support_bounds(const LdifModel& model, double sigmas = 3.0) {
    Box3 box;
    for (int i = 0; i < model.n_elements; ++i) {
        Box3 support = element_support_box(model.elements[i], sigmas);
        box.extend(support);
        if (i < model.sym_count) {
            Vec3 lo = reflect(support.min(), model.sym_axis);
            Vec3 hi = reflect(support.max(), model.sym_axis);
            box.extend(lo.cwiseMin(hi));
            box.extend(lo.cwiseMax(hi));
        }
    }
    return box;
}

// Meshing default: the support box extended to at least [-0.6, 0.6]^3.
// The residual factor (1 + f) can push the level set well past 3 sigma, so
// extraction refines this with a coarse probe pass (auto_meshing_bounds).
inline Box3 default_meshing_bounds(const LdifModel& model) {
    Box3 box(Vec3::Constant(-0.6), Vec3::Constant(0.6));
    box.extend(model_support_bounds(model));
    return box;
}

// Dense row-major field of eval_ldif values on a regular grid; nodes sit
// at cell corners, spacing = extent/(res-1) per axis.
struct FieldGrid {
    int resolution = 0;
    Box3 bounds;
    std::vector<double> values;  // ((ix*res)+iy)*res+iz

    double at(int ix, int iy, int iz) const {
        return values[(static_cast<size_t>(ix) * resolution + iy) * resolution + iz];
    }

    Vec3 spacing() const { return bounds.sizes() / (resolution - 1); }

    Vec3 node_position(int ix, int iy, int iz) const {
        Vec3 s = spacing();
        return bounds.min() + Vec3(ix * s.x(), iy * s.y(), iz * s.z());
    }
};

inline FieldGrid field_grid(const LdifModel& model, const MeshingConfig& cfg = {}) {
    if (cfg.resolution < 2) throw IoError("meshing resolution must be >= 2");
    FieldGrid grid;
    grid.resolution = cfg.resolution;
    grid.bounds = cfg.bounds ? *cfg.bounds : default_meshing_bounds(model);
    grid.values.resize(static_cast<size_t>(cfg.resolution) * cfg.resolution * cfg.resolution);
    LdifEvaluator eval(model);
    int res = cfg.resolution;
    parallel_chunks(static_cast<size_t>(res), 1, [&](size_t, size_t begin, size_t end) {
        for (size_t ix = begin; ix < end; ++ix)
            for (int iy = 0; iy < res; ++iy)
                for (int iz = 0; iz < res; ++iz)
                    grid.values[(ix * res + iy) * res + iz] =
                        eval(grid.node_position(static_cast<int>(ix), iy, iz));
    });
    return grid;
}

// Marching cubes at the given isolevel with "inside" = value < isolevel.
// Vertices are welded by exact lattice-edge identity; triangle assembly is
// single-threaded and deterministic. Returns an empty mesh when the field
// never crosses the isolevel.
inline TriMesh marching_cubes(const FieldGrid& grid, double isolevel) {
    TriMesh mesh;
    const int res = grid.resolution;
    std::unordered_map<uint64_t, int> edge_vertex;
    auto corner_id = [&](int ix, int iy, int iz) {
        return static_cast<uint64_t>((static_cast<size_t>(ix) * res + iy) * res + iz);
    };
    double corner_val[8];
    Vec3 corner_pos[8];
    uint64_t corner_key[8];
    int edge_ids[12];
    for (int ix = 0; ix + 1 < res; ++ix)
        for (int iy = 0; iy + 1 < res; ++iy)
            for (int iz = 0; iz + 1 < res; ++iz) {
                int cube_index = 0;
                for (int c = 0; c < 8; ++c) {
                    int cx = ix + mc::kCornerOffset[c][0];
                    int cy = iy + mc::kCornerOffset[c][1];
                    int cz = iz + mc::kCornerOffset[c][2];
                    corner_val[c] = grid.at(cx, cy, cz);
                    corner_pos[c] = grid.node_position(cx, cy, cz);
                    corner_key[c] = corner_id(cx, cy, cz);
                    if (corner_val[c] < isolevel) cube_index |= 1 << c;
                }
                uint16_t edges = mc::kEdgeTable[cube_index];
                if (edges == 0) continue;
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    int a = mc::kEdgeCorners[e][0], b = mc::kEdgeCorners[e][1];
                    uint64_t ka = corner_key[a], kb = corner_key[b];
                    uint64_t key = ka < kb ? (ka << 32 | kb) : (kb << 32 | ka);
                    auto it = edge_vertex.find(key);
                    if (it == edge_vertex.end()) {
                        // One corner is strictly below the level, the other is
                        // not, so the denominator cannot vanish. Interpolate
                        // from the lower corner id to keep the vertex position
                        // independent of traversal direction.
                        double va = corner_val[a], vb = corner_val[b];
                        Vec3 pa = corner_pos[a], pb = corner_pos[b];
                        if (ka > kb) {
                            std::swap(va, vb);
                            std::swap(pa, pb);
                        }
                        double t = (isolevel - va) / (vb - va);
                        Vec3 pos = pa + t * (pb - pa);
                        it = edge_vertex.emplace(key, static_cast<int>(mesh.vertices.size())).first;
                        mesh.vertices.push_back(pos);
                    }
                    edge_ids[e] = it->second;
                }
                // The table's winding faces the below-isolevel side; emit
                // reversed so normals point outward (inside = value < iso).
                const int8_t* tris = mc::kTriTable[cube_index];
                for (int t = 0; tris[t] != -1; t += 3)
                    mesh.triangles.push_back({edge_ids[tris[t]], edge_ids[tris[t + 2]], edge_ids[tris[t + 1]]});
            }
    return mesh;
}

// Tight bounds from a coarse probe of the field: the bbox of all probe
// nodes at or below the isolevel, padded by two probe cells. The probe
// box doubles the 3-sigma support box so even strongly amplified tails
// stay inside it.
inline Box3 auto_meshing_bounds(const LdifModel& model, double isolevel) {
    Box3 generous = default_meshing_bounds(model);
    Vec3 half = generous.sizes();  // 2x about the center
    Box3 probe_box(generous.center() - half, generous.center() + half);
    MeshingConfig probe_cfg;
    probe_cfg.resolution = 32;
    probe_cfg.bounds = probe_box;
    FieldGrid probe = field_grid(model, probe_cfg);
    Box3 tight;
    for (int ix = 0; ix < probe.resolution; ++ix)
        for (int iy = 0; iy < probe.resolution; ++iy)
            for (int iz = 0; iz < probe.resolution; ++iz)
                if (probe.at(ix, iy, iz) < isolevel) tight.extend(probe.node_position(ix, iy, iz));
    if (tight.isEmpty()) return generous;  // no crossing anywhere
    Vec3 pad = 2.0 * probe.spacing();
    return Box3(tight.min() - pad, tight.max() + pad);
}

inline TriMesh extract_mesh(const LdifModel& model, const MeshingConfig& cfg = {}) {
    MeshingConfig actual = cfg;
    if (!actual.bounds) actual.bounds = auto_meshing_bounds(model, cfg.isolevel);
    FieldGrid grid = field_grid(model, actual);
    return marching_cubes(grid, actual.isolevel);
}

// Raw field dump: one text header line "FIELD res minx miny minz maxx
// maxy maxz", then res^3 little-endian 32-bit floats in grid order.
inline void save_field(const std::string& path, const FieldGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open field dump for writing: " + path);
    char header[256];
    std::snprintf(header, sizeof(header), "FIELD %d %.17g %.17g %.17g %.17g %.17g %.17g\n", grid.resolution,
                  grid.bounds.min().x(), grid.bounds.min().y(), grid.bounds.min().z(), grid.bounds.max().x(),
                  grid.bounds.max().y(), grid.bounds.max().z());
    out << header;
    std::vector<float> floats(grid.values.begin(), grid.values.end());
    out.write(reinterpret_cast<const char*>(floats.data()),
              static_cast<std::streamsize>(floats.size() * sizeof(float)));
    if (!out) throw IoError("failed writing field dump: " + path);
}

// Support ellipsoids: the level set of each element's isolated Gaussian at
// the given isolevel, as transformed icospheres. Elements whose amplitude
// never reaches the isolevel produce no surface and are skipped; symmetric
// elements also emit the mirrored copy. Returns one mesh per surface with
// its element index.
struct ElementEllipsoid {
    int element = 0;
    bool mirrored = false;
    TriMesh mesh;
};

inline std::vector<ElementEllipsoid> element_ellipsoids(const LdifModel& model, double isolevel = -0.07,
                                                        int subdivisions = 2) {
    model.validate();
    if (isolevel >= 0) throw IoError("element ellipsoids need a negative isolevel");
    std::vector<ElementEllipsoid> out;
    TriMesh unit = make_icosphere(subdivisions, 1.0);
    for (int i = 0; i < model.n_elements; ++i) {
        const ElementParams& e = model.elements[i];
        double ratio = e.scale_c / isolevel;  // |c| / |isolevel|
        if (ratio <= 1.0) continue;           // field never reaches the isolevel
        double k = std::sqrt(2.0 * std::log(ratio));
        Mat3 rot = rotation_from_euler(e.euler_e);
        Mat3 map = rot * (k * e.radii_r).asDiagonal();
        ElementEllipsoid ell;
        ell.element = i;
        ell.mesh = unit;
        for (Vec3& v : ell.mesh.vertices) v = e.center_p + map * v;
        out.push_back(ell);
        if (i < model.sym_count) {
            ElementEllipsoid mirror;
            mirror.element = i;
            mirror.mirrored = true;
            mirror.mesh = out.back().mesh;
            for (Vec3& v : mirror.mesh.vertices) v = reflect(v, model.sym_axis);
            for (auto& t : mirror.mesh.triangles) std::swap(t[1], t[2]);  // keep outward winding
            out.push_back(std::move(mirror));
        }
    }
    return out;
}

}  // namespace ldif
