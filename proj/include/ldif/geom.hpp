#pragma once

#include <algorithm>
#include <memory>
#include <vector>

#include "ldif/bvh.hpp"
#include "ldif/common.hpp"
#include "ldif/trimesh.hpp"

namespace ldif {

enum class SampleOrigin { near_surface, uniform };

// Query points with inside/outside labels and per-point loss weights.
struct LabeledSampleSet {
    std::vector<Vec3> points;
    std::vector<uint8_t> inside;
    std::vector<double> weights;
    SampleOrigin origin = SampleOrigin::uniform;

    size_t size() const { return points.size(); }
};

inline LabeledSampleSet merge(const LabeledSampleSet& a, const LabeledSampleSet& b) {
    LabeledSampleSet out = a;
    out.points.insert(out.points.end(), b.points.begin(), b.points.end());
    out.inside.insert(out.inside.end(), b.inside.begin(), b.inside.end());
    out.weights.insert(out.weights.end(), b.weights.begin(), b.weights.end());
    return out;
}

// Inside/outside oracle for a watertight mesh: parity of ray-triangle
// crossings along three fixed random directions, majority vote. The
// directions come from a fixed seeded generator so results are stable.
class MeshQuery {
  public:
    explicit MeshQuery(const TriMesh& mesh, bool require_watertight = true) : mesh_(&mesh), bvh_(mesh) {
        if (require_watertight && !mesh.is_watertight())
            throw IoError("mesh is not watertight (boundary or non-manifold edge found)");
        Rng rng(0x1d1f5eedull);
        for (int k = 0; k < 3; ++k) dirs_[k] = rng.unit_vector();
    }

    bool inside(const Vec3& x) const {
        int votes = 0;
        for (int k = 0; k < 3; ++k)
            votes += bvh_.count_crossings(x, dirs_[k]) & 1;
        return votes >= 2;
    }

    double distance(const Vec3& x) const { return bvh_.distance(x); }
    double squared_distance(const Vec3& x) const { return bvh_.squared_distance(x); }

    const TriMesh& mesh() const { return *mesh_; }

  private:
    const TriMesh* mesh_;
    TriangleBvh bvh_;
    Vec3 dirs_[3];
};

inline bool inside_outside(const TriMesh& mesh, const Vec3& x) { return MeshQuery(mesh).inside(x); }

// Area-weighted uniform surface samples; normals are face normals.
struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
};

inline SurfaceSamples sample_surface(const TriMesh& mesh, size_t count, Rng rng, bool with_normals = false) {
    SurfaceSamples out;
    out.points.reserve(count);
    if (count == 0) return out;
    if (mesh.triangles.empty()) throw IoError("cannot sample an empty mesh");
    std::vector<double> cum(mesh.triangle_count());
    double total = 0;
    for (size_t t = 0; t < mesh.triangle_count(); ++t) {
        total += mesh.triangle_area(t);
        cum[t] = total;
    }
    if (total <= 0) throw IoError("cannot sample a zero-area mesh");
    for (size_t i = 0; i < count; ++i) {
        double u = rng.uniform() * total;
        size_t t = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        if (t >= cum.size()) t = cum.size() - 1;
        double r1 = rng.uniform(), r2 = rng.uniform();
        double sq = std::sqrt(r1);
        double wa = 1.0 - sq, wb = sq * (1.0 - r2), wc = sq * r2;
        Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
        out.points.push_back(wa * a + wb * b + wc * c);
        if (with_normals) {
            Vec3 n = (b - a).cross(c - a);
            double len = n.norm();
            out.normals.push_back(len > 0 ? Vec3(n / len) : Vec3(0, 0, 1));
        }
    }
    return out;
}

// Surface points jittered by isotropic Gaussian noise of std sigma,
// labeled by the parity oracle.
inline LabeledSampleSet sample_near_surface(const MeshQuery& query, size_t count, double sigma, Rng rng,
                                            double weight) {
    LabeledSampleSet out;
    out.origin = SampleOrigin::near_surface;
    SurfaceSamples surf = sample_surface(query.mesh(), count, rng.sub("surface"));
    Rng jitter = rng.sub("jitter");
    out.points.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        Vec3 p = surf.points[i] + sigma * jitter.normal3();
        out.points.push_back(p);
        out.inside.push_back(query.inside(p) ? 1 : 0);
        out.weights.push_back(weight);
    }
    return out;
}

inline LabeledSampleSet sample_near_surface(const TriMesh& mesh, size_t count, double sigma, Rng rng,
                                            double weight = 0.1) {
    return sample_near_surface(MeshQuery(mesh), count, sigma, rng, weight);
}

// Uniform samples in a box, labeled against the mesh.
inline LabeledSampleSet sample_uniform(const Box3& bounds, size_t count, const MeshQuery& query, Rng rng,
                                       double weight) {
    LabeledSampleSet out;
    out.origin = SampleOrigin::uniform;
    out.points.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        Vec3 p(rng.uniform(bounds.min().x(), bounds.max().x()),
               rng.uniform(bounds.min().y(), bounds.max().y()),
               rng.uniform(bounds.min().z(), bounds.max().z()));
        out.points.push_back(p);
        out.inside.push_back(query.inside(p) ? 1 : 0);
        out.weights.push_back(weight);
    }
    return out;
}

inline LabeledSampleSet sample_uniform(const Box3& bounds, size_t count, const TriMesh& mesh, Rng rng,
                                       double weight = 1.0) {
    return sample_uniform(bounds, count, MeshQuery(mesh), rng, weight);
}

// 32^3 signed-distance grid (negative inside). Nodes sit at cell corners;
// spacing is per-axis extent/(res-1).
struct SdfGrid {
    int resolution = 32;
    Box3 bounds;
    std::vector<double> values;  // x-major: ((ix*res)+iy)*res+iz

    double& at(int ix, int iy, int iz) { return values[(static_cast<size_t>(ix) * resolution + iy) * resolution + iz]; }
    double at(int ix, int iy, int iz) const {
        return values[(static_cast<size_t>(ix) * resolution + iy) * resolution + iz];
    }

    Vec3 spacing() const { return bounds.sizes() / (resolution - 1); }

    // Half the (largest-axis) voxel width; the conservative beta of the
    // element-center loss.
    double half_cell_width() const { return 0.5 * spacing().maxCoeff(); }

    bool contains(const Vec3& p) const { return bounds.contains(p); }

    Vec3 node_position(int ix, int iy, int iz) const {
        Vec3 s = spacing();
        return bounds.min() + Vec3(ix * s.x(), iy * s.y(), iz * s.z());
    }

    // Trilinear interpolation; optionally also the spatial gradient.
    double trilinear(const Vec3& p, Vec3* grad = nullptr) const {
        Vec3 s = spacing();
        Vec3 local = (p - bounds.min()).cwiseQuotient(s);
        int ix = std::clamp(static_cast<int>(std::floor(local.x())), 0, resolution - 2);
        int iy = std::clamp(static_cast<int>(std::floor(local.y())), 0, resolution - 2);
        int iz = std::clamp(static_cast<int>(std::floor(local.z())), 0, resolution - 2);
        double fx = local.x() - ix, fy = local.y() - iy, fz = local.z() - iz;
        double c000 = at(ix, iy, iz), c100 = at(ix + 1, iy, iz);
        double c010 = at(ix, iy + 1, iz), c110 = at(ix + 1, iy + 1, iz);
        double c001 = at(ix, iy, iz + 1), c101 = at(ix + 1, iy, iz + 1);
        double c011 = at(ix, iy + 1, iz + 1), c111 = at(ix + 1, iy + 1, iz + 1);
        double c00 = c000 + (c100 - c000) * fx;
        double c10 = c010 + (c110 - c010) * fx;
        double c01 = c001 + (c101 - c001) * fx;
        double c11 = c011 + (c111 - c011) * fx;
        double c0 = c00 + (c10 - c00) * fy;
        double c1 = c01 + (c11 - c01) * fy;
        double value = c0 + (c1 - c0) * fz;
        if (grad) {
            double dx0 = (c100 - c000) + ((c110 - c010) - (c100 - c000)) * fy;
            double dx1 = (c101 - c001) + ((c111 - c011) - (c101 - c001)) * fy;
            double dfdx = dx0 + (dx1 - dx0) * fz;
            double dfdy = (c10 - c00) + ((c11 - c01) - (c10 - c00)) * fz;
            double dfdz = c1 - c0;
            *grad = Vec3(dfdx / s.x(), dfdy / s.y(), dfdz / s.z());
        }
        return value;
    }

    // Squared Euclidean distance from p to the grid box (0 inside) and its
    // gradient.
    double squared_exterior_distance(const Vec3& p, Vec3* grad = nullptr) const {
        Vec3 clamped = p.cwiseMax(bounds.min()).cwiseMin(bounds.max());
        Vec3 d = p - clamped;
        if (grad) *grad = 2.0 * d;
        return d.squaredNorm();
    }
};

// Unsigned distance is the exact point-to-triangle minimum; the sign comes
// from the parity oracle. The grid covers the mesh bbox scaled by 1.1
// about its center.
inline SdfGrid build_sdf_grid(const MeshQuery& query, int resolution = 32) {
    SdfGrid grid;
    grid.resolution = resolution;
    Box3 bbox = query.mesh().bounds();
    Vec3 center = bbox.center();
    Vec3 half = 0.5 * 1.1 * bbox.sizes();
    grid.bounds = Box3(center - half, center + half);
    grid.values.resize(static_cast<size_t>(resolution) * resolution * resolution);
    parallel_chunks(static_cast<size_t>(resolution), 1, [&](size_t, size_t begin, size_t end) {
        for (size_t ix = begin; ix < end; ++ix)
            for (int iy = 0; iy < resolution; ++iy)
                for (int iz = 0; iz < resolution; ++iz) {
                    Vec3 p = grid.node_position(static_cast<int>(ix), iy, iz);
                    double d = query.distance(p);
                    grid.at(static_cast<int>(ix), iy, iz) = query.inside(p) ? -d : d;
                }
    });
    return grid;
}

inline SdfGrid build_sdf_grid(const TriMesh& mesh, int resolution = 32) {
    return build_sdf_grid(MeshQuery(mesh), resolution);
}

// Similarity x' = scale * (x - center). normalize_frame produces the
// transform that centers the bbox at the origin and scales the longest
// bbox edge to 1.
struct SimilarityTransform {
    double scale = 1.0;
    Vec3 center = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return scale * (x - center); }
    Vec3 apply_inverse(const Vec3& y) const { return y / scale + center; }
};

inline TriMesh apply_transform(const TriMesh& mesh, const SimilarityTransform& t) {
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v = t.apply(v);
    return out;
}

inline std::pair<TriMesh, SimilarityTransform> normalize_frame(const TriMesh& mesh) {
    if (mesh.vertices.empty()) throw IoError("cannot normalize an empty mesh");
    Box3 bbox = mesh.bounds();
    double longest = bbox.sizes().maxCoeff();
    if (longest <= 0) throw IoError("cannot normalize a degenerate (point) mesh");
    SimilarityTransform t;
    t.center = bbox.center();
    t.scale = 1.0 / longest;
    return {apply_transform(mesh, t), t};
}

}  // namespace ldif
