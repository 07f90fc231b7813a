#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ldif/common.hpp"
#include "ldif/model.hpp"

namespace ldif {

// Pinhole camera: intrinsics in pixels, world->camera rigid transform
// x_cam = R x_world + t. Depth is measured along +z in the camera frame.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int width = 0, height = 0;

    void validate() const {
        if (fx <= 0 || fy <= 0) throw IoError("camera: focal lengths must be positive");
        Mat3 should_be_identity = rotation * rotation.transpose();
        if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
            throw IoError("camera: extrinsic rotation is not orthonormal");
    }

    Vec3 center() const { return -(rotation.transpose() * translation); }
};

// Row-major w*h depth values; 0 or NaN marks an invalid pixel.
struct DepthImage {
    int width = 0, height = 0;
    std::vector<double> data;

    double at(int u, int v) const { return data[static_cast<size_t>(v) * width + u]; }
    double& at(int u, int v) { return data[static_cast<size_t>(v) * width + u]; }
    bool valid(int u, int v) const {
        double d = at(u, v);
        return std::isfinite(d) && d > 0;
    }
};

// Per-pixel world-space positions with a validity mask; remembers the
// camera center for normal orientation.
struct XyzImage {
    int width = 0, height = 0;
    std::vector<Vec3> points;
    std::vector<uint8_t> valid;
    Vec3 camera_center = Vec3::Zero();

    const Vec3& at(int u, int v) const { return points[static_cast<size_t>(v) * width + u]; }
    bool is_valid(int u, int v) const { return valid[static_cast<size_t>(v) * width + u] != 0; }
};

struct NormalImage {
    int width = 0, height = 0;
    std::vector<Vec3> normals;
    std::vector<uint8_t> valid;

    const Vec3& at(int u, int v) const { return normals[static_cast<size_t>(v) * width + u]; }
    bool is_valid(int u, int v) const { return valid[static_cast<size_t>(v) * width + u] != 0; }
};

struct OrientedPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;

    size_t size() const { return points.size(); }
};

// Pixel (u,v) at depth d -> camera point ((u-cx)d/fx, (v-cy)d/fy, d) ->
// world via the inverse extrinsics.
inline XyzImage unproject(const DepthImage& depth, const Camera& cam) {
    cam.validate();
    XyzImage out;
    out.width = depth.width;
    out.height = depth.height;
    out.points.resize(depth.data.size(), Vec3::Zero());
    out.valid.resize(depth.data.size(), 0);
    out.camera_center = cam.center();
    Mat3 cam_to_world = cam.rotation.transpose();
    for (int v = 0; v < depth.height; ++v)
        for (int u = 0; u < depth.width; ++u) {
            if (!depth.valid(u, v)) continue;
            double d = depth.at(u, v);
            Vec3 cam_pt((u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d);
            size_t idx = static_cast<size_t>(v) * depth.width + u;
            out.points[idx] = cam_to_world * (cam_pt - cam.translation);
            out.valid[idx] = 1;
        }
    return out;
}

// World point -> (u, v, depth); the exact inverse of unproject for points
// in front of the camera.
inline Vec3 project(const Vec3& world, const Camera& cam) {
    Vec3 cam_pt = cam.rotation * world + cam.translation;
    if (cam_pt.z() <= 0) throw IoError("project: point behind the camera");
    return Vec3(cam.fx * cam_pt.x() / cam_pt.z() + cam.cx, cam.fy * cam_pt.y() / cam_pt.z() + cam.cy, cam_pt.z());
}

// Central-difference cross-product normals, oriented toward the camera;
// pixels with any invalid 4-neighborhood are dropped.
inline NormalImage estimate_normals(const XyzImage& xyz) {
    NormalImage out;
    out.width = xyz.width;
    out.height = xyz.height;
    out.normals.resize(xyz.points.size(), Vec3::Zero());
    out.valid.resize(xyz.points.size(), 0);
    for (int v = 1; v + 1 < xyz.height; ++v)
        for (int u = 1; u + 1 < xyz.width; ++u) {
            if (!xyz.is_valid(u, v) || !xyz.is_valid(u - 1, v) || !xyz.is_valid(u + 1, v) ||
                !xyz.is_valid(u, v - 1) || !xyz.is_valid(u, v + 1))
                continue;
            Vec3 du = xyz.at(u + 1, v) - xyz.at(u - 1, v);
            Vec3 dv = xyz.at(u, v + 1) - xyz.at(u, v - 1);
            Vec3 n = du.cross(dv);
            double len = n.norm();
            if (len <= 0) continue;
            n /= len;
            if (n.dot(xyz.camera_center - xyz.at(u, v)) < 0) n = -n;
            size_t idx = static_cast<size_t>(v) * xyz.width + u;
            out.normals[idx] = n;
            out.valid[idx] = 1;
        }
    return out;
}

// Samples `count` valid pixels without replacement (row-major pixel order
// defines the candidate list); when fewer exist, all are taken and random
// ones are repeated to reach `count`.
inline OrientedPointCloud gather_global(const XyzImage& xyz, const NormalImage& normals, size_t count = 10000,
                                        Rng rng = Rng(7)) {
    if (xyz.width != normals.width || xyz.height != normals.height)
        throw IoError("gather_global: image sizes differ");
    std::vector<size_t> candidates;
    for (size_t i = 0; i < xyz.points.size(); ++i)
        if (xyz.valid[i] && normals.valid[i]) candidates.push_back(i);
    if (candidates.empty()) throw IoError("gather_global: no valid pixels");
    OrientedPointCloud out;
    out.points.reserve(count);
    out.normals.reserve(count);
    Rng pick = rng.sub("gather");
    if (candidates.size() >= count) {
        // Partial Fisher-Yates for a without-replacement sample.
        for (size_t i = 0; i < count; ++i) {
            size_t j = i + pick.below(candidates.size() - i);
            std::swap(candidates[i], candidates[j]);
            out.points.push_back(xyz.points[candidates[i]]);
            out.normals.push_back(normals.normals[candidates[i]]);
        }
    } else {
        for (size_t idx : candidates) {
            out.points.push_back(xyz.points[idx]);
            out.normals.push_back(normals.normals[idx]);
        }
        while (out.points.size() < count) {
            size_t idx = candidates[pick.below(candidates.size())];
            out.points.push_back(xyz.points[idx]);
            out.normals.push_back(normals.normals[idx]);
        }
    }
    return out;
}

// Local point extraction for one element: transform the cloud into the
// element frame, keep points with local norm <= r starting at r = 4.0 and
// growing r by 1.5x until `count` points exist (or the cloud is
// exhausted); sample `count` of them without replacement.
inline OrientedPointCloud extract_local(const OrientedPointCloud& cloud, const ElementParams& params,
                                        size_t count = 1000, Rng rng = Rng(7), double initial_radius = 4.0,
                                        double growth = 1.5) {
    if (cloud.size() == 0) throw IoError("extract_local: empty cloud");
    ElementTransform transform = element_transform(params);
    std::vector<double> local_norm(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) local_norm[i] = transform.apply(cloud.points[i]).norm();
    double radius = initial_radius;
    std::vector<size_t> within;
    for (;;) {
        within.clear();
        for (size_t i = 0; i < cloud.size(); ++i)
            if (local_norm[i] <= radius) within.push_back(i);
        if (within.size() >= count || within.size() == cloud.size()) break;
        radius *= growth;
    }
    OrientedPointCloud out;
    Rng pick = rng.sub("local");
    if (within.size() > count) {
        for (size_t i = 0; i < count; ++i) {
            size_t j = i + pick.below(within.size() - i);
            std::swap(within[i], within[j]);
        }
        within.resize(count);
    }
    out.points.reserve(within.size());
    out.normals.reserve(within.size());
    for (size_t idx : within) {
        out.points.push_back(cloud.points[idx]);
        if (!cloud.normals.empty()) out.normals.push_back(cloud.normals[idx]);
    }
    return out;
}

// Raw float depth format: text header "DPTH w h\n", then w*h little-endian
// 32-bit floats, row-major.
inline DepthImage read_dpth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open depth file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("DPTH: missing header");
    std::istringstream ss(line);
    std::string magic;
    DepthImage img;
    if (!(ss >> magic >> img.width >> img.height) || magic != "DPTH")
        throw IoError("DPTH: bad header (expect 'DPTH w h')");
    if (img.width <= 0 || img.height <= 0) throw IoError("DPTH: non-positive dimensions");
    std::vector<float> floats(static_cast<size_t>(img.width) * img.height);
    if (!in.read(reinterpret_cast<char*>(floats.data()), static_cast<std::streamsize>(floats.size() * 4)))
        throw IoError("DPTH: truncated data");
    img.data.assign(floats.begin(), floats.end());
    return img;
}

inline void write_dpth(const std::string& path, const DepthImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open depth file for writing: " + path);
    out << "DPTH " << img.width << ' ' << img.height << '\n';
    std::vector<float> floats(img.data.begin(), img.data.end());
    out.write(reinterpret_cast<const char*>(floats.data()), static_cast<std::streamsize>(floats.size() * 4));
    if (!out) throw IoError("failed writing depth file: " + path);
}

// Camera text format: line 1 "fx fy cx cy", then 12 extrinsic values
// row-major ([R | t], world->camera).
inline Camera read_camera(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open camera file: " + path);
    Camera cam;
    if (!(in >> cam.fx >> cam.fy >> cam.cx >> cam.cy)) throw IoError("camera file: malformed intrinsics line");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
            if (!(in >> cam.rotation(r, c))) throw IoError("camera file: malformed extrinsics");
        if (!(in >> cam.translation[r])) throw IoError("camera file: malformed extrinsics");
    }
    cam.validate();
    return cam;
}

inline void write_camera(const std::string& path, const Camera& cam) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open camera file for writing: " + path);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", cam.fx, cam.fy, cam.cx, cam.cy);
    out << buf;
    for (int r = 0; r < 3; ++r) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", cam.rotation(r, 0), cam.rotation(r, 1),
                      cam.rotation(r, 2), cam.translation[r]);
        out << buf;
    }
    if (!out) throw IoError("failed writing camera file: " + path);
}

}  // namespace ldif
