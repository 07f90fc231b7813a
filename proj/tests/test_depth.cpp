#include <catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "ldif/depth.hpp"
#include "ldif/depth_png.hpp"

using namespace ldif;

namespace {

Camera test_camera(int w, int h) {
    Camera cam;
    cam.fx = 320.0;
    cam.fy = 300.0;
    cam.cx = w / 2;  // integer principal point so a pixel sits on the axis
    cam.cy = h / 2;
    cam.width = w;
    cam.height = h;
    return cam;
}

Camera random_camera(Rng& rng) {
    Camera cam = test_camera(64, 48);
    // random rotation from a normalized quaternion
    double q[4];
    for (double& v : q) v = rng.normal();
    double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    for (double& v : q) v /= norm;
    double w = q[0], x = q[1], y = q[2], z = q[3];
    cam.rotation << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    cam.translation = rng.normal3();
    return cam;
}

// Depth of a fronto-parallel plane at distance z.
DepthImage plane_depth(int w, int h, double z) {
    DepthImage img;
    img.width = w;
    img.height = h;
    img.data.assign(static_cast<size_t>(w) * h, z);
    return img;
}

// Analytic perspective depth render of a sphere.
DepthImage sphere_depth(const Camera& cam, const Vec3& center, double radius) {
    DepthImage img;
    img.width = cam.width;
    img.height = cam.height;
    img.data.assign(static_cast<size_t>(cam.width) * cam.height, 0.0);
    for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u) {
            Vec3 dir((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
            // camera at origin looking +z (identity extrinsics)
            double a = dir.squaredNorm();
            double b = -2.0 * dir.dot(center);
            double c = center.squaredNorm() - radius * radius;
            double disc = b * b - 4 * a * c;
            if (disc <= 0) continue;
            double t = (-b - std::sqrt(disc)) / (2 * a);
            if (t <= 0) continue;
            img.at(u, v) = t * dir.z();
        }
    return img;
}

}  // namespace

TEST_CASE("principal-point pixel unprojects onto the optical axis") {
    Camera cam = test_camera(64, 48);
    DepthImage depth = plane_depth(64, 48, 1.0);
    XyzImage xyz = unproject(depth, cam);
    Vec3 p = xyz.at(static_cast<int>(cam.cx), static_cast<int>(cam.cy));
    CHECK(p.x() == Catch::Approx(0.0).margin(1e-12));
    CHECK(p.y() == Catch::Approx(0.0).margin(1e-12));
    CHECK(p.z() == Catch::Approx(1.0).margin(1e-12));
    CHECK((p - cam.center()).norm() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("project/unproject round trip on random cameras") {
    Rng rng(2024);
    for (int trial = 0; trial < 5; ++trial) {
        Camera cam = random_camera(rng);
        DepthImage depth;
        depth.width = cam.width;
        depth.height = cam.height;
        depth.data.resize(static_cast<size_t>(cam.width) * cam.height);
        for (double& d : depth.data) d = rng.uniform(0.5, 5.0);
        XyzImage xyz = unproject(depth, cam);
        for (int i = 0; i < 200; ++i) {
            int u = static_cast<int>(rng.below(cam.width));
            int v = static_cast<int>(rng.below(cam.height));
            Vec3 uvd = project(xyz.at(u, v), cam);
            REQUIRE(uvd.x() == Catch::Approx(u).margin(1e-6));
            REQUIRE(uvd.y() == Catch::Approx(v).margin(1e-6));
            REQUIRE(uvd.z() == Catch::Approx(depth.at(u, v)).margin(1e-6));
        }
    }
}

TEST_CASE("invalid pixels stay invalid") {
    Camera cam = test_camera(8, 8);
    DepthImage depth = plane_depth(8, 8, 2.0);
    depth.at(3, 4) = 0.0;
    depth.at(5, 2) = std::numeric_limits<double>::quiet_NaN();
    XyzImage xyz = unproject(depth, cam);
    CHECK_FALSE(xyz.is_valid(3, 4));
    CHECK_FALSE(xyz.is_valid(5, 2));
    CHECK(xyz.is_valid(0, 0));
}

TEST_CASE("fronto-parallel plane normals equal the plane normal") {
    Camera cam = test_camera(64, 48);
    DepthImage depth = plane_depth(64, 48, 2.0);
    XyzImage xyz = unproject(depth, cam);
    NormalImage normals = estimate_normals(xyz);
    int count = 0;
    for (int v = 0; v < 48; ++v)
        for (int u = 0; u < 64; ++u) {
            if (!normals.is_valid(u, v)) continue;
            ++count;
            // toward the camera at the origin: -z
            REQUIRE((normals.at(u, v) - Vec3(0, 0, -1)).norm() < 1e-6);
        }
    REQUIRE(count == 62 * 46);  // interior pixels only
}

TEST_CASE("sphere render normals match the analytic sphere away from the silhouette") {
    Camera cam = test_camera(128, 128);
    Vec3 center(0, 0, 4.0);
    DepthImage depth = sphere_depth(cam, center, 1.0);
    XyzImage xyz = unproject(depth, cam);
    NormalImage normals = estimate_normals(xyz);
    int checked = 0;
    for (int v = 0; v < 128; ++v)
        for (int u = 0; u < 128; ++u) {
            if (!normals.is_valid(u, v)) continue;
            Vec3 p = xyz.at(u, v);
            Vec3 analytic = (p - center).normalized();  // outward = toward camera on the visible side
            double toward = analytic.dot((xyz.camera_center - p).normalized());
            if (toward < 0.35) continue;  // silhouette band
            ++checked;
            double angle = std::acos(std::clamp(normals.at(u, v).dot(analytic), -1.0, 1.0)) * 180.0 / M_PI;
            REQUIRE(angle < 2.0);
        }
    REQUIRE(checked > 2000);
}

TEST_CASE("single valid pixel yields no normals") {
    Camera cam = test_camera(8, 8);
    DepthImage depth;
    depth.width = depth.height = 8;
    depth.data.assign(64, 0.0);
    depth.at(4, 4) = 1.0;
    XyzImage xyz = unproject(depth, cam);
    NormalImage normals = estimate_normals(xyz);
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) REQUIRE_FALSE(normals.is_valid(u, v));
    CHECK_THROWS_AS(gather_global(xyz, normals, 100, Rng(1)), IoError);
}

TEST_CASE("gather_global sampling rules") {
    Camera cam = test_camera(160, 130);  // 158*128 = 20224 valid interior pixels
    DepthImage depth = plane_depth(160, 130, 1.5);
    XyzImage xyz = unproject(depth, cam);
    NormalImage normals = estimate_normals(xyz);

    SECTION("enough valid pixels: distinct picks, no repeats") {
        OrientedPointCloud cloud = gather_global(xyz, normals, 10000, Rng(5));
        REQUIRE(cloud.size() == 10000);
        std::set<std::array<double, 3>> distinct;
        for (const Vec3& p : cloud.points) distinct.insert({p.x(), p.y(), p.z()});
        REQUIRE(distinct.size() == 10000);
    }
    SECTION("too few valid pixels: repeats fill the quota, all valid") {
        Camera small_cam = test_camera(60, 60);  // 58*58 = 3364 valid
        DepthImage small_depth = plane_depth(60, 60, 1.5);
        XyzImage small_xyz = unproject(small_depth, small_cam);
        NormalImage small_normals = estimate_normals(small_xyz);
        OrientedPointCloud cloud = gather_global(small_xyz, small_normals, 10000, Rng(5));
        REQUIRE(cloud.size() == 10000);
        std::set<std::array<double, 3>> distinct;
        for (const Vec3& p : cloud.points) distinct.insert({p.x(), p.y(), p.z()});
        CHECK(distinct.size() == 3364);  // every valid pixel used, rest are repeats
    }
    SECTION("deterministic per seed") {
        OrientedPointCloud a = gather_global(xyz, normals, 500, Rng(9));
        OrientedPointCloud b = gather_global(xyz, normals, 500, Rng(9));
        for (size_t i = 0; i < a.size(); ++i) REQUIRE(a.points[i] == b.points[i]);
    }
}

TEST_CASE("extract_local radius rules") {
    ElementParams params;
    params.scale_c = -1;
    params.center_p = Vec3::Zero();
    params.radii_r = Vec3::Constant(0.1);
    params.euler_e = Vec3::Zero();

    SECTION("points at local distance 1: exactly count within the initial radius") {
        OrientedPointCloud cloud;
        Rng rng(3);
        for (int i = 0; i < 2000; ++i) {
            cloud.points.push_back(0.1 * rng.unit_vector());  // local norm 1
            cloud.normals.push_back(Vec3(0, 0, 1));
        }
        OrientedPointCloud local = extract_local(cloud, params, 1000, Rng(4));
        REQUIRE(local.size() == 1000);
        ElementTransform t = element_transform(params);
        for (const Vec3& p : local.points) REQUIRE(t.apply(p).norm() <= 4.0);
    }
    SECTION("points at local distance 10 trigger expansion") {
        OrientedPointCloud cloud;
        Rng rng(5);
        for (int i = 0; i < 1500; ++i) {
            cloud.points.push_back(1.0 * rng.unit_vector());  // local norm 10
            cloud.normals.push_back(Vec3(0, 0, 1));
        }
        OrientedPointCloud local = extract_local(cloud, params, 1000, Rng(6));
        REQUIRE(local.size() == 1000);
        // expansion: 4.0 * 1.5^k >= 10 at k = 3
        ElementTransform t = element_transform(params);
        for (const Vec3& p : local.points) REQUIRE(t.apply(p).norm() <= 4.0 * 1.5 * 1.5 * 1.5);
    }
    SECTION("output is a subset of the input cloud") {
        OrientedPointCloud cloud;
        Rng rng(7);
        for (int i = 0; i < 300; ++i) cloud.points.push_back(rng.normal3());
        cloud.normals.assign(300, Vec3(1, 0, 0));
        OrientedPointCloud local = extract_local(cloud, params, 1000, Rng(8));
        REQUIRE(local.size() == 300);  // fewer points than requested: all returned
        std::set<std::array<double, 3>> have;
        for (const Vec3& p : cloud.points) have.insert({p.x(), p.y(), p.z()});
        for (const Vec3& p : local.points) REQUIRE(have.count({p.x(), p.y(), p.z()}) == 1);
    }
    SECTION("empty cloud is rejected") {
        OrientedPointCloud empty;
        CHECK_THROWS_AS(extract_local(empty, params, 10, Rng(1)), IoError);
    }
}

TEST_CASE("dpth raw format round trip") {
    DepthImage img;
    img.width = 7;
    img.height = 5;
    Rng rng(19);
    img.data.resize(35);
    for (double& d : img.data) d = rng.uniform(0.1, 3.0);
    auto path = std::filesystem::temp_directory_path() / "ldif_depth.dpth";
    write_dpth(path.string(), img);
    DepthImage back = read_dpth(path.string());
    REQUIRE(back.width == 7);
    REQUIRE(back.height == 5);
    for (size_t i = 0; i < img.data.size(); ++i)
        REQUIRE(back.data[i] == Catch::Approx(img.data[i]).epsilon(1e-7));  // float32 storage
    CHECK_THROWS_AS(read_dpth("/nonexistent.dpth"), IoError);
}

TEST_CASE("16-bit png depth round trip") {
    DepthImage img;
    img.width = 9;
    img.height = 6;
    img.data.assign(54, 0.0);
    Rng rng(23);
    for (size_t i = 0; i < img.data.size(); ++i)
        if (i % 5 != 0) img.data[i] = rng.uniform(0.05, 6.0);
    auto path = std::filesystem::temp_directory_path() / "ldif_depth.png";
    write_depth_png(path.string(), img, 1000.0);
    DepthImage back = read_depth_png(path.string(), 1000.0);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.data.size(); ++i)
        REQUIRE(back.data[i] == Catch::Approx(img.data[i]).margin(0.5001 / 1000.0));  // quantized to 1 mm
    CHECK_THROWS_AS(read_depth_png("/nonexistent.png"), IoError);
}

TEST_CASE("camera file round trip and validation") {
    Rng rng(29);
    Camera cam = random_camera(rng);
    auto path = std::filesystem::temp_directory_path() / "ldif_camera.txt";
    write_camera(path.string(), cam);
    Camera back = read_camera(path.string());
    CHECK(back.fx == cam.fx);
    CHECK(back.cy == cam.cy);
    CHECK((back.rotation - cam.rotation).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.translation == cam.translation);

    Camera bad = cam;
    bad.rotation(0, 0) = 5.0;
    CHECK_THROWS_AS(bad.validate(), IoError);
    Camera bad_focal = cam;
    bad_focal.fx = -1;
    CHECK_THROWS_AS(bad_focal.validate(), IoError);
}
