#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <functional>

#include "ldif/mesher.hpp"

using namespace ldif;

namespace {

LdifModel single_element_model(double c, const Vec3& radii, const Vec3& euler = Vec3::Zero(),
                               const Vec3& center = Vec3::Zero()) {
    LdifModel model;
    model.n_elements = 1;
    model.latent_dim = 1;
    model.decoder = DecoderWeights::zeros(2, 1);
    ElementParams e;
    e.scale_c = c;
    e.center_p = center;
    e.radii_r = radii;
    e.euler_e = euler;
    model.elements.push_back(e);
    model.latents.push_back(VecX::Zero(1));
    return model;
}

int connected_components(const TriMesh& mesh) {
    std::vector<int> parent(mesh.vertex_count());
    for (size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const auto& t : mesh.triangles) {
        parent[find(t[0])] = find(t[1]);
        parent[find(t[1])] = find(t[2]);
    }
    int components = 0;
    for (size_t i = 0; i < parent.size(); ++i)
        if (find(static_cast<int>(i)) == static_cast<int>(i)) ++components;
    return components;
}

}  // namespace

TEST_CASE("triangle table is consistent with the edge table") {
    for (int c = 0; c < 256; ++c) {
        uint16_t used = 0;
        for (int t = 0; mc::kTriTable[c][t] != -1; t += 3) {
            int e0 = mc::kTriTable[c][t], e1 = mc::kTriTable[c][t + 1], e2 = mc::kTriTable[c][t + 2];
            REQUIRE(e0 != e1);
            REQUIRE(e1 != e2);
            REQUIRE(e0 != e2);
            used |= (1 << e0) | (1 << e1) | (1 << e2);
        }
        REQUIRE(used == mc::kEdgeTable[c]);
    }
    // an edge crosses the level set iff its corners disagree on "inside"
    for (int c = 0; c < 256; ++c)
        for (int e = 0; e < 12; ++e) {
            bool a = c & (1 << mc::kEdgeCorners[e][0]);
            bool b = c & (1 << mc::kEdgeCorners[e][1]);
            REQUIRE(((mc::kEdgeTable[c] >> e) & 1) == (a != b ? 1 : 0));
        }
}

TEST_CASE("isotropic element extracts the analytic sphere") {
    LdifModel model = single_element_model(-1.0, Vec3::Constant(0.1));
    MeshingConfig cfg;
    cfg.resolution = 96;
    TriMesh mesh = extract_mesh(model, cfg);
    REQUIRE_FALSE(mesh.empty());
    CHECK(mesh.is_watertight());
    CHECK(mesh.euler_characteristic() == 2);  // genus 0
    CHECK(mesh.signed_volume() > 0);          // outward orientation
    double expected = 0.1 * std::sqrt(2.0 * std::log(1.0 / 0.07));
    double cell = 1.2 / (cfg.resolution - 1);
    for (const Vec3& v : mesh.vertices) REQUIRE(std::abs(v.norm() - expected) <= 1.5 * cell);
}

TEST_CASE("field below the isolevel everywhere yields an empty mesh") {
    LdifModel model = single_element_model(-0.01, Vec3::Constant(0.12));
    TriMesh mesh = extract_mesh(model, MeshingConfig{64, std::nullopt, -0.07});
    CHECK(mesh.empty());
}

TEST_CASE("anisotropic element extracts a 2:1:1 ellipsoid") {
    LdifModel model = single_element_model(-1.0, Vec3(0.1, 0.05, 0.05));
    MeshingConfig cfg;
    cfg.resolution = 96;
    TriMesh mesh = extract_mesh(model, cfg);
    REQUIRE_FALSE(mesh.empty());
    Box3 box = mesh.bounds();
    Vec3 half = 0.5 * box.sizes();
    CHECK(half.x() / half.y() == Catch::Approx(2.0).epsilon(0.05));
    CHECK(half.x() / half.z() == Catch::Approx(2.0).epsilon(0.05));
}

TEST_CASE("doubling resolution preserves sphere topology") {
    LdifModel model = single_element_model(-1.0, Vec3::Constant(0.1));
    for (int res : {48, 96}) {
        TriMesh mesh = extract_mesh(model, MeshingConfig{res, std::nullopt, -0.07});
        CHECK(mesh.is_watertight());
        CHECK(mesh.euler_characteristic() == 2);
        CHECK(connected_components(mesh) == 1);
    }
}

TEST_CASE("extracted vertices sit on the isolevel") {
    // two overlapping anisotropic elements make a non-trivial smooth field
    LdifModel model;
    model.n_elements = 2;
    model.latent_dim = 1;
    model.decoder = DecoderWeights::zeros(2, 1);
    ElementParams a;
    a.scale_c = -0.9;
    a.center_p = Vec3(-0.05, 0, 0);
    a.radii_r = Vec3(0.1, 0.06, 0.08);
    a.euler_e = Vec3(0.3, 0.2, -0.4);
    ElementParams b = a;
    b.center_p = Vec3(0.07, 0.02, -0.01);
    b.euler_e = Vec3(-0.2, 0.5, 0.1);
    model.elements = {a, b};
    model.latents = {VecX::Zero(1), VecX::Zero(1)};

    MeshingConfig cfg;
    cfg.resolution = 96;
    TriMesh mesh = extract_mesh(model, cfg);
    REQUIRE_FALSE(mesh.empty());
    CHECK(mesh.is_watertight());
    LdifEvaluator eval(model);
    double worst = 0;
    for (const Vec3& v : mesh.vertices) worst = std::max(worst, std::abs(eval(v) - cfg.isolevel));
    CHECK(worst <= 0.02);
}

TEST_CASE("field grid values match the evaluator") {
    LdifModel model = single_element_model(-1.0, Vec3(0.1, 0.07, 0.12), Vec3(0.2, -0.3, 0.1));
    MeshingConfig cfg;
    cfg.resolution = 16;
    FieldGrid grid = field_grid(model, cfg);
    LdifEvaluator eval(model);
    for (int ix = 0; ix < 16; ix += 3)
        for (int iy = 0; iy < 16; iy += 3)
            for (int iz = 0; iz < 16; iz += 3)
                REQUIRE(grid.at(ix, iy, iz) == eval(grid.node_position(ix, iy, iz)));
}

TEST_CASE("field dump round-trips") {
    LdifModel model = single_element_model(-1.0, Vec3::Constant(0.1));
    MeshingConfig cfg;
    cfg.resolution = 8;
    FieldGrid grid = field_grid(model, cfg);
    auto path = std::filesystem::temp_directory_path() / "ldif_field_dump.bin";
    save_field(path.string(), grid);

    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    int res;
    double bounds[6];
    REQUIRE(std::sscanf(header.c_str(), "FIELD %d %lf %lf %lf %lf %lf %lf", &res, &bounds[0], &bounds[1],
                        &bounds[2], &bounds[3], &bounds[4], &bounds[5]) == 7);
    REQUIRE(res == 8);
    std::vector<float> floats(8 * 8 * 8);
    REQUIRE(in.read(reinterpret_cast<char*>(floats.data()), floats.size() * 4).good());
    for (size_t i = 0; i < floats.size(); ++i)
        REQUIRE(floats[i] == static_cast<float>(grid.values[i]));
}

TEST_CASE("element ellipsoids") {
    SECTION("single isotropic element gives a sphere at the analytic radius") {
        LdifModel model = single_element_model(-1.0, Vec3::Constant(0.1));
        auto ellipsoids = element_ellipsoids(model);
        REQUIRE(ellipsoids.size() == 1);
        double expected = 0.1 * std::sqrt(2.0 * std::log(1.0 / 0.07));
        for (const Vec3& v : ellipsoids[0].mesh.vertices)
            REQUIRE(v.norm() == Catch::Approx(expected).epsilon(1e-12));
        CHECK(ellipsoids[0].mesh.signed_volume() > 0);
    }
    SECTION("weak elements are skipped") {
        LdifModel model = single_element_model(-0.05, Vec3::Constant(0.1));
        CHECK(element_ellipsoids(model).empty());
    }
    SECTION("symmetric elements export mirrored copies") {
        LdifModel model = single_element_model(-1.0, Vec3(0.1, 0.05, 0.08), Vec3(0.2, 0.3, -0.1),
                                               Vec3(0.2, 0.1, 0.0));
        model.sym_count = 1;
        auto ellipsoids = element_ellipsoids(model);
        REQUIRE(ellipsoids.size() == 2);
        CHECK_FALSE(ellipsoids[0].mirrored);
        CHECK(ellipsoids[1].mirrored);
        CHECK(ellipsoids[1].mesh.signed_volume() > 0);  // winding fixed after reflection
        // mirrored vertices are reflections of the originals
        for (size_t i = 0; i < ellipsoids[0].mesh.vertices.size(); ++i)
            REQUIRE(ellipsoids[1].mesh.vertices[i] == reflect(ellipsoids[0].mesh.vertices[i], 0));
    }
}
