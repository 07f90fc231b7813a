// Command-line front end: fit models to meshes, extract surfaces, compute
// reconstruction metrics, dump element ellipsoids, unproject depth images,
// and generate test fixtures.
//
// Exit codes: 0 success, 1 numerical failure (non-finite loss),
// 2 I/O or argument error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ldif/depth_png.hpp"
#include "ldif/ldif.hpp"

namespace {

std::string default_trace_path(const std::string& model_path) { return model_path + ".trace.csv"; }

bool ends_with_png(const std::string& path) {
    return path.size() >= 4 && path.substr(path.size() - 4) == ".png";
}

int run(int argc, char** argv) {
    CLI::App app{"Local deep implicit function shape toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = hardware count)")->capture_default_str();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a watertight mesh by gradient descent");
    std::string fit_mesh_path, fit_out_path, fit_trace_path;
    ldif::FitConfig fit_cfg;
    fit_cmd->add_option("--mesh", fit_mesh_path, "Input mesh (.obj/.ply), watertight")->required();
    fit_cmd->add_option("--out", fit_out_path, "Output model file")->required();
    fit_cmd->add_option("--trace", fit_trace_path, "Loss trace CSV (default: <out>.trace.csv)");
    fit_cmd->add_option("--elements", fit_cfg.n_elements, "Shape element count N")->capture_default_str();
    fit_cmd->add_option("--latent", fit_cfg.latent_dim, "Latent code length M")->capture_default_str();
    fit_cmd->add_option("--hidden", fit_cfg.hidden, "Decoder hidden width H")->capture_default_str();
    fit_cmd->add_option("--steps", fit_cfg.steps, "Optimization steps")->capture_default_str();
    fit_cmd->add_option("--lr", fit_cfg.lr, "Adam learning rate")->capture_default_str();
    fit_cmd->add_option("--beta1", fit_cfg.beta1, "Adam beta1")->capture_default_str();
    fit_cmd->add_option("--beta2", fit_cfg.beta2, "Adam beta2")->capture_default_str();
    fit_cmd->add_option("--seed", fit_cfg.seed, "Random seed")->capture_default_str();
    fit_cmd->add_option("--sym-count", fit_cfg.sym_count, "Symmetric element count (first elements)")
        ->capture_default_str();
    fit_cmd->add_option("--sym-axis", fit_cfg.sym_axis, "Reflection plane normal axis (0=x)")
        ->capture_default_str();
    fit_cmd->add_flag("--freeze-decoder", fit_cfg.freeze_decoder, "Keep decoder weights fixed (pure SIF fit)");
    fit_cmd->add_option("--near", fit_cfg.near_count, "Near-surface samples per step")->capture_default_str();
    fit_cmd->add_option("--uniform", fit_cfg.uniform_count, "Uniform samples per step")->capture_default_str();
    fit_cmd->add_option("--sigma", fit_cfg.near_sigma, "Near-surface jitter std")->capture_default_str();
    fit_cmd->add_option("--alpha", fit_cfg.loss.alpha, "Sigmoid sharpness")->capture_default_str();
    fit_cmd->add_option("--w-s", fit_cfg.loss.w_s, "Near-surface sample weight")->capture_default_str();
    fit_cmd->add_option("--w-u", fit_cfg.loss.w_u, "Uniform sample weight")->capture_default_str();
    fit_cmd->add_option("--w-p", fit_cfg.loss.w_p, "Point-sample loss weight")->capture_default_str();
    fit_cmd->add_option("--w-c", fit_cfg.loss.w_c, "Center loss weight")->capture_default_str();
    fit_cmd->add_option("--isolevel", fit_cfg.loss.isolevel, "Surface isolevel")->capture_default_str();

    // mesh
    auto* mesh_cmd = app.add_subcommand("mesh", "Extract a surface mesh from a model by marching cubes");
    std::string mesh_model_path, mesh_out_path, mesh_field_path;
    ldif::MeshingConfig mesh_cfg;
    mesh_cmd->add_option("--model", mesh_model_path, "Input model file")->required();
    mesh_cmd->add_option("--out", mesh_out_path, "Output mesh (.obj/.ply)")->required();
    mesh_cmd->add_option("--resolution", mesh_cfg.resolution, "Grid nodes per axis")->capture_default_str();
    mesh_cmd->add_option("--isolevel", mesh_cfg.isolevel, "Extraction isolevel")->capture_default_str();
    mesh_cmd->add_option("--field", mesh_field_path, "Also dump the raw field grid to this path");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "Compare a reconstruction against a ground-truth mesh");
    std::string metrics_pred_path, metrics_gt_path, metrics_csv_path;
    ldif::MetricsConfig metrics_cfg;
    metrics_cmd->add_option("--pred", metrics_pred_path, "Predicted mesh")->required();
    metrics_cmd->add_option("--gt", metrics_gt_path, "Ground-truth mesh")->required();
    metrics_cmd->add_option("--tau", metrics_cfg.tau, "F-Score distance threshold")->capture_default_str();
    metrics_cmd->add_option("--samples", metrics_cfg.samples, "Sample count per metric")->capture_default_str();
    metrics_cmd->add_option("--seed", metrics_cfg.seed, "Random seed")->capture_default_str();
    metrics_cmd->add_option("--csv", metrics_csv_path, "Also write the report as a single CSV line");

    // elements
    auto* elements_cmd = app.add_subcommand("elements", "Export per-element support ellipsoids");
    std::string elements_model_path, elements_out_path;
    double elements_isolevel = -0.07;
    elements_cmd->add_option("--model", elements_model_path, "Input model file")->required();
    elements_cmd->add_option("--out", elements_out_path, "Output mesh (.obj/.ply)")->required();
    elements_cmd->add_option("--isolevel", elements_isolevel, "Level set of each isolated Gaussian")
        ->capture_default_str();

    // unproject
    auto* unproject_cmd =
        app.add_subcommand("unproject", "Depth image -> oriented point cloud (XYZ + normals + sampling)");
    std::string up_depth_path, up_camera_path, up_out_path;
    size_t up_count = 10000;
    uint64_t up_seed = 7;
    double up_scale = 1000.0;
    unproject_cmd->add_option("--depth", up_depth_path, "Depth image (16-bit .png or .dpth raw floats)")
        ->required();
    unproject_cmd->add_option("--camera", up_camera_path, "Camera file: 'fx fy cx cy' + 3x4 extrinsics")
        ->required();
    unproject_cmd->add_option("--out", up_out_path, "Output point cloud (.ply/.obj)")->required();
    unproject_cmd->add_option("--count", up_count, "Points to gather")->capture_default_str();
    unproject_cmd->add_option("--seed", up_seed, "Random seed")->capture_default_str();
    unproject_cmd->add_option("--depth-scale", up_scale, "PNG integer units per world unit")
        ->capture_default_str();

    // fixtures
    auto* fixtures_cmd = app.add_subcommand("fixtures", "Generate analytic watertight test shapes");
    std::string fx_kind = "icosphere", fx_out_path;
    int fx_subdiv = 3;
    double fx_radius = 1.0, fx_major = 0.35, fx_minor = 0.15, fx_size = 1.0;
    fixtures_cmd->add_option("--kind", fx_kind, "icosphere|box|torus|chair")->capture_default_str();
    fixtures_cmd->add_option("--out", fx_out_path, "Output mesh (.obj/.ply)")->required();
    fixtures_cmd->add_option("--subdiv", fx_subdiv, "Icosphere subdivisions")->capture_default_str();
    fixtures_cmd->add_option("--radius", fx_radius, "Icosphere radius")->capture_default_str();
    fixtures_cmd->add_option("--major", fx_major, "Torus ring radius")->capture_default_str();
    fixtures_cmd->add_option("--minor", fx_minor, "Torus tube radius")->capture_default_str();
    fixtures_cmd->add_option("--size", fx_size, "Box edge length")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
            e.get_name() == "CallForVersion") {
            app.exit(e);
            return 0;
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    ldif::set_num_threads(threads);

    if (*fit_cmd) {
        ldif::TriMesh mesh = ldif::read_mesh(fit_mesh_path);
        ldif::FitResult result = ldif::fit(mesh, fit_cfg);
        ldif::save_model(fit_out_path, result.model);
        std::string trace_path = fit_trace_path.empty() ? default_trace_path(fit_out_path) : fit_trace_path;
        ldif::save_trace(trace_path, result.trace);
        if (!result.trace.empty())
            std::printf("fit: %d steps, final loss %.6g (l_p %.6g, l_c %.6g)\n", fit_cfg.steps,
                        result.trace.back().total, result.trace.back().l_p, result.trace.back().l_c);
        std::printf("fit: model -> %s, trace -> %s\n", fit_out_path.c_str(), trace_path.c_str());
        return 0;
    }
    if (*mesh_cmd) {
        ldif::LdifModel model = ldif::load_model(mesh_model_path);
        ldif::FieldGrid grid = ldif::field_grid(model, mesh_cfg);
        if (!mesh_field_path.empty()) ldif::save_field(mesh_field_path, grid);
        ldif::TriMesh mesh = ldif::marching_cubes(grid, mesh_cfg.isolevel);
        if (mesh.empty())
            std::fprintf(stderr, "warning: field never crosses isolevel %g, writing an empty mesh\n",
                         mesh_cfg.isolevel);
        ldif::write_mesh(mesh_out_path, mesh);
        std::printf("mesh: %zu vertices, %zu triangles -> %s\n", mesh.vertex_count(), mesh.triangle_count(),
                    mesh_out_path.c_str());
        return 0;
    }
    if (*metrics_cmd) {
        ldif::TriMesh pred = ldif::read_mesh(metrics_pred_path);
        ldif::TriMesh gt = ldif::read_mesh(metrics_gt_path);
        if (!gt.is_watertight() || !pred.is_watertight())
            std::fprintf(stderr, "warning: non-watertight input, IoU disabled\n");
        ldif::MetricsReport report = ldif::evaluate(pred, gt, metrics_cfg);
        std::printf("%s\n", ldif::report_pretty(report).c_str());
        if (!metrics_csv_path.empty()) {
            std::ofstream csv(metrics_csv_path);
            if (!csv) throw ldif::IoError("cannot open metrics CSV for writing: " + metrics_csv_path);
            csv << "iou,chamfer,fscore,tau,samples\n" << ldif::report_csv(report) << "\n";
        }
        return 0;
    }
    if (*elements_cmd) {
        ldif::LdifModel model = ldif::load_model(elements_model_path);
        auto ellipsoids = ldif::element_ellipsoids(model, elements_isolevel);
        ldif::TriMesh combined;
        ldif::MeshAttributes attr;
        for (const auto& ell : ellipsoids) {
            int base = static_cast<int>(combined.vertices.size());
            combined.vertices.insert(combined.vertices.end(), ell.mesh.vertices.begin(), ell.mesh.vertices.end());
            attr.vertex_tags.insert(attr.vertex_tags.end(), ell.mesh.vertices.size(), ell.element);
            for (const auto& t : ell.mesh.triangles)
                combined.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
        }
        if (combined.empty())
            std::fprintf(stderr, "warning: no element reaches isolevel %g, writing an empty mesh\n",
                         elements_isolevel);
        ldif::write_mesh(elements_out_path, combined, attr);
        std::printf("elements: %zu ellipsoids -> %s\n", ellipsoids.size(), elements_out_path.c_str());
        return 0;
    }
    if (*unproject_cmd) {
        ldif::DepthImage depth = ends_with_png(up_depth_path) ? ldif::read_depth_png(up_depth_path, up_scale)
                                                              : ldif::read_dpth(up_depth_path);
        ldif::Camera cam = ldif::read_camera(up_camera_path);
        cam.width = depth.width;
        cam.height = depth.height;
        ldif::XyzImage xyz = ldif::unproject(depth, cam);
        ldif::NormalImage normals = ldif::estimate_normals(xyz);
        ldif::OrientedPointCloud cloud = ldif::gather_global(xyz, normals, up_count, ldif::Rng(up_seed));
        ldif::TriMesh points;
        points.vertices = cloud.points;
        ldif::MeshAttributes attr;
        attr.normals = cloud.normals;
        ldif::write_mesh(up_out_path, points, attr);
        std::printf("unproject: %zu points -> %s\n", cloud.size(), up_out_path.c_str());
        return 0;
    }
    if (*fixtures_cmd) {
        ldif::TriMesh mesh;
        if (fx_kind == "icosphere")
            mesh = ldif::make_icosphere(fx_subdiv, fx_radius);
        else if (fx_kind == "box")
            mesh = ldif::make_box(ldif::Vec3::Constant(-0.5 * fx_size), ldif::Vec3::Constant(0.5 * fx_size));
        else if (fx_kind == "torus")
            mesh = ldif::make_torus(fx_major, fx_minor);
        else if (fx_kind == "chair")
            mesh = ldif::make_chair();
        else
            throw ldif::IoError("unknown fixture kind: " + fx_kind);
        ldif::write_mesh(fx_out_path, mesh);
        std::printf("fixtures: %s (%zu triangles) -> %s\n", fx_kind.c_str(), mesh.triangle_count(),
                    fx_out_path.c_str());
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ldif::DivergedError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
