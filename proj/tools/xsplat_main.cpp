// Command-line front end chaining the reconstruction pipeline:
// phantom -> drr -> (calibrate/preprocess) -> reconstruct -> voxelize ->
// slices, plus eval and the view-count sweep experiment.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "xsplat/drr.hpp"
#include "xsplat/parallel.hpp"
#include "xsplat/phantom.hpp"
#include "xsplat/pipeline.hpp"

using namespace xsplat;
using json = nlohmann::ordered_json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 0;
    std::string config;
    std::string out = ".";
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

TrainSetup setup_from(const CommonOpts& o) {
    TrainSetup s;
    if (!o.config.empty()) s = load_train_setup(o.config);
    return s;
}

SimilarityTransform transform_from_meta(const json& meta) {
    if (meta.contains("scene_transform")) {
        const auto& t = meta.at("scene_transform");
        SimilarityTransform out;
        out.scale = t.at("scale").get<double>();
        for (int i = 0; i < 3; ++i) out.center[i] = t.at("center").at(i).get<double>();
        return out;
    }
    if (meta.contains("volume_bbox")) {
        const auto& b = meta.at("volume_bbox");
        BBox box;
        for (int i = 0; i < 3; ++i) {
            box.lo[i] = b.at("lo").at(i).get<double>();
            box.hi[i] = b.at("hi").at(i).get<double>();
        }
        SimilarityTransform out;
        out.scale = 0.5 * (box.hi - box.lo).maxCoeff();
        out.center = 0.5 * (box.lo + box.hi);
        return out;
    }
    throw InvalidSpec(
        "dataset meta carries neither scene_transform nor volume_bbox; run "
        "preprocess with --normalize-bbox first");
}

// Datasets whose poses were re-expressed in normalized units are converted
// back to mm so that one camera convention reaches the projector.
void ensure_world_poses(Dataset& ds) {
    if (ds.meta.value("pose_units", "world_mm") != std::string("normalized")) return;
    const SimilarityTransform t = transform_from_meta(ds.meta);
    for (auto& v : ds.views) v.camera.pose.origin = t.to_world(v.camera.pose.origin);
    ds.meta["pose_units"] = "world_mm";
}

SplitIndices dataset_split(const Dataset& ds, int n_train, int n_holdout,
                           std::uint64_t seed) {
    const int n = int(ds.views.size());
    if (n_train <= 0) n_train = n - n_holdout;
    return split_dataset(n, n_train, n_holdout, seed);
}

std::vector<ProjectionImage> pick(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<ProjectionImage> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.views[i]);
    return out;
}

int run_phantom(const CommonOpts& o, const std::string& kind, int dims, double spacing) {
    PhantomSpec spec;
    spec.kind = phantom_kind_from_string(kind);
    spec.dims = Eigen::Vector3i::Constant(dims);
    spec.spacing_mm = Eigen::Vector3d::Constant(spacing);
    spec.seed = o.seed;
    Volume v = generate_phantom(spec);
    std::filesystem::create_directories(o.out);
    write_volume(std::filesystem::path(o.out) / "volume", v);
    std::printf("phantom: %s %d^3, spacing %.4g mm -> %s/volume.raw\n", kind.c_str(),
                dims, spacing, o.out.c_str());
    return 0;
}

int run_drr(const CommonOpts& o, const std::string& volume, const std::string& mode,
            int views, double radius, double fx, int size, double threshold,
            double step) {
    Volume v = read_volume(volume);
    TrajectorySpec traj;
    traj.mode = mode == "arbitrary" ? TrajectorySpec::Mode::arbitrary
                                    : TrajectorySpec::Mode::circular;
    traj.n_views = views;
    traj.radius_mm = radius;
    const Eigen::AlignedBox3d box = v.bounds();
    traj.center_mm = box.center();
    traj.intr = Intrinsics{fx, fx, size / 2.0, size / 2.0, size, size};
    traj.seed = o.seed;

    Dataset ds;
    const auto cams = generate_trajectory(traj);
    for (const auto& cam : cams) {
        ds.views.push_back(render_drr(v, cam, threshold, step));
        ds.views.back().camera = cam;
    }
    ds.meta["kind"] = "drr";
    ds.meta["pose_units"] = "world_mm";
    ds.meta["volume_bbox"] = {{"lo", {box.min().x(), box.min().y(), box.min().z()}},
                              {"hi", {box.max().x(), box.max().y(), box.max().z()}}};
    ds.meta["trajectory"] = {{"mode", mode},
                             {"n_views", views},
                             {"radius_mm", radius},
                             {"fx", fx},
                             {"image_size", size},
                             {"seed", o.seed}};
    ds.meta["drr"] = {{"threshold", threshold}, {"step_mm", step}};
    save_dataset(o.out, ds);
    std::printf("drr: %d %s views at %dpx -> %s\n", views, mode.c_str(), size,
                o.out.c_str());
    return 0;
}

int run_calibrate(const CommonOpts& o, const std::string& corr_file, int width,
                  int height, int iterations, double inlier_px) {
    FiducialCorrespondences corrs = load_correspondences(corr_file);
    RansacResult res = ransac_calibrate(corrs, iterations, inlier_px, o.seed);
    auto [K, pose] = decompose_projection(res.P, width, height);

    std::filesystem::create_directories(o.out);
    save_poses(std::filesystem::path(o.out) / "poses.json", {Camera{K, pose}});
    json rep;
    rep["rmse_px"] = res.rmse_px;
    rep["n_points"] = int(corrs.points3d.size());
    rep["inliers"] = res.inliers;
    json P = json::array();
    for (int r = 0; r < 3; ++r)
        P.push_back({res.P.P(r, 0), res.P.P(r, 1), res.P.P(r, 2), res.P.P(r, 3)});
    rep["P"] = std::move(P);
    std::ofstream out(std::filesystem::path(o.out) / "calibration.json");
    out << rep.dump(2) << "\n";
    std::printf("calibrate: %zu points, inlier RMSE %.6g px -> %s\n",
                corrs.points3d.size(), res.rmse_px, o.out.c_str());
    return 0;
}

int run_preprocess(const CommonOpts& o, const std::string& dataset, int crop,
                   const std::string& standardize, int reference,
                   std::vector<double> bbox, bool neglog, bool invert) {
    Dataset ds = load_dataset(dataset);
    ensure_world_poses(ds);
    json applied = json::array();

    if (crop > 0) {
        for (auto& v : ds.views) v = crop_principal(v, crop);
        applied.push_back({{"crop_principal", crop}});
    }
    if (neglog) {
        for (auto& v : ds.views) {
            const double peak = v.max_value();
            if (peak <= 0) continue;
            for (auto& p : v.pixels) p = -std::log(std::max(p, 1e-6 * peak) / peak);
        }
        applied.push_back("neglog");
    }
    if (invert) {
        for (auto& v : ds.views) {
            const double peak = v.max_value();
            for (auto& p : v.pixels) p = peak - p;
        }
        applied.push_back("invert");
    }
    if (standardize == "histmatch") {
        if (reference < 0 || reference >= int(ds.views.size()))
            throw InvalidSpec("preprocess: reference view out of range");
        const ProjectionImage ref = ds.views[reference];
        for (auto& v : ds.views) v = standardize_intensity(v, ref);
        applied.push_back({{"standardize", "histmatch"}, {"reference", reference}});
    } else if (standardize != "none") {
        throw InvalidSpec("preprocess: unknown standardization " + standardize);
    }
    if (!bbox.empty()) {
        if (bbox.size() != 6) throw InvalidSpec("preprocess: bbox needs 6 numbers");
        BBox box;
        box.lo = Eigen::Vector3d(bbox[0], bbox[1], bbox[2]);
        box.hi = Eigen::Vector3d(bbox[3], bbox[4], bbox[5]);
        auto [nds, t] = normalize_scene_bounds(ds, box);
        ds = std::move(nds);
        applied.push_back({{"normalize_scene_bounds",
                            {{"scale", t.scale},
                             {"center", {t.center.x(), t.center.y(), t.center.z()}}}}});
    }
    ds.meta["preprocessing"] = std::move(applied);
    save_dataset(o.out, ds);
    std::printf("preprocess: %zu views -> %s\n", ds.views.size(), o.out.c_str());
    return 0;
}

int run_reconstruct(const CommonOpts& o, const std::string& dataset, int n_train,
                    int n_holdout) {
    Dataset ds = load_dataset(dataset);
    const SimilarityTransform transform = transform_from_meta(ds.meta);
    ensure_world_poses(ds);

    TrainSetup setup = setup_from(o);
    if (o.seed) {
        setup.config.seed = o.seed;
        setup.init.seed = o.seed;
    }
    SplitIndices split = dataset_split(ds, n_train, n_holdout, setup.config.seed);
    const auto trainset = pick(ds, split.train);
    const auto holdout = pick(ds, split.test);

    SplatScene scene = init_random({}, setup.init.n_kernels, setup.init.density_range,
                                   setup.init.scale_init, setup.init.seed);
    scene.world_transform = transform;

    std::filesystem::create_directories(o.out);
    const std::filesystem::path out(o.out);
    auto sink = [&](int iter, const SplatScene& s) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_%06d.json", iter);
        save_scene(out / name, s);
    };

    try {
        TrainResult res = train(std::move(scene), trainset, setup.config,
                                setup.weights, holdout.empty() ? nullptr : &holdout,
                                sink);
        save_scene(out / "checkpoint.json", res.scene);
        write_history_csv(out / "history.csv", res.history);
        json sp;
        sp["train"] = split.train;
        sp["holdout"] = split.test;
        std::ofstream(out / "split.json") << sp.dump(2) << "\n";
        if (!holdout.empty()) {
            EvaluationReport rep = evaluate(res.scene, holdout, setup.config.render);
            save_report_json(out / "report.json", rep);
            save_report_csv(out / "report.csv", rep);
            std::printf("reconstruct: %zu kernels, holdout PSNR %.2f dB, SSIM %.4f\n",
                        res.scene.kernels.size(), rep.psnr_mean, rep.ssim_mean);
        } else {
            std::printf("reconstruct: %zu kernels (no holdout)\n",
                        res.scene.kernels.size());
        }
    } catch (const TrainingDiverged& e) {
        save_scene(out / "checkpoint_diverged.json", e.last_finite);
        std::fprintf(stderr, "error: %s (last finite state saved)\n", e.what());
        return 2;
    }
    return 0;
}

int run_voxelize(const CommonOpts& o, const std::string& scene_file, int dims,
                 double threshold_percentile) {
    SplatScene s = load_scene(scene_file);
    VoxelGrid grid;
    grid.dims = Eigen::Vector3i::Constant(dims);
    const double extent = 2.0 * s.world_transform.scale;
    grid.spacing_mm = Eigen::Vector3d::Constant(extent / dims);
    grid.origin_mm =
        s.world_transform.center - Eigen::Vector3d::Constant(0.5 * (extent - extent / dims));
    Volume v = voxelize(s, grid);
    if (threshold_percentile >= 0.0) v = threshold_and_crop(v, threshold_percentile);
    std::filesystem::create_directories(o.out);
    write_volume(std::filesystem::path(o.out) / "volume", v);
    std::printf("voxelize: %d^3 grid, spacing %.4g mm -> %s/volume.raw\n", dims,
                grid.spacing_mm.x(), o.out.c_str());
    return 0;
}

int run_eval(const CommonOpts& o, const std::string& scene_file,
             const std::string& dataset, const std::string& views, int n_holdout) {
    SplatScene s = load_scene(scene_file);
    Dataset ds = load_dataset(dataset);
    ensure_world_poses(ds);

    std::vector<int> idx;
    if (!views.empty()) {
        std::stringstream ss(views);
        std::string tok;
        while (std::getline(ss, tok, ',')) idx.push_back(std::stoi(tok));
    } else {
        idx = dataset_split(ds, -1, n_holdout, o.seed).test;
    }
    EvaluationReport rep = evaluate(s, pick(ds, idx), {});
    std::filesystem::create_directories(o.out);
    save_report_json(std::filesystem::path(o.out) / "report.json", rep);
    save_report_csv(std::filesystem::path(o.out) / "report.csv", rep);
    std::printf("eval: %d views, PSNR %.2f +/- %.2f dB, SSIM %.4f +/- %.4f\n",
                rep.n_views, rep.psnr_mean, rep.psnr_std, rep.ssim_mean, rep.ssim_std);
    return 0;
}

int run_slices(const CommonOpts& o, const std::string& volume, const std::string& axis,
               double window_lo, double window_hi) {
    Volume v = read_volume(volume);
    std::vector<SliceAxis> axes;
    if (axis == "all")
        axes = {SliceAxis::axial, SliceAxis::coronal, SliceAxis::sagittal};
    else
        axes = {slice_axis_from_string(axis)};
    for (SliceAxis a : axes)
        save_slices_png(o.out, a, export_slices(v, a, window_lo, window_hi));
    std::printf("slices: %s -> %s\n", axis.c_str(), o.out.c_str());
    return 0;
}

int run_sweep_cmd(const CommonOpts& o, const std::string& dataset,
                  const std::string& counts_str, int n_holdout) {
    Dataset ds = load_dataset(dataset);
    const SimilarityTransform transform = transform_from_meta(ds.meta);
    ensure_world_poses(ds);

    TrainSetup setup = setup_from(o);
    if (o.seed) {
        setup.config.seed = o.seed;
        setup.init.seed = o.seed;
    }
    std::vector<int> counts;
    {
        std::stringstream ss(counts_str);
        std::string tok;
        while (std::getline(ss, tok, ',')) counts.push_back(std::stoi(tok));
    }
    SplitIndices split = dataset_split(ds, -1, n_holdout, setup.config.seed);
    SweepReport rep = run_sweep(pick(ds, split.train), pick(ds, split.test), transform,
                                setup.init, setup.config, setup.weights, counts);
    std::filesystem::create_directories(o.out);
    save_sweep_json(std::filesystem::path(o.out) / "sweep.json", rep);
    save_sweep_csv(std::filesystem::path(o.out) / "sweep.csv", rep);
    for (const auto& p : rep.points)
        std::printf("sweep: %2d views -> PSNR %.2f dB, SSIM %.4f\n", p.n_views,
                    p.psnr_mean, p.ssim_mean);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse-view X-ray splatting reconstruction toolkit"};
    app.require_subcommand(1);

    CommonOpts o;

    auto* phantom = app.add_subcommand("phantom", "generate a voxel phantom");
    std::string ph_kind = "spine";
    int ph_dims = 64;
    double ph_spacing = 3.125;
    phantom->add_option("--kind", ph_kind, "spine | ellipsoids");
    phantom->add_option("--dims", ph_dims, "voxels per axis");
    phantom->add_option("--spacing", ph_spacing, "mm per voxel");
    add_common(phantom, o);

    auto* drr = app.add_subcommand("drr", "render a projection dataset from a volume");
    std::string drr_volume, drr_mode = "circular";
    int drr_views = 60, drr_size = 128;
    double drr_radius = 600, drr_fx = 150, drr_threshold = 0, drr_step = 0;
    drr->add_option("--volume", drr_volume, "volume file base (without .raw)")->required();
    drr->add_option("--mode", drr_mode, "circular | arbitrary");
    drr->add_option("--views", drr_views, "number of views");
    drr->add_option("--radius", drr_radius, "source distance from center, mm");
    drr->add_option("--fx", drr_fx, "focal length, px");
    drr->add_option("--size", drr_size, "image size, px");
    drr->add_option("--threshold", drr_threshold, "attenuation threshold t");
    drr->add_option("--step", drr_step, "integration step, mm (0 = half voxel)");
    add_common(drr, o);

    auto* calibrate = app.add_subcommand("calibrate", "projection matrix from fiducials");
    std::string cal_file;
    int cal_w = 0, cal_h = 0, cal_iters = 2000;
    double cal_thresh = 2.0;
    calibrate->add_option("--correspondences", cal_file, "correspondence JSON")->required();
    calibrate->add_option("--width", cal_w, "image width, px")->required();
    calibrate->add_option("--height", cal_h, "image height, px")->required();
    calibrate->add_option("--iterations", cal_iters, "RANSAC iterations");
    calibrate->add_option("--inlier-threshold", cal_thresh, "inlier threshold, px");
    add_common(calibrate, o);

    auto* preprocess = app.add_subcommand("preprocess", "crop / standardize / normalize");
    std::string pre_dataset, pre_standardize = "none";
    int pre_crop = 0, pre_reference = 0;
    std::vector<double> pre_bbox;
    bool pre_neglog = false, pre_invert = false;
    preprocess->add_option("--dataset", pre_dataset, "input dataset dir")->required();
    preprocess->add_option("--crop", pre_crop, "principal-point crop size, px");
    preprocess->add_option("--standardize", pre_standardize, "none | histmatch");
    preprocess->add_option("--reference", pre_reference, "histmatch reference view");
    preprocess->add_option("--normalize-bbox", pre_bbox,
                           "world bbox lo_x lo_y lo_z hi_x hi_y hi_z (mm)")
        ->expected(6);
    preprocess->add_flag("--neglog", pre_neglog, "apply -log(I / max)");
    preprocess->add_flag("--invert", pre_invert, "invert intensities");
    add_common(preprocess, o);

    auto* reconstruct = app.add_subcommand("reconstruct", "optimize a splat scene");
    std::string rec_dataset;
    int rec_train = -1, rec_holdout = 0;
    reconstruct->add_option("--dataset", rec_dataset, "dataset dir")->required();
    reconstruct->add_option("--train", rec_train, "training view count (-1 = rest)");
    reconstruct->add_option("--holdout", rec_holdout, "held-out view count");
    add_common(reconstruct, o);

    auto* voxelize_cmd = app.add_subcommand("voxelize", "scene -> density volume");
    std::string vox_scene;
    int vox_dims = 64;
    double vox_threshold = -1.0;
    voxelize_cmd->add_option("--scene", vox_scene, "scene checkpoint JSON")->required();
    voxelize_cmd->add_option("--dims", vox_dims, "voxels per axis");
    voxelize_cmd->add_option("--threshold-percentile", vox_threshold,
                             "discard values at or below this percentile");
    add_common(voxelize_cmd, o);

    auto* eval_cmd = app.add_subcommand("eval", "score a scene against held-out views");
    std::string eval_scene, eval_dataset, eval_views;
    int eval_holdout = 10;
    eval_cmd->add_option("--scene", eval_scene, "scene checkpoint JSON")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "dataset dir")->required();
    eval_cmd->add_option("--views", eval_views, "comma-separated view indices");
    eval_cmd->add_option("--holdout", eval_holdout, "held-out count when --views unset");
    add_common(eval_cmd, o);

    auto* slices = app.add_subcommand("slices", "export 16-bit PNG slice stacks");
    std::string sl_volume, sl_axis = "all";
    double sl_lo = 0.0, sl_hi = 0.0;
    slices->add_option("--volume", sl_volume, "volume file base")->required();
    slices->add_option("--axis", sl_axis, "axial | coronal | sagittal | all");
    slices->add_option("--window-lo", sl_lo, "window lower bound");
    slices->add_option("--window-hi", sl_hi, "window upper bound (0 = auto)");
    add_common(slices, o);

    auto* sweep = app.add_subcommand("sweep", "view-count sweep experiment");
    std::string sw_dataset, sw_counts = "5,10,20,50";
    int sw_holdout = 10;
    sweep->add_option("--dataset", sw_dataset, "dataset dir")->required();
    sweep->add_option("--counts", sw_counts, "comma-separated view counts");
    sweep->add_option("--holdout", sw_holdout, "held-out view count");
    add_common(sweep, o);

    CLI11_PARSE(app, argc, argv);
    set_num_threads(o.threads);

    try {
        if (*phantom) return run_phantom(o, ph_kind, ph_dims, ph_spacing);
        if (*drr)
            return run_drr(o, drr_volume, drr_mode, drr_views, drr_radius, drr_fx,
                           drr_size, drr_threshold, drr_step);
        if (*calibrate)
            return run_calibrate(o, cal_file, cal_w, cal_h, cal_iters, cal_thresh);
        if (*preprocess)
            return run_preprocess(o, pre_dataset, pre_crop, pre_standardize,
                                  pre_reference, pre_bbox, pre_neglog, pre_invert);
        if (*reconstruct) return run_reconstruct(o, rec_dataset, rec_train, rec_holdout);
        if (*voxelize_cmd) return run_voxelize(o, vox_scene, vox_dims, vox_threshold);
        if (*eval_cmd) return run_eval(o, eval_scene, eval_dataset, eval_views, eval_holdout);
        if (*slices) return run_slices(o, sl_volume, sl_axis, sl_lo, sl_hi);
        if (*sweep) return run_sweep_cmd(o, sw_dataset, sw_counts, sw_holdout);
    } catch (const TrainingDiverged& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
