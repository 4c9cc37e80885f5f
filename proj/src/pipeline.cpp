#include "xsplat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace xsplat {

using json = nlohmann::ordered_json;

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir / "images");
    std::vector<Camera> cams;
    cams.reserve(ds.views.size());
    char name[32];
    for (std::size_t i = 0; i < ds.views.size(); ++i) {
        cams.push_back(ds.views[i].camera);
        std::snprintf(name, sizeof(name), "%03zu.pfm", i);
        write_pfm(dir / "images" / name, ds.views[i]);
    }
    save_poses(dir / "poses.json", cams);
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("save_dataset: cannot open meta.json in " + dir.string());
    out << ds.meta.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    std::ifstream min(dir / "meta.json");
    if (!min) throw IoError("load_dataset: cannot open meta.json in " + dir.string());
    ds.meta = json::parse(min);
    const auto cams = load_poses(dir / "poses.json");
    char name[32];
    for (std::size_t i = 0; i < cams.size(); ++i) {
        std::snprintf(name, sizeof(name), "%03zu.pfm", i);
        ProjectionImage img = read_pfm(dir / "images" / name);
        img.camera = cams[i];
        if (img.width != cams[i].intr.width || img.height != cams[i].intr.height)
            throw IoError("load_dataset: image size disagrees with its pose record");
        ds.views.push_back(std::move(img));
    }
    return ds;
}

ProjectionImage crop_principal(const ProjectionImage& image, int size) {
    if (size < 1) throw InvalidSpec("crop_principal: size must be >= 1");
    const Intrinsics& K = image.camera.intr;
    const int x0 = int(std::lround(K.cx)) - size / 2;
    const int y0 = int(std::lround(K.cy)) - size / 2;
    if (x0 < 0 || y0 < 0 || x0 + size > image.width || y0 + size > image.height)
        throw CropOutOfBounds("crop_principal: window outside the image");

    Camera cam = image.camera;
    cam.intr.width = size;
    cam.intr.height = size;
    cam.intr.cx = K.cx - x0;  // size/2 plus the sub-pixel rounding residual
    cam.intr.cy = K.cy - y0;
    ProjectionImage out(size, size, cam);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at(x, y) = image.at(x + x0, y + y0);
    return out;
}

namespace {

constexpr int kHistBins = 4096;

struct Cdf {
    double lo = 0, bin_width = 1;
    std::vector<double> edges;  // size kHistBins + 1, nondecreasing in [0, 1]
};

Cdf build_cdf(const std::vector<double>& values, double lo, double hi) {
    Cdf cdf;
    cdf.lo = lo;
    cdf.bin_width = (hi - lo) / kHistBins;
    std::vector<double> counts(kHistBins, 0.0);
    for (double v : values) {
        int b = int((v - lo) / cdf.bin_width);
        b = std::clamp(b, 0, kHistBins - 1);
        counts[b] += 1.0;
    }
    cdf.edges.assign(kHistBins + 1, 0.0);
    double acc = 0.0;
    for (int i = 0; i < kHistBins; ++i) {
        acc += counts[i];
        cdf.edges[i + 1] = acc / double(values.size());
    }
    return cdf;
}

double cdf_forward(const Cdf& c, double v) {
    double t = (v - c.lo) / c.bin_width;
    t = std::clamp(t, 0.0, double(kHistBins));
    const int i = std::min(int(t), kHistBins - 1);
    const double frac = t - i;
    return c.edges[i] + frac * (c.edges[i + 1] - c.edges[i]);
}

double cdf_invert(const Cdf& c, double q) {
    // generalized inverse inf{x : cdf(x) >= q}; flat runs resolve to the
    // start of the segment that actually gains mass
    const auto it = std::lower_bound(c.edges.begin(), c.edges.end(), q);
    if (it == c.edges.begin()) return c.lo;
    const int j = std::clamp(int(it - c.edges.begin()) - 1, 0, kHistBins - 1);
    const double seg = c.edges[j + 1] - c.edges[j];
    const double frac = seg > 0.0 ? (q - c.edges[j]) / seg : 1.0;
    return c.lo + (j + std::clamp(frac, 0.0, 1.0)) * c.bin_width;
}

}  // namespace

ProjectionImage standardize_intensity(const ProjectionImage& image,
                                      const ProjectionImage& reference) {
    const auto [rmin, rmax] =
        std::minmax_element(reference.pixels.begin(), reference.pixels.end());
    if (!(*rmax > *rmin))
        throw InvalidReference("standardize_intensity: reference has fewer than 2 distinct values");
    const auto [imin, imax] = std::minmax_element(image.pixels.begin(), image.pixels.end());
    const double lo = std::min(*imin, *rmin);
    double hi = std::max(*imax, *rmax);
    if (hi <= lo) hi = lo + 1.0;

    const Cdf src = build_cdf(image.pixels, lo, hi);
    const Cdf ref = build_cdf(reference.pixels, lo, hi);

    ProjectionImage out = image;
    for (auto& v : out.pixels) v = cdf_invert(ref, cdf_forward(src, v));
    return out;
}

std::pair<Dataset, SimilarityTransform> normalize_scene_bounds(const Dataset& ds,
                                                               const BBox& bbox) {
    const Eigen::Vector3d extent = bbox.hi - bbox.lo;
    if (extent.minCoeff() <= 0.0)
        throw InvalidSpec("normalize_scene_bounds: bbox must have positive extent");
    SimilarityTransform t;
    t.scale = 0.5 * extent.maxCoeff();
    t.center = 0.5 * (bbox.lo + bbox.hi);

    Dataset out = ds;
    for (auto& view : out.views)
        view.camera.pose.origin = t.to_scene(view.camera.pose.origin);
    out.meta["scene_transform"] = {
        {"scale", t.scale}, {"center", {t.center.x(), t.center.y(), t.center.z()}}};
    out.meta["pose_units"] = "normalized";
    return {std::move(out), t};
}

SplitIndices split_dataset(int n_views, int n_train, int n_test, std::uint64_t seed) {
    if (n_train < 0 || n_test < 0 || n_train + n_test > n_views)
        throw InvalidSpec("split_dataset: split larger than the dataset");
    std::vector<int> idx(n_views);
    for (int i = 0; i < n_views; ++i) idx[i] = i;
    Rng rng(seed);
    for (int i = 0; i + 1 < n_views; ++i)
        std::swap(idx[i], idx[i + rng.uniform_int(n_views - i)]);
    SplitIndices s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.test.assign(idx.begin() + n_train, idx.begin() + n_train + n_test);
    return s;
}

SweepReport run_sweep(const std::vector<ProjectionImage>& train_views,
                      const std::vector<ProjectionImage>& test_views,
                      const SimilarityTransform& world_transform,
                      const SceneInit& init, const TrainConfig& cfg,
                      const LossWeights& weights, const std::vector<int>& counts) {
    for (int c : counts)
        if (c < 1 || c > int(train_views.size()))
            throw InvalidSpec("run_sweep: view count exceeds the dataset");
    if (test_views.empty()) throw InvalidSpec("run_sweep: empty test set");

    SweepReport rep;
    for (int c : counts) {
        SplatScene scene = init_random({}, init.n_kernels, init.density_range,
                                       init.scale_init, init.seed);
        scene.world_transform = world_transform;
        const std::vector<ProjectionImage> subset(train_views.begin(),
                                                  train_views.begin() + c);
        TrainResult tr = train(std::move(scene), subset, cfg, weights, &test_views);
        EvaluationReport er = evaluate(tr.scene, test_views, cfg.render);
        SweepPoint pt;
        pt.n_views = c;
        pt.psnr_mean = er.psnr_mean;
        pt.psnr_std = er.psnr_std;
        pt.ssim_mean = er.ssim_mean;
        pt.ssim_std = er.ssim_std;
        pt.n_kernels_final = int(tr.scene.kernels.size());
        rep.points.push_back(pt);
    }
    return rep;
}

void save_sweep_json(const std::filesystem::path& file, const SweepReport& r) {
    json j;
    json arr = json::array();
    for (const auto& p : r.points)
        arr.push_back({{"n_views", p.n_views},
                       {"psnr_mean", p.psnr_mean},
                       {"psnr_std", p.psnr_std},
                       {"ssim_mean", p.ssim_mean},
                       {"ssim_std", p.ssim_std},
                       {"n_kernels_final", p.n_kernels_final}});
    j["points"] = std::move(arr);
    std::ofstream out(file);
    if (!out) throw IoError("save_sweep_json: cannot open " + file.string());
    out << j.dump(2) << "\n";
}

void save_sweep_csv(const std::filesystem::path& file, const SweepReport& r) {
    std::ofstream out(file);
    if (!out) throw IoError("save_sweep_csv: cannot open " + file.string());
    out << "n_views,psnr_mean,psnr_std,ssim_mean,ssim_std,n_kernels_final\n";
    char buf[160];
    for (const auto& p : r.points) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%d\n", p.n_views,
                      p.psnr_mean, p.psnr_std, p.ssim_mean, p.ssim_std,
                      p.n_kernels_final);
        out << buf;
    }
}

TrainSetup parse_train_setup(const nlohmann::json& j) {
    TrainSetup s;
    TrainConfig& c = s.config;
    c.iterations = j.value("iterations", c.iterations);
    c.lr_position = j.value("lr_position", c.lr_position);
    c.position_lr_final = j.value("position_lr_final", c.position_lr_final);
    c.lr_scales = j.value("lr_scales", c.lr_scales);
    c.lr_rotation = j.value("lr_rotation", c.lr_rotation);
    c.lr_density = j.value("lr_density", c.lr_density);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.densify_grad_threshold = j.value("densify_grad_threshold", c.densify_grad_threshold);
    c.densify_interval = j.value("densify_interval", c.densify_interval);
    c.split_scale_threshold = j.value("split_scale_threshold", c.split_scale_threshold);
    c.prune_density_threshold = j.value("prune_density_threshold", c.prune_density_threshold);
    c.densify_start = j.value("densify_start", c.densify_start);
    c.densify_stop = j.value("densify_stop", c.densify_stop);
    c.max_kernels = j.value("max_kernels", c.max_kernels);
    if (j.contains("tv_grid_dims")) {
        const auto& d = j.at("tv_grid_dims");
        c.tv_grid_dims = Eigen::Vector3i(d.at(0), d.at(1), d.at(2));
    }
    c.tv_grid_spacing = j.value("tv_grid_spacing", c.tv_grid_spacing);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.seed = j.value("seed", c.seed);
    c.render.truncation_sigma = j.value("truncation_sigma", c.render.truncation_sigma);
    c.render.tile_px = j.value("tile_px", c.render.tile_px);

    s.weights.lambda_dssim = j.value("lambda_dssim", s.weights.lambda_dssim);
    s.weights.lambda_tv = j.value("lambda_tv", s.weights.lambda_tv);

    s.init.n_kernels = j.value("n_kernels", s.init.n_kernels);
    if (j.contains("density_range")) {
        s.init.density_range = {j.at("density_range").at(0).get<double>(),
                                j.at("density_range").at(1).get<double>()};
    }
    s.init.scale_init = j.value("scale_init", s.init.scale_init);
    s.init.seed = j.value("init_seed", c.seed);
    return s;
}

TrainSetup load_train_setup(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("load_train_setup: cannot open " + file.string());
    return parse_train_setup(nlohmann::json::parse(in));
}

}  // namespace xsplat
