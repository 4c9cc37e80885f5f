#include <doctest.h>

#include <fstream>

#include "test_util.hpp"
#include "xsplat/optimizer.hpp"

using namespace xsplat;
using testutil::frontal_camera;
using testutil::random_kernel;

TEST_SUITE("optimizer") {

TEST_CASE("densify_and_prune applies the three rules") {
    Rng krng(139);
    SplatScene s;
    GaussianKernel low = random_kernel(krng);
    low.raw_density = softplus_inverse(1e-5);  // below the prune threshold
    GaussianKernel small;
    small.position = Eigen::Vector3d(0.1, 0.2, 0.3);
    small.log_scales.setConstant(std::log(0.01));
    small.raw_density = softplus_inverse(0.1);
    GaussianKernel large;
    large.position = Eigen::Vector3d(-0.2, 0.0, 0.1);
    large.log_scales.setConstant(std::log(0.08));
    large.raw_density = softplus_inverse(0.1);
    GaussianKernel calm = small;
    calm.position = Eigen::Vector3d(0.5, 0.5, 0.5);
    s.kernels = {low, small, large, calm};

    GradStats stats;
    stats.grad_norm_sum = {10.0, 10.0, 10.0, 0.0};  // calm kernel below threshold
    stats.observations = {10, 10, 10, 10};

    TrainConfig cfg;
    cfg.densify_grad_threshold = 0.5;
    cfg.split_scale_threshold = 0.02;
    cfg.prune_density_threshold = 5e-4;

    Rng rng(149);
    DensifyResult res = densify_and_prune(s, stats, cfg, rng);
    CHECK(res.n_pruned == 1);
    CHECK(res.n_cloned == 1);
    CHECK(res.n_split == 1);
    REQUIRE(res.scene.kernels.size() == 5);  // 2 clone + 2 split + 1 kept

    // clone: two kernels at the small kernel's position, scales unchanged
    CHECK(res.scene.kernels[0].position == small.position);
    CHECK(res.scene.kernels[1].position == small.position);
    CHECK(res.scene.kernels[0].log_scales == small.log_scales);
    CHECK(res.fresh[0] == 0);
    CHECK(res.fresh[1] == 1);
    CHECK(res.source[1] == 1);

    // split: scales divided by 1.6, positions near the parent
    for (int i = 2; i <= 3; ++i) {
        CHECK(res.scene.kernels[i].log_scales ==
              (large.log_scales.array() - std::log(1.6)).matrix());
        CHECK((res.scene.kernels[i].position - large.position).norm() < 5 * 0.08);
        CHECK(res.fresh[i] == 1);
        CHECK(res.source[i] == 2);
    }

    // kept kernel rides along untouched
    CHECK(res.scene.kernels[4].position == calm.position);
    CHECK(res.fresh[4] == 0);
}

TEST_CASE("densified kernels stay near the scene bbox") {
    Rng krng(151);
    SplatScene s;
    for (int i = 0; i < 50; ++i) {
        GaussianKernel k = random_kernel(krng, 0.99, 0.05, 0.3);
        s.kernels.push_back(k);
    }
    GradStats stats;
    stats.grad_norm_sum.assign(50, 10.0);
    stats.observations.assign(50, 1);
    TrainConfig cfg;
    cfg.densify_grad_threshold = 0.1;
    cfg.split_scale_threshold = 0.01;  // force splits
    Rng rng(157);
    DensifyResult res = densify_and_prune(s, stats, cfg, rng);
    for (std::size_t j = 0; j < res.scene.kernels.size(); ++j) {
        const auto& k = res.scene.kernels[j];
        const Eigen::Matrix3d cov = kernel_covariance(s.kernels[res.source[j]]);
        for (int a = 0; a < 3; ++a) {
            const double sd = std::sqrt(cov(a, a));
            CHECK(k.position[a] >= s.bbox.lo[a] - sd - 1e-12);
            CHECK(k.position[a] <= s.bbox.hi[a] + sd + 1e-12);
            CHECK(std::isfinite(k.position[a]));
        }
    }
}

namespace {

struct TinyProblem {
    SplatScene target_scene;
    SplatScene init_scene;
    std::vector<ProjectionImage> views;
};

TinyProblem make_tiny_problem(int n_views) {
    TinyProblem tp;
    Rng rng(163);
    for (int i = 0; i < 25; ++i)
        tp.target_scene.kernels.push_back(random_kernel(rng, 0.4, 0.05, 0.12, 0.2, 0.6));
    for (int v = 0; v < n_views; ++v) {
        Camera cam = frontal_camera(4.0, 250.0, 48);
        const double th = 2.0 * M_PI * v / n_views;
        cam.pose.origin = 4.0 * Eigen::Vector3d(std::sin(th), 0.0, -std::cos(th));
        Eigen::Vector3d z = -cam.pose.origin.normalized();
        Eigen::Vector3d x = Eigen::Vector3d::UnitY().cross(z).normalized();
        Eigen::Vector3d y = z.cross(x);
        cam.pose.R.row(0) = x;
        cam.pose.R.row(1) = y;
        cam.pose.R.row(2) = z;
        ProjectionImage img = render(tp.target_scene, cam, {});
        img.camera = cam;
        tp.views.push_back(std::move(img));
    }
    tp.init_scene = init_random({}, 60, {0.01, 0.05}, 0.08, 5);
    return tp;
}

}  // namespace

TEST_CASE("train rejects empty inputs") {
    TinyProblem tp = make_tiny_problem(2);
    TrainConfig cfg;
    cfg.iterations = 5;
    CHECK_THROWS_AS(train(tp.init_scene, {}, cfg, {}), InvalidSpec);
    SplatScene empty;
    CHECK_THROWS_AS(train(empty, tp.views, cfg, {}), InvalidSpec);
}

TEST_CASE("train is deterministic for a fixed seed") {
    TinyProblem tp = make_tiny_problem(3);
    TrainConfig cfg;
    cfg.iterations = 60;
    cfg.densify_start = 20;
    cfg.densify_interval = 20;
    cfg.densify_stop = 60;
    cfg.densify_grad_threshold = 1e-9;  // force densification traffic
    cfg.eval_interval = 30;
    cfg.seed = 7;

    LossWeights w;
    TrainResult a = train(tp.init_scene, tp.views, cfg, w, &tp.views);
    TrainResult b = train(tp.init_scene, tp.views, cfg, w, &tp.views);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].loss_total == b.history[i].loss_total);
        CHECK(a.history[i].n_kernels == b.history[i].n_kernels);
        CHECK(a.history[i].psnr_holdout.has_value() ==
              b.history[i].psnr_holdout.has_value());
        if (a.history[i].psnr_holdout)
            CHECK(*a.history[i].psnr_holdout == *b.history[i].psnr_holdout);
    }
    REQUIRE(a.scene.kernels.size() == b.scene.kernels.size());
    for (std::size_t i = 0; i < a.scene.kernels.size(); ++i)
        CHECK(a.scene.kernels[i].position == b.scene.kernels[i].position);

    // history CSV bytes agree
    const auto dir = std::filesystem::temp_directory_path() / "xsplat_train_test";
    std::filesystem::create_directories(dir);
    write_history_csv(dir / "a.csv", a.history);
    write_history_csv(dir / "b.csv", b.history);
    std::ifstream fa(dir / "a.csv"), fb(dir / "b.csv");
    std::string sa((std::istreambuf_iterator<char>(fa)), {});
    std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    CHECK(sa.find("iter,loss_total,loss_l1,loss_dssim,loss_tv,n_kernels,"
                  "psnr_holdout,ssim_holdout") == 0);
}

TEST_CASE("a single kernel fits a single-splat target") {
    Camera cam = frontal_camera(4.0, 300.0, 64);
    SplatScene target_scene;
    GaussianKernel t;
    t.position = Eigen::Vector3d(0.08, -0.04, 0.0);
    t.log_scales.setConstant(std::log(0.1));
    t.raw_density = softplus_inverse(0.5);
    target_scene.kernels.push_back(t);
    ProjectionImage target = render(target_scene, cam, {});
    target.camera = cam;

    SplatScene scene;
    GaussianKernel k;
    k.position = Eigen::Vector3d::Zero();
    k.log_scales.setConstant(std::log(0.085));
    k.raw_density = softplus_inverse(0.3);
    scene.kernels.push_back(k);

    TrainConfig cfg;
    cfg.iterations = 1500;
    cfg.lr_position = 1e-3;
    cfg.densify_start = 1 << 30;  // density control off
    cfg.eval_interval = 0;
    LossWeights w;
    w.lambda_dssim = 0.0;
    w.lambda_tv = 0.0;

    TrainResult res = train(scene, {target}, cfg, w);
    const double final_l1 = l1_loss(render(res.scene, cam, {}), target);
    CHECK(final_l1 < 1e-3);
}

TEST_CASE("non-finite loss raises TrainingDiverged with the last finite state") {
    TinyProblem tp = make_tiny_problem(1);
    tp.views[0].pixels[10] = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.iterations = 10;
    LossWeights w;
    w.lambda_dssim = 0.0;
    try {
        train(tp.init_scene, tp.views, cfg, w);
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        CHECK(e.iteration == 0);
        REQUIRE(e.last_finite.kernels.size() == tp.init_scene.kernels.size());
        for (const auto& k : e.last_finite.kernels) CHECK(std::isfinite(k.raw_density));
    }
}

}  // TEST_SUITE
