#include <doctest.h>

#include "test_util.hpp"
#include "xsplat/scene.hpp"

using namespace xsplat;
using testutil::random_kernel;

TEST_SUITE("scene") {

TEST_CASE("kernel_covariance identity rotation") {
    GaussianKernel k;
    k.log_scales.setConstant(std::log(0.1));
    Eigen::Matrix3d S = kernel_covariance(k);
    CHECK((S - 0.01 * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("covariance determinant is rotation invariant") {
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        GaussianKernel k = random_kernel(rng);
        const double expect = std::exp(2.0 * k.log_scales.sum());
        CHECK(kernel_covariance(k).determinant() ==
              doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("covariance stays positive definite") {
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        GaussianKernel k = random_kernel(rng, 1.0, 0.001, 0.5);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(kernel_covariance(k));
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("covariance is invariant under versor sign flip") {
    Rng rng(19);
    GaussianKernel k = random_kernel(rng);
    GaussianKernel k2 = k;
    k2.rotation = -k2.rotation;
    CHECK((kernel_covariance(k) - kernel_covariance(k2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("init_random respects bounds and is deterministic") {
    BBox box;
    SplatScene s = init_random(box, 10000, {0.1, 0.2}, 0.02, 42);
    REQUIRE(s.kernels.size() == 10000);
    for (const auto& k : s.kernels) {
        for (int a = 0; a < 3; ++a) {
            CHECK(k.position[a] >= -1.0);
            CHECK(k.position[a] <= 1.0);
        }
        const double rho = kernel_density_amplitude(k);
        CHECK(rho >= 0.1 - 1e-12);
        CHECK(rho <= 0.2 + 1e-12);
        CHECK(k.rotation == Eigen::Vector4d(1, 0, 0, 0));
        CHECK(k.log_scales == Eigen::Vector3d::Constant(std::log(0.02)));
    }

    SplatScene s2 = init_random(box, 10000, {0.1, 0.2}, 0.02, 42);
    for (std::size_t i = 0; i < s.kernels.size(); ++i) {
        CHECK(s2.kernels[i].position == s.kernels[i].position);
        CHECK(s2.kernels[i].raw_density == s.kernels[i].raw_density);
    }

    CHECK_THROWS_AS(init_random(box, 0, {0.1, 0.2}, 0.02, 1), InvalidSpec);
}

TEST_CASE("scene_density closed-form cases") {
    SplatScene s;
    GaussianKernel k;
    k.position = Eigen::Vector3d(0.2, -0.1, 0.3);
    k.log_scales.setConstant(std::log(0.05));
    k.raw_density = softplus_inverse(0.37);
    s.kernels.push_back(k);

    CHECK(scene_density(s, k.position) == doctest::Approx(0.37).epsilon(1e-12));

    s.kernels.push_back(k);
    CHECK(scene_density(s, k.position) == doctest::Approx(0.74).epsilon(1e-12));

    SplatScene lone;
    lone.kernels.push_back(k);
    const Eigen::Vector3d far = k.position + Eigen::Vector3d(6 * 0.05, 0, 0);
    CHECK(scene_density(lone, far) <= 0.37 * std::exp(-18.0) * (1 + 1e-9));
}

TEST_CASE("scene_density is additive over kernel subsets") {
    Rng rng(23);
    SplatScene all, first, second;
    for (int i = 0; i < 20; ++i) {
        GaussianKernel k = random_kernel(rng);
        all.kernels.push_back(k);
        (i < 12 ? first : second).kernels.push_back(k);
    }
    for (int i = 0; i < 10; ++i) {
        Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double sum = scene_density(first, x) + scene_density(second, x);
        CHECK(scene_density(all, x) == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("density evaluator matches scene_density") {
    Rng rng(29);
    SplatScene s;
    for (int i = 0; i < 30; ++i) s.kernels.push_back(random_kernel(rng));
    DensityEvaluator eval(s);
    for (int i = 0; i < 20; ++i) {
        Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        CHECK(eval(x) == doctest::Approx(scene_density(s, x)).epsilon(1e-12));
    }
}

TEST_CASE("scene checkpoints round trip") {
    Rng rng(31);
    SplatScene s;
    s.world_transform.scale = 100.0;
    s.world_transform.center = Eigen::Vector3d(1, -2, 3);
    for (int i = 0; i < 25; ++i) s.kernels.push_back(random_kernel(rng));

    const auto file = std::filesystem::temp_directory_path() / "xsplat_scene.json";
    save_scene(file, s);
    SplatScene t = load_scene(file);
    REQUIRE(t.kernels.size() == s.kernels.size());
    CHECK(t.world_transform.scale == s.world_transform.scale);
    CHECK(t.world_transform.center == s.world_transform.center);
    for (std::size_t i = 0; i < s.kernels.size(); ++i) {
        CHECK(t.kernels[i].position == s.kernels[i].position);
        CHECK(t.kernels[i].log_scales == s.kernels[i].log_scales);
        CHECK(t.kernels[i].rotation == s.kernels[i].rotation);
        CHECK(t.kernels[i].raw_density == s.kernels[i].raw_density);
    }
}

}  // TEST_SUITE
