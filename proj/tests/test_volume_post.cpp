#include <doctest.h>

#include "test_util.hpp"
#include "xsplat/volume_post.hpp"

using namespace xsplat;
using testutil::random_kernel;

TEST_SUITE("volume_post") {

TEST_CASE("voxelize of an empty region is zero") {
    Rng rng(61);
    SplatScene s;
    for (int i = 0; i < 5; ++i) s.kernels.push_back(random_kernel(rng, 0.1));
    VoxelGrid grid;
    grid.dims = Eigen::Vector3i(8, 8, 8);
    grid.spacing_mm = Eigen::Vector3d(0.05, 0.05, 0.05);
    grid.origin_mm = Eigen::Vector3d(10, 10, 10);  // far from every kernel
    Volume v = voxelize(s, grid);
    CHECK(*std::max_element(v.values.begin(), v.values.end()) == 0.0);
}

TEST_CASE("voxelize reproduces a kernel mode") {
    SplatScene s;
    GaussianKernel k;
    k.position = Eigen::Vector3d(0.1, 0.1, 0.1);
    k.log_scales.setConstant(std::log(0.05));
    k.raw_density = softplus_inverse(1.0);
    s.kernels.push_back(k);
    VoxelGrid grid;
    grid.dims = Eigen::Vector3i(5, 5, 5);
    grid.spacing_mm = Eigen::Vector3d(0.02, 0.02, 0.02);
    grid.origin_mm = Eigen::Vector3d(0.06, 0.06, 0.06);  // voxel (2,2,2) at the mean
    Volume v = voxelize(s, grid);
    CHECK(std::abs(v.at(2, 2, 2) - 1.0) < 1e-4);
}

TEST_CASE("voxelize matches the untruncated evaluator") {
    Rng rng(67);
    SplatScene s;
    s.world_transform.scale = 50.0;  // exercise the world mapping
    for (int i = 0; i < 300; ++i)
        s.kernels.push_back(random_kernel(rng, 0.9, 0.01, 0.05, 0.005, 0.02));
    VoxelGrid grid;
    grid.dims = Eigen::Vector3i(24, 24, 24);
    grid.spacing_mm = Eigen::Vector3d::Constant(2.0 * 50.0 / 24);
    grid.origin_mm = Eigen::Vector3d::Constant(-50.0 + 50.0 / 24);
    Volume v = voxelize(s, grid);

    DensityEvaluator exact(s);
    double max_density = 0.0, max_err = 0.0;
    for (int z = 0; z < 24; ++z)
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) {
                const Eigen::Vector3d scene_pt =
                    s.world_transform.to_scene(v.voxel_center(x, y, z));
                const double ref = exact(scene_pt);
                max_density = std::max(max_density, ref);
                max_err = std::max(max_err, std::abs(v.at(x, y, z) - ref));
            }
    CHECK(max_err <= 1e-3 * max_density);
}

TEST_CASE("threshold_and_crop nearest-rank semantics") {
    Volume v;
    v.dims = Eigen::Vector3i(10, 10, 1);
    v.spacing = Eigen::Vector3d(1, 1, 1);
    v.values.resize(100);
    for (int i = 0; i < 100; ++i) v.values[i] = i + 1;  // 1..100

    Volume t = threshold_and_crop(v, 80.0);
    CHECK(std::count_if(t.values.begin(), t.values.end(),
                        [](double x) { return x > 0; }) == 20);
    // idempotence at the same percentile on this fixture
    Volume t2 = threshold_and_crop(t, 80.0);
    for (std::size_t i = 0; i < t.values.size(); ++i) CHECK(t2.values[i] == t.values[i]);

    Volume z = threshold_and_crop(v, 0.0);
    CHECK(std::count_if(z.values.begin(), z.values.end(),
                        [](double x) { return x == 0; }) == 1);

    Volume c = v;
    std::fill(c.values.begin(), c.values.end(), 3.14);
    Volume tc = threshold_and_crop(c, 80.0);
    CHECK(*std::max_element(tc.values.begin(), tc.values.end()) == 0.0);
}

TEST_CASE("threshold_and_crop crop box and origin") {
    Volume v;
    v.dims = Eigen::Vector3i(6, 5, 4);
    v.spacing = Eigen::Vector3d(2, 2, 2);
    v.origin = Eigen::Vector3d(0, 0, 0);
    v.values.assign(6 * 5 * 4, 1.0);
    v.at(3, 2, 1) = 9.0;

    CropBox box;
    box.lo = Eigen::Vector3i(2, 1, 1);
    box.hi = Eigen::Vector3i(5, 4, 3);
    Volume c = threshold_and_crop(v, 0.0, box);
    CHECK(c.dims == Eigen::Vector3i(3, 3, 2));
    CHECK((c.origin - Eigen::Vector3d(4, 2, 2)).norm() < 1e-12);
    CHECK(c.at(1, 1, 0) == 9.0);  // survives the percentile-0 threshold

    box.hi = Eigen::Vector3i(7, 4, 3);
    CHECK_THROWS_AS(threshold_and_crop(v, 0.0, box), InvalidCrop);
    CHECK_THROWS_AS(threshold_and_crop(v, 101.0), InvalidSpec);
}

TEST_CASE("export_slices shapes and content") {
    Volume v;
    v.dims = Eigen::Vector3i(16, 12, 10);
    v.spacing = Eigen::Vector3d(1, 1, 1);
    v.values.assign(16 * 12 * 10, 0.0);
    for (int z = 0; z < 10; ++z)
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 16; ++x) v.at(x, y, z) = x + y + z;

    auto axial = export_slices(v, SliceAxis::axial, 0.0, 35.0);
    REQUIRE(axial.size() == 10);
    CHECK(axial[0].width == 16);
    CHECK(axial[0].height == 12);
    auto coronal = export_slices(v, SliceAxis::coronal, 0.0, 35.0);
    REQUIRE(coronal.size() == 12);
    CHECK(coronal[0].width == 16);
    CHECK(coronal[0].height == 10);
    auto sagittal = export_slices(v, SliceAxis::sagittal, 0.0, 35.0);
    REQUIRE(sagittal.size() == 16);

    // slice pixels equal the direct voxel plane through the window map
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 16; ++x) {
            const double expect = std::lround(v.at(x, y, 3) / 35.0 * 65535.0);
            CHECK(axial[3].pixels[std::size_t(y) * 16 + x] == expect);
        }

    Volume zero = v;
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    auto black = export_slices(zero, SliceAxis::axial);
    for (const auto& img : black)
        for (auto px : img.pixels) CHECK(px == 0);
}

TEST_CASE("slice PNG files are written") {
    Volume v;
    v.dims = Eigen::Vector3i(8, 8, 3);
    v.spacing = Eigen::Vector3d(1, 1, 1);
    v.values.assign(8 * 8 * 3, 0.5);
    auto slices = export_slices(v, SliceAxis::axial, 0.0, 1.0);
    const auto dir = std::filesystem::temp_directory_path() / "xsplat_slices";
    save_slices_png(dir, SliceAxis::axial, slices);
    for (int i = 0; i < 3; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "axial_%04d.png", i);
        CHECK(std::filesystem::file_size(dir / name) > 8);
    }
}

TEST_CASE("psnr closed forms") {
    ProjectionImage a(16, 16, Camera{});
    ProjectionImage b = a;
    CHECK(std::isinf(psnr(a, b, 1.0)));

    for (auto& p : b.pixels) p += 0.1;  // MSE = 0.01
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(a, b, 1.0) == psnr(b, a, 1.0));

    ProjectionImage c = a;
    for (auto& p : c.pixels) p += 1.0;  // MSE = 1 on an 8-bit range
    CHECK(psnr(a, c, 255.0) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
    CHECK(psnr(a, c, 255.0) == doctest::Approx(48.13).epsilon(1e-4));

    ProjectionImage d(8, 9, Camera{});
    CHECK_THROWS_AS(psnr(a, d, 1.0), ShapeMismatch);
    CHECK_THROWS_AS(psnr(a, b, 0.0), InvalidSpec);
}

TEST_CASE("psnr and ssim under joint rescaling") {
    Rng rng(71);
    ProjectionImage a(32, 32, Camera{}), b(32, 32, Camera{});
    for (auto& p : a.pixels) p = rng.uniform(0, 1);
    for (std::size_t i = 0; i < b.pixels.size(); ++i)
        b.pixels[i] = a.pixels[i] + 0.05 * rng.normal();

    const double base_psnr = psnr(a, b, 1.0);
    SsimConfig cfg;
    const double base_ssim = ssim(a, b, cfg);
    CHECK(ssim(b, a, cfg) == doctest::Approx(base_ssim).epsilon(1e-12));

    const double alpha = 7.5, beta = 2.0;
    ProjectionImage a2 = a, b2 = b;
    for (auto& p : a2.pixels) p = alpha * p + beta;
    for (auto& p : b2.pixels) p = alpha * p + beta;
    CHECK(psnr(a2, b2, alpha) == doctest::Approx(base_psnr).epsilon(1e-10));

    ProjectionImage a3 = a, b3 = b;
    for (auto& p : a3.pixels) p = alpha * p;
    for (auto& p : b3.pixels) p = alpha * p;
    SsimConfig cfg3;
    cfg3.data_range = alpha;
    CHECK(ssim(a3, b3, cfg3) == doctest::Approx(base_ssim).epsilon(1e-10));
}

TEST_CASE("psnr decreases as noise grows") {
    Rng rng(73);
    ProjectionImage a(32, 32, Camera{});
    for (auto& p : a.pixels) p = rng.uniform(0, 1);
    std::vector<double> noise(a.pixels.size());
    for (auto& n : noise) n = rng.normal();
    double prev = std::numeric_limits<double>::infinity();
    for (double amp : {0.01, 0.05, 0.2}) {
        ProjectionImage b = a;
        for (std::size_t i = 0; i < b.pixels.size(); ++i) b.pixels[i] += amp * noise[i];
        const double cur = psnr(a, b, 1.0);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("ssim closed forms") {
    ProjectionImage a(32, 32, Camera{}), b(32, 32, Camera{});
    SsimConfig cfg;  // data_range = 1
    CHECK(ssim(a, a, cfg) == doctest::Approx(1.0).epsilon(1e-12));

    for (auto& p : b.pixels) p = 0.1;
    const double c1 = 1e-4;
    CHECK(ssim(a, b, cfg) == doctest::Approx(c1 / (0.01 + c1)).epsilon(1e-12));
    CHECK(ssim(a, b, cfg) == doctest::Approx(0.009901).epsilon(1e-4));

    ProjectionImage small(8, 8, Camera{});
    CHECK_THROWS_AS(ssim(small, small, cfg), ShapeMismatch);
}

TEST_CASE("ssim of independent noise is near zero") {
    Rng rng(79);
    ProjectionImage a(256, 256, Camera{}), b(256, 256, Camera{});
    for (auto& p : a.pixels) p = rng.uniform(0, 1);
    for (auto& p : b.pixels) p = rng.uniform(0, 1);
    SsimConfig cfg;
    CHECK(std::abs(ssim(a, b, cfg)) < 0.1);
}

TEST_CASE("evaluate against targets rendered from the same scene") {
    Rng rng(83);
    SplatScene s;
    for (int i = 0; i < 30; ++i)
        s.kernels.push_back(random_kernel(rng, 0.5, 0.05, 0.15, 0.1, 0.5));
    Camera cam = testutil::frontal_camera(4.0, 300.0, 64);
    std::vector<ProjectionImage> tests;
    for (double dist : {4.0, 4.5}) {
        Camera c = cam;
        c.pose.origin = Eigen::Vector3d(0, 0, -dist);
        tests.push_back(render(s, c, {}));
    }
    EvaluationReport rep = evaluate(s, tests);
    REQUIRE(rep.n_views == 2);
    for (double p : rep.per_view_psnr) CHECK(std::isinf(p));
    for (double v : rep.per_view_ssim) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate(s, {}), InvalidSpec);

    const auto dir = std::filesystem::temp_directory_path() / "xsplat_report";
    std::filesystem::create_directories(dir);
    save_report_json(dir / "report.json", rep);
    save_report_csv(dir / "report.csv", rep);
    CHECK(std::filesystem::file_size(dir / "report.json") > 10);
    CHECK(std::filesystem::file_size(dir / "report.csv") > 10);
}

}  // TEST_SUITE
