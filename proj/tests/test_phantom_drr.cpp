#include <doctest.h>

#include "test_util.hpp"
#include "xsplat/drr.hpp"
#include "xsplat/phantom.hpp"

using namespace xsplat;

TEST_SUITE("phantom_drr") {

TEST_CASE("nested-ellipsoid phantom bounds and background") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::nested_ellipsoids;
    spec.dims = Eigen::Vector3i(64, 64, 64);
    spec.spacing_mm = Eigen::Vector3d(3.125, 3.125, 3.125);
    Volume v = generate_phantom(spec);
    double lo = 1e9, hi = -1e9;
    for (double x : v.values) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(v.at(0, 0, 0) == 0.0);  // corner is outside every ellipsoid
    CHECK(hi > 0.5);              // the shell is present
}

TEST_CASE("spine phantom dense fraction matches the analytic volume") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::spine;
    spec.dims = Eigen::Vector3i(64, 64, 64);
    Volume v = generate_phantom(spec);

    std::int64_t above = 0;
    for (double x : v.values)
        if (x > 0.5) ++above;
    const double measured = double(above) / double(v.values.size());

    const SpineGeometry g = spine_geometry();
    double analytic = 0.0;  // relative-unit volume of the disjoint dense primitives
    for (const auto& c : g.dense)
        analytic += M_PI * c.radius * c.radius * 2.0 * c.half_length;
    analytic /= 8.0;  // bbox volume in relative units

    CHECK(std::abs(measured - analytic) / analytic < 0.02);
}

TEST_CASE("generate_phantom rejects tiny grids") {
    PhantomSpec spec;
    spec.dims = Eigen::Vector3i(4, 4, 4);
    CHECK_THROWS_AS(generate_phantom(spec), InvalidSpec);
    CHECK_THROWS_AS(phantom_kind_from_string("voronoi"), InvalidSpec);
}

TEST_CASE("sample_volume interpolation nodes and support") {
    Volume v;
    v.dims = Eigen::Vector3i(4, 4, 4);
    v.spacing = Eigen::Vector3d(2, 2, 2);
    v.origin = Eigen::Vector3d(-3, -3, -3);
    v.values.assign(64, 0.0);
    v.at(1, 2, 1) = 0.7;
    v.at(2, 2, 1) = 0.3;

    CHECK(sample_volume(v, v.voxel_center(1, 2, 1)) == doctest::Approx(0.7));
    Eigen::Vector3d mid = 0.5 * (v.voxel_center(1, 2, 1) + v.voxel_center(2, 2, 1));
    CHECK(sample_volume(v, mid) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sample_volume(v, {100, 100, 100}) == 0.0);
}

namespace {

Volume uniform_cube(double side_mm, double density, int n = 50) {
    Volume v;
    v.dims = Eigen::Vector3i(n, n, n);
    v.spacing = Eigen::Vector3d::Constant(side_mm / n);
    v.origin = Eigen::Vector3d::Constant(-0.5 * side_mm + 0.5 * side_mm / n);
    v.values.assign(std::size_t(n) * n * n, density);
    return v;
}

Camera central_ray_camera(double dist) {
    // 1x1 image whose single pixel center is exactly the principal point
    Camera cam;
    cam.intr = Intrinsics{500, 500, 0.5, 0.5, 1, 1};
    cam.pose.R = Eigen::Matrix3d::Identity();
    cam.pose.origin = Eigen::Vector3d(0, 0, -dist);
    return cam;
}

}  // namespace

TEST_CASE("drr of a uniform cube matches the analytic path length") {
    Volume v = uniform_cube(100.0, 0.02);
    ProjectionImage img = render_drr(v, central_ray_camera(500), 0.0, 1.0);
    CHECK(img.at(0, 0) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("drr threshold above the density suppresses everything") {
    Volume v = uniform_cube(100.0, 0.02);
    ProjectionImage img = render_drr(v, central_ray_camera(500), 0.05, 1.0);
    CHECK(img.max_value() == 0.0);
}

TEST_CASE("drr step refinement converges on a smooth phantom") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::nested_ellipsoids;
    spec.dims = Eigen::Vector3i(32, 32, 32);
    spec.spacing_mm = Eigen::Vector3d(3, 3, 3);
    Volume v = generate_phantom(spec);

    Camera cam = testutil::frontal_camera(400, 120, 17);
    ProjectionImage a = render_drr(v, cam, 0.0, 1.0);
    ProjectionImage b = render_drr(v, cam, 0.0, 0.5);
    const double peak = b.max_value();
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        if (b.pixels[i] < 0.05 * peak) continue;
        CHECK(std::abs(a.pixels[i] - b.pixels[i]) / b.pixels[i] < 0.005);
    }
}

TEST_CASE("drr is linear in the volume with an inactive threshold") {
    Volume v = uniform_cube(80.0, 0.01, 20);
    Camera cam = testutil::frontal_camera(300, 100, 9);
    ProjectionImage a = render_drr(v, cam, 0.0, 1.0);
    Volume v2 = v;
    for (auto& x : v2.values) x *= 3.0;
    ProjectionImage b = render_drr(v2, cam, 0.0, 1.0);
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        CHECK(b.pixels[i] == doctest::Approx(3.0 * a.pixels[i]).epsilon(1e-9));

    Volume zero = v;
    for (auto& x : zero.values) x = 0.0;
    CHECK(render_drr(zero, cam, 0.0, 1.0).max_value() == 0.0);
}

TEST_CASE("point-symmetric phantom renders consistently from opposed poses") {
    // two balls placed symmetrically about the origin
    Volume v;
    v.dims = Eigen::Vector3i(48, 48, 48);
    v.spacing = Eigen::Vector3d(2, 2, 2);
    v.origin = Eigen::Vector3d::Constant(-47.0);
    v.values.assign(48 * 48 * 48, 0.0);
    auto fill_ball = [&](const Eigen::Vector3d& c, double r, double d) {
        for (int z = 0; z < 48; ++z)
            for (int y = 0; y < 48; ++y)
                for (int x = 0; x < 48; ++x)
                    if ((v.voxel_center(x, y, z) - c).norm() < r) v.at(x, y, z) += d;
    };
    fill_ball({20, 8, -12}, 16, 0.01);
    fill_ball({-20, -8, 12}, 16, 0.01);

    TrajectorySpec spec;
    spec.mode = TrajectorySpec::Mode::circular;
    spec.n_views = 2;  // poses at 0 and 180 degrees
    spec.radius_mm = 400;
    spec.intr = Intrinsics{150, 150, 16, 16, 32, 32};
    auto cams = generate_trajectory(spec);

    ProjectionImage a = render_drr(v, cams[0], 0.0, 0.5);
    ProjectionImage b = render_drr(v, cams[1], 0.0, 0.5);
    const double peak = a.max_value();
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double expect = a.at(x, y);
            const double got = b.at(x, 31 - y);  // opposed view flips vertically
            if (expect < 0.05 * peak) continue;
            CHECK(std::abs(got - expect) / expect < 0.01);
        }
}

TEST_CASE("volume files round trip") {
    PhantomSpec spec;
    spec.dims = Eigen::Vector3i(16, 12, 8);
    spec.spacing_mm = Eigen::Vector3d(2, 3, 4);
    Volume v = generate_phantom(spec);
    const auto base = std::filesystem::temp_directory_path() / "xsplat_vol_test";
    write_volume(base, v);
    Volume w = read_volume(base);
    CHECK(w.dims == v.dims);
    CHECK((w.spacing - v.spacing).norm() < 1e-12);
    CHECK((w.origin - v.origin).norm() < 1e-12);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < v.values.size(); ++i)
        max_diff = std::max(max_diff,
                            std::abs(v.values[i] - double(float(v.values[i]))));
    for (std::size_t i = 0; i < v.values.size(); ++i)
        CHECK(w.values[i] == double(float(v.values[i])));
    CHECK(max_diff < 1e-6);
}

TEST_CASE("pfm files round trip") {
    Rng rng(9);
    ProjectionImage img(7, 5, Camera{});
    for (auto& p : img.pixels) p = float(rng.uniform(0, 10));
    const auto file = std::filesystem::temp_directory_path() / "xsplat_test.pfm";
    write_pfm(file, img);
    ProjectionImage back = read_pfm(file);
    REQUIRE(back.width == 7);
    REQUIRE(back.height == 5);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(back.pixels[i] == img.pixels[i]);
}

}  // TEST_SUITE
