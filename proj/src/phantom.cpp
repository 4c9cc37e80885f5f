#include "xsplat/phantom.hpp"

#include <cmath>

#include "xsplat/errors.hpp"
#include "xsplat/parallel.hpp"

namespace xsplat {

PhantomSpec::Kind phantom_kind_from_string(const std::string& s) {
    if (s == "ellipsoids" || s == "nested-ellipsoids") return PhantomSpec::Kind::nested_ellipsoids;
    if (s == "spine") return PhantomSpec::Kind::spine;
    throw InvalidSpec("unknown phantom kind: " + s);
}

namespace {

struct Ellipsoid {
    double a, b, c;      // semi-axes, relative units
    double x0, y0, z0;   // center
    double phi_deg;      // rotation about z
    double value;        // additive density
};

// Nested-ellipsoid head phantom (classic ten-ellipsoid layout). Relative
// coordinates in [-1, 1]^3; densities sum to [0, 1] everywhere.
const Ellipsoid kNested[] = {
    {0.6900, 0.9200, 0.810, 0.0, 0.0, 0.0, 0.0, 1.00},
    {0.6624, 0.8740, 0.780, 0.0, -0.0184, 0.0, 0.0, -0.98},
    {0.1100, 0.3100, 0.220, 0.22, 0.0, 0.0, -18.0, -0.02},
    {0.1600, 0.4100, 0.280, -0.22, 0.0, 0.0, 18.0, -0.02},
    {0.2100, 0.2500, 0.410, 0.0, 0.35, -0.15, 0.0, 0.01},
    {0.0460, 0.0460, 0.050, 0.0, 0.10, 0.25, 0.0, 0.01},
    {0.0460, 0.0460, 0.050, 0.0, -0.10, 0.25, 0.0, 0.01},
    {0.0460, 0.0230, 0.050, -0.08, -0.605, 0.0, 0.0, 0.01},
    {0.0230, 0.0230, 0.020, 0.0, -0.606, 0.0, 0.0, 0.01},
    {0.0230, 0.0460, 0.020, 0.06, -0.605, 0.0, 0.0, 0.01},
};

double nested_density(const Eigen::Vector3d& u) {
    double acc = 0.0;
    for (const auto& e : kNested) {
        const double phi = e.phi_deg * M_PI / 180.0;
        const double cp = std::cos(phi), sp = std::sin(phi);
        const double dx = u.x() - e.x0, dy = u.y() - e.y0, dz = u.z() - e.z0;
        const double rx = cp * dx + sp * dy;
        const double ry = -sp * dx + cp * dy;
        const double q = (rx / e.a) * (rx / e.a) + (ry / e.b) * (ry / e.b) +
                         (dz / e.c) * (dz / e.c);
        if (q <= 1.0) acc += e.value;
    }
    return std::clamp(acc, 0.0, 1.0);
}

bool inside_cylinder(const SpineCylinder& cyl, const Eigen::Vector3d& u) {
    Eigen::Vector3d d = u - cyl.center;
    const double along = d[cyl.axis];
    if (std::abs(along) > cyl.half_length) return false;
    d[cyl.axis] = 0.0;
    return d.squaredNorm() <= cyl.radius * cyl.radius;
}

double spine_density(const SpineGeometry& g, const Eigen::Vector3d& u) {
    for (const auto& cyl : g.dense)
        if (inside_cylinder(cyl, u)) return g.bone_density;
    const Eigen::Vector3d q = u.cwiseQuotient(g.soft_semi_axes);
    if (q.squaredNorm() <= 1.0) return g.soft_density;
    return 0.0;
}

}  // namespace

SpineGeometry spine_geometry() {
    SpineGeometry g;
    g.soft_semi_axes = Eigen::Vector3d(0.85, 0.65, 0.95);
    // Bone at 0.85 over soft tissue at 0.15: a supersampled voxel crosses 0.5
    // exactly at half coverage, so thresholded voxel counts estimate the
    // continuum volume without first-order bias.
    g.soft_density = 0.15;
    g.bone_density = 0.85;
    // five vertebral bodies stacked along z, spinous processes pointing +x
    for (int i = -2; i <= 2; ++i) {
        const double zc = 0.32 * i;
        g.dense.push_back({Eigen::Vector3d(-0.15, 0.0, zc), 2, 0.22, 0.07});
        g.dense.push_back({Eigen::Vector3d(0.30, 0.0, zc), 0, 0.06, 0.12});
    }
    return g;
}

Volume generate_phantom(const PhantomSpec& spec) {
    if (spec.dims.minCoeff() < 8) throw InvalidSpec("generate_phantom: dims below 8^3");
    if (spec.spacing_mm.minCoeff() <= 0.0) throw InvalidSpec("generate_phantom: spacing <= 0");
    const int ss = std::max(1, spec.supersample);

    Volume v;
    v.dims = spec.dims;
    v.spacing = spec.spacing_mm;
    const Eigen::Vector3d extent = spec.dims.cast<double>().cwiseProduct(spec.spacing_mm);
    v.origin = -0.5 * extent + 0.5 * spec.spacing_mm;  // centered on the world origin
    v.values.assign(std::size_t(spec.dims.x()) * spec.dims.y() * spec.dims.z(), 0.0);

    const SpineGeometry geom = spine_geometry();
    const Eigen::Vector3d half = 0.5 * extent;
    const double sub_w = 1.0 / ss;

    parallel_for(spec.dims.z(), [&](std::int64_t z0, std::int64_t z1) {
        for (std::int64_t z = z0; z < z1; ++z) {
            for (int y = 0; y < spec.dims.y(); ++y) {
                for (int x = 0; x < spec.dims.x(); ++x) {
                    double acc = 0.0;
                    for (int sz = 0; sz < ss; ++sz)
                        for (int sy = 0; sy < ss; ++sy)
                            for (int sx = 0; sx < ss; ++sx) {
                                const Eigen::Vector3d w =
                                    v.voxel_center(x, y, int(z)) +
                                    Eigen::Vector3d((sx + 0.5) * sub_w - 0.5,
                                                    (sy + 0.5) * sub_w - 0.5,
                                                    (sz + 0.5) * sub_w - 0.5)
                                        .cwiseProduct(spec.spacing_mm);
                                const Eigen::Vector3d u = w.cwiseQuotient(half);
                                acc += spec.kind == PhantomSpec::Kind::spine
                                           ? spine_density(geom, u)
                                           : nested_density(u);
                            }
                    v.at(x, y, int(z)) = acc / double(ss * ss * ss);
                }
            }
        }
    });
    return v;
}

}  // namespace xsplat
