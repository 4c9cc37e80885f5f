#include "xsplat/drr.hpp"

#include <cmath>

#include "xsplat/errors.hpp"
#include "xsplat/parallel.hpp"

namespace xsplat {

namespace {

// slab clipping of a ray against an axis-aligned box; false if it misses
bool clip_ray(const Eigen::AlignedBox3d& box, const Ray& ray, double& t0, double& t1) {
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a], d = ray.direction[a];
        if (std::abs(d) < 1e-300) {
            if (o < box.min()[a] || o > box.max()[a]) return false;
            continue;
        }
        double ta = (box.min()[a] - o) / d;
        double tb = (box.max()[a] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 < t1;
}

}  // namespace

ProjectionImage render_drr(const Volume& v, const Camera& camera,
                           double threshold, double step_mm) {
    if (step_mm <= 0.0) step_mm = 0.5 * v.spacing.minCoeff();
    if (step_mm <= 0.0) throw InvalidSpec("render_drr: step must be positive");

    ProjectionImage img(camera.intr.width, camera.intr.height, camera);
    const Eigen::AlignedBox3d box = v.bounds();

    parallel_for(img.height, [&](std::int64_t y0, std::int64_t y1) {
        for (std::int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const Ray ray = pixel_ray(camera.intr, camera.pose,
                                          {x + 0.5, double(y) + 0.5});
                double t0, t1;
                if (!clip_ray(box, ray, t0, t1)) continue;
                const int n = std::max(1, int(std::ceil((t1 - t0) / step_mm)));
                const double step = (t1 - t0) / n;
                double acc = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double s = t0 + (i + 0.5) * step;
                    const double a = sample_volume(v, ray.origin + s * ray.direction);
                    if (a > threshold) acc += a;
                }
                img.at(x, int(y)) = acc * step;
            }
        }
    });
    return img;
}

}  // namespace xsplat
