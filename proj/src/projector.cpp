#include "xsplat/projector.hpp"

#include <algorithm>
#include <cmath>

#include "xsplat/errors.hpp"
#include "xsplat/parallel.hpp"

namespace xsplat {

KernelProjection project_kernel_full(const GaussianKernel& k, const Camera& camera,
                                     const SimilarityTransform& T,
                                     const RenderOptions& opts) {
    KernelProjection out;
    const Intrinsics& intr = camera.intr;

    const Eigen::Vector3d x_cam =
        camera.pose.R * (T.to_world(k.position) - camera.pose.origin);
    if (x_cam.z() <= opts.near_clip) return out;  // behind the source

    out.x_cam = x_cam;
    out.Rq = quat_to_rotation(k.rotation);
    out.sigmas = k.log_scales.array().exp();
    const Eigen::Matrix3d A = out.Rq * out.sigmas.asDiagonal();
    out.Sigma = A * A.transpose();
    out.J = ray_space_jacobian(x_cam, intr);
    // linear part of scene units -> camera space is scale * R
    out.M = out.J * (T.scale * camera.pose.R);
    out.SigmaTilde = out.M * out.Sigma * out.M.transpose();

    Eigen::Matrix2d hat = out.SigmaTilde.topLeftCorner<2, 2>();
    {   // eigenvalue floor against sub-pixel footprints; mirrored into
        // SigmaTilde so the rectification identity stays exact
        const double tr = hat(0, 0) + hat(1, 1);
        const double det = hat(0, 0) * hat(1, 1) - hat(0, 1) * hat(1, 0);
        const double disc = std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
        const double lmin = 0.5 * tr - disc;
        if (lmin < opts.eigen_floor_px2) {
            const double bump = opts.eigen_floor_px2 - lmin;
            hat(0, 0) += bump;
            hat(1, 1) += bump;
            out.SigmaTilde(0, 0) += bump;
            out.SigmaTilde(1, 1) += bump;
        }
    }

    out.detH = hat(0, 0) * hat(1, 1) - hat(0, 1) * hat(1, 0);
    out.detT = out.SigmaTilde.determinant();
    if (out.detH <= 0.0 || out.detT <= 0.0) return out;
    out.SigmaTildeInv = out.SigmaTilde.inverse();
    out.Qhat << hat(1, 1) / out.detH, -hat(0, 1) / out.detH,
                -hat(1, 0) / out.detH, hat(0, 0) / out.detH;

    out.rho = kernel_density_amplitude(k);
    const double mu = std::sqrt(2.0 * M_PI * out.detT / out.detH);

    Splat2D& sp = out.splat;
    sp.mean2d = {intr.fx * x_cam.x() / x_cam.z() + intr.cx,
                 intr.fy * x_cam.y() / x_cam.z() + intr.cy};
    sp.cov2d = hat;
    sp.mu = mu;
    sp.density2d = mu * out.rho;
    sp.depth = x_cam.norm();

    // raster bounds: truncation-sigma box plus a margin, pixel centers
    const double rx = opts.truncation_sigma * std::sqrt(hat(0, 0)) + opts.box_margin_px;
    const double ry = opts.truncation_sigma * std::sqrt(hat(1, 1)) + opts.box_margin_px;
    out.x0 = std::max(0, int(std::ceil(sp.mean2d.x() - rx - 0.5)));
    out.x1 = std::min(intr.width - 1, int(std::floor(sp.mean2d.x() + rx - 0.5)));
    out.y0 = std::max(0, int(std::ceil(sp.mean2d.y() - ry - 0.5)));
    out.y1 = std::min(intr.height - 1, int(std::floor(sp.mean2d.y() + ry - 0.5)));
    if (out.x0 > out.x1 || out.y0 > out.y1) return out;  // footprint off-image

    out.culled = false;
    return out;
}

std::optional<Splat2D> project_kernel(const GaussianKernel& k, const Camera& camera,
                                      const SimilarityTransform& T,
                                      const RenderOptions& opts) {
    KernelProjection full = project_kernel_full(k, camera, T, opts);
    if (full.culled) return std::nullopt;
    return full.splat;
}

std::vector<KernelProjection> project_scene(const SplatScene& s, const Camera& camera,
                                            const RenderOptions& opts) {
    std::vector<KernelProjection> proj(s.kernels.size());
    parallel_for(std::int64_t(s.kernels.size()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i)
            proj[i] = project_kernel_full(s.kernels[i], camera, s.world_transform, opts);
    });
    return proj;
}

void accumulate_splats(const std::vector<KernelProjection>& proj,
                       const RenderOptions& opts, ProjectionImage& img) {
    const int tile = std::max(1, opts.tile_px);
    const int tiles_x = (img.width + tile - 1) / tile;
    const int tiles_y = (img.height + tile - 1) / tile;
    const double trunc2 = opts.truncation_sigma * opts.truncation_sigma;

    // bin splat indices per tile in ascending kernel order
    std::vector<std::vector<int>> bins(std::size_t(tiles_x) * tiles_y);
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const auto& p = proj[i];
        if (p.culled) continue;
        const int tx0 = p.x0 / tile, tx1 = p.x1 / tile;
        const int ty0 = p.y0 / tile, ty1 = p.y1 / tile;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                bins[std::size_t(ty) * tiles_x + tx].push_back(int(i));
    }

    // tiles own disjoint pixels; per-pixel accumulation follows kernel order
    parallel_for(std::int64_t(bins.size()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t t = b; t < e; ++t) {
            const auto& list = bins[t];
            if (list.empty()) continue;
            const int tx = int(t % tiles_x), ty = int(t / tiles_x);
            const int px0 = tx * tile, px1 = std::min(img.width - 1, px0 + tile - 1);
            const int py0 = ty * tile, py1 = std::min(img.height - 1, py0 + tile - 1);
            for (int idx : list) {
                const auto& p = proj[idx];
                const int cx0 = std::max(px0, p.x0), cx1 = std::min(px1, p.x1);
                const int cy0 = std::max(py0, p.y0), cy1 = std::min(py1, p.y1);
                const double a = p.Qhat(0, 0), bq = p.Qhat(0, 1), c = p.Qhat(1, 1);
                for (int y = cy0; y <= cy1; ++y) {
                    const double dy = (y + 0.5) - p.splat.mean2d.y();
                    double* row = &img.pixels[std::size_t(y) * img.width];
                    for (int x = cx0; x <= cx1; ++x) {
                        const double dx = (x + 0.5) - p.splat.mean2d.x();
                        const double r2 = a * dx * dx + 2.0 * bq * dx * dy + c * dy * dy;
                        if (r2 > trunc2) continue;
                        row[x] += p.splat.density2d * std::exp(-0.5 * r2);
                    }
                }
            }
        }
    });
}

ProjectionImage render(const SplatScene& s, const Camera& camera,
                       const RenderOptions& opts) {
    if (camera.intr.width <= 0 || camera.intr.height <= 0)
        throw InvalidSpec("render: camera has no image size");
    ProjectionImage img(camera.intr.width, camera.intr.height, camera);
    const auto proj = project_scene(s, camera, opts);
    accumulate_splats(proj, opts, img);
    return img;
}

ProjectionImage render_oracle(const SplatScene& s, const Camera& camera, double step) {
    if (step <= 0.0) throw InvalidSpec("render_oracle: step must be positive");
    if (camera.intr.width <= 0 || camera.intr.height <= 0)
        throw InvalidSpec("render_oracle: camera has no image size");

    struct WorldKernel {
        Eigen::Vector3d p;
        Eigen::Matrix3d Q;
        double rho;
        double radius;  // 8-sigma support along any direction
    };
    std::vector<WorldKernel> ks;
    ks.reserve(s.kernels.size());
    for (const auto& k : s.kernels) {
        WorldKernel wk;
        wk.p = s.world_transform.to_world(k.position);
        const double sw = s.world_transform.scale;
        const Eigen::Matrix3d cov = (sw * sw) * kernel_covariance(k);
        wk.Q = cov.inverse();
        wk.rho = kernel_density_amplitude(k);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        wk.radius = 8.0 * std::sqrt(eig.eigenvalues().maxCoeff());
        ks.push_back(wk);
    }

    ProjectionImage img(camera.intr.width, camera.intr.height, camera);
    parallel_for(img.height, [&](std::int64_t yb, std::int64_t ye) {
        for (std::int64_t y = yb; y < ye; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const Ray ray = pixel_ray(camera.intr, camera.pose,
                                          {x + 0.5, double(y) + 0.5});
                double acc = 0.0;
                for (const auto& wk : ks) {
                    const double tc = (wk.p - ray.origin).dot(ray.direction);
                    const double t0 = std::max(0.0, tc - wk.radius);
                    const double t1 = tc + wk.radius;
                    if (t1 <= t0) continue;
                    const int n = std::max(1, int(std::ceil((t1 - t0) / step)));
                    const double dt = (t1 - t0) / n;
                    double sum = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const Eigen::Vector3d pt =
                            ray.origin + (t0 + (i + 0.5) * dt) * ray.direction;
                        const Eigen::Vector3d d = pt - wk.p;
                        sum += std::exp(-0.5 * d.dot(wk.Q * d));
                    }
                    acc += wk.rho * sum * dt;
                }
                img.at(x, int(y)) = acc;
            }
        }
    });
    return img;
}

}  // namespace xsplat
