#include "xsplat/gradients.hpp"

#include <cmath>

#include "xsplat/errors.hpp"
#include "xsplat/parallel.hpp"

namespace xsplat {

void KernelGradients::resize_zero(std::size_t n) {
    position.assign(n, Eigen::Vector3d::Zero());
    log_scales.assign(n, Eigen::Vector3d::Zero());
    rotation.assign(n, Eigen::Vector4d::Zero());
    raw_density.assign(n, 0.0);
}

void KernelGradients::axpy(double a, const KernelGradients& other) {
    for (std::size_t i = 0; i < position.size(); ++i) {
        position[i] += a * other.position[i];
        log_scales[i] += a * other.log_scales[i];
        rotation[i] += a * other.rotation[i];
        raw_density[i] += a * other.raw_density[i];
    }
}

namespace {

// Pullback through R(q/|q|) for an arbitrary (unnormalized) quaternion.
Eigen::Vector4d quat_backward(const Eigen::Vector4d& q, const Eigen::Matrix3d& dR) {
    const double n = q.norm();
    const Eigen::Vector4d qn = q / n;
    const double w = qn[0], x = qn[1], y = qn[2], z = qn[3];
    Eigen::Vector4d dqn;
    dqn[0] = 2.0 * (-dR(0, 1) * z + dR(0, 2) * y + dR(1, 0) * z - dR(1, 2) * x -
                    dR(2, 0) * y + dR(2, 1) * x);
    dqn[1] = 2.0 * (dR(0, 1) * y + dR(0, 2) * z + dR(1, 0) * y - 2.0 * dR(1, 1) * x -
                    dR(1, 2) * w + dR(2, 0) * z + dR(2, 1) * w - 2.0 * dR(2, 2) * x);
    dqn[2] = 2.0 * (-2.0 * dR(0, 0) * y + dR(0, 1) * x + dR(0, 2) * w + dR(1, 0) * x +
                    dR(1, 2) * z - dR(2, 0) * w + dR(2, 1) * z - 2.0 * dR(2, 2) * y);
    dqn[3] = 2.0 * (-2.0 * dR(0, 0) * z - dR(0, 1) * w + dR(0, 2) * x + dR(1, 0) * w -
                    2.0 * dR(1, 1) * z + dR(1, 2) * y + dR(2, 0) * x + dR(2, 1) * y);
    return (dqn - qn * qn.dot(dqn)) / n;
}

// Pullback through the covariance parameterization Sigma = A A^T with
// A = R(q) diag(exp(log_scales)). Adds into the kernel's gradient slots.
void covariance_backward(const Eigen::Matrix3d& dSigma, const Eigen::Matrix3d& Rq,
                         const Eigen::Vector3d& sigmas, const Eigen::Vector4d& q,
                         Eigen::Vector3d& d_log_scales, Eigen::Vector4d& d_rotation) {
    const Eigen::Matrix3d A = Rq * sigmas.asDiagonal();
    const Eigen::Matrix3d dA = (dSigma + dSigma.transpose()) * A;
    const Eigen::Matrix3d dRq = dA * sigmas.asDiagonal();
    for (int i = 0; i < 3; ++i)
        d_log_scales[i] += Rq.col(i).dot(dA.col(i)) * sigmas[i];
    d_rotation += quat_backward(q, dRq);
}

// Pullback through the ray-space Jacobian's dependence on the camera-space
// point it is linearized at.
Eigen::Vector3d jacobian_pullback(const Eigen::Vector3d& t, const Intrinsics& K,
                                  const Eigen::Matrix3d& dJ) {
    const double x = t.x(), y = t.y(), z = t.z();
    const double z2 = z * z, z3 = z2 * z;
    const double l = t.norm(), l3 = l * l * l;
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    d.x() += dJ(0, 2) * (-K.fx / z2);
    d.y() += dJ(1, 2) * (-K.fy / z2);
    d.z() += dJ(0, 0) * (-K.fx / z2) + dJ(1, 1) * (-K.fy / z2) +
             dJ(0, 2) * (2.0 * K.fx * x / z3) + dJ(1, 2) * (2.0 * K.fy * y / z3);
    const double dot = dJ(2, 0) * x + dJ(2, 1) * y + dJ(2, 2) * z;
    d.x() += dJ(2, 0) / l - dot * x / l3;
    d.y() += dJ(2, 1) / l - dot * y / l3;
    d.z() += dJ(2, 2) / l - dot * z / l3;
    return d;
}

}  // namespace

double tv_loss(const SplatScene& s, const TvGridSpec& grid, KernelGradients* grads) {
    const int nx = grid.dims.x(), ny = grid.dims.y(), nz = grid.dims.z();
    if (nx < 1 || ny < 1 || nz < 1) throw InvalidSpec("tv_loss: bad grid dims");
    const std::size_t n_vox = std::size_t(nx) * ny * nz;

    struct Prep {
        Eigen::Vector3d p;
        Eigen::Matrix3d Q, Rq, Sigma;
        Eigen::Vector3d sigmas;
        double rho;
        int lo[3], hi[3];
    };
    const std::size_t M = s.kernels.size();
    std::vector<Prep> prep(M);
    for (std::size_t i = 0; i < M; ++i) {
        const auto& k = s.kernels[i];
        Prep& pr = prep[i];
        pr.p = k.position;
        pr.Rq = quat_to_rotation(k.rotation);
        pr.sigmas = k.log_scales.array().exp();
        const Eigen::Matrix3d A = pr.Rq * pr.sigmas.asDiagonal();
        pr.Sigma = A * A.transpose();
        pr.Q = pr.Sigma.inverse();
        pr.rho = kernel_density_amplitude(k);
        for (int a = 0; a < 3; ++a) {
            const double r = grid.truncation_sigma * std::sqrt(pr.Sigma(a, a));
            const double c = (pr.p[a] - grid.origin[a]) / grid.spacing;
            pr.lo[a] = std::max(0, int(std::ceil(c - r / grid.spacing)));
            pr.hi[a] = std::min(grid.dims[a] - 1, int(std::floor(c + r / grid.spacing)));
        }
    }

    auto center = [&](int x, int y, int z) -> Eigen::Vector3d {
        return grid.origin + grid.spacing * Eigen::Vector3d(x, y, z);
    };
    auto vidx = [&](int x, int y, int z) {
        return (std::size_t(z) * ny + y) * nx + x;
    };

    std::vector<double> V(n_vox, 0.0);
    parallel_for(nz, [&](std::int64_t zb, std::int64_t ze) {
        for (const auto& pr : prep) {
            const int z0 = std::max<int>(pr.lo[2], int(zb));
            const int z1 = std::min<int>(pr.hi[2], int(ze) - 1);
            if (z0 > z1 || pr.lo[0] > pr.hi[0] || pr.lo[1] > pr.hi[1]) continue;
            for (int z = z0; z <= z1; ++z)
                for (int y = pr.lo[1]; y <= pr.hi[1]; ++y)
                    for (int x = pr.lo[0]; x <= pr.hi[0]; ++x) {
                        const Eigen::Vector3d d = center(x, y, z) - pr.p;
                        V[vidx(x, y, z)] += pr.rho * std::exp(-0.5 * d.dot(pr.Q * d));
                    }
        }
    });

    const std::int64_t n_terms = std::int64_t(nx - 1) * ny * nz +
                                 std::int64_t(nx) * (ny - 1) * nz +
                                 std::int64_t(nx) * ny * (nz - 1);
    double acc = 0.0;
    std::vector<double> dV;
    if (grads) dV.assign(n_vox, 0.0);
    if (n_terms > 0) {
        const double wterm = 1.0 / double(n_terms);
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const double c = V[vidx(x, y, z)];
                    auto edge = [&](std::size_t other) {
                        const double diff = V[other] - c;
                        acc += std::abs(diff);
                        if (grads && diff != 0.0) {
                            const double sgn = diff > 0.0 ? wterm : -wterm;
                            dV[other] += sgn;
                            dV[vidx(x, y, z)] -= sgn;
                        }
                    };
                    if (x + 1 < nx) edge(vidx(x + 1, y, z));
                    if (y + 1 < ny) edge(vidx(x, y + 1, z));
                    if (z + 1 < nz) edge(vidx(x, y, z + 1));
                }
        acc /= double(n_terms);
    }

    if (grads) {
        grads->resize_zero(M);
        parallel_for(std::int64_t(M), [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) {
                const Prep& pr = prep[i];
                if (pr.lo[0] > pr.hi[0] || pr.lo[1] > pr.hi[1] || pr.lo[2] > pr.hi[2])
                    continue;
                Eigen::Vector3d g_p = Eigen::Vector3d::Zero();
                Eigen::Matrix3d g_Q = Eigen::Matrix3d::Zero();
                double g_rho = 0.0;
                for (int z = pr.lo[2]; z <= pr.hi[2]; ++z)
                    for (int y = pr.lo[1]; y <= pr.hi[1]; ++y)
                        for (int x = pr.lo[0]; x <= pr.hi[0]; ++x) {
                            const double dv = dV[vidx(x, y, z)];
                            if (dv == 0.0) continue;
                            const Eigen::Vector3d d = center(x, y, z) - pr.p;
                            const double g = std::exp(-0.5 * d.dot(pr.Q * d));
                            const double w = dv * pr.rho * g;
                            g_p += w * (pr.Q * d);
                            g_Q += (-0.5 * w) * (d * d.transpose());
                            g_rho += dv * g;
                        }
                const Eigen::Matrix3d dSigma = -(pr.Q * g_Q * pr.Q);
                grads->position[i] = g_p;
                grads->raw_density[i] =
                    g_rho * softplus_grad(s.kernels[i].raw_density);
                covariance_backward(dSigma, pr.Rq, pr.sigmas, s.kernels[i].rotation,
                                    grads->log_scales[i], grads->rotation[i]);
            }
        });
    }
    return acc;
}

GradientResult compute_gradients(const SplatScene& s, const ProjectionImage& target,
                                 const LossWeights& w, const TvGridSpec* tv,
                                 const RenderOptions& opts) {
    if (s.kernels.empty()) throw InvalidSpec("compute_gradients: empty scene");
    const Camera& cam = target.camera;
    if (cam.intr.width != target.width || cam.intr.height != target.height)
        throw ShapeMismatch("compute_gradients: target size does not match its camera");

    const std::size_t M = s.kernels.size();
    GradientResult res;
    res.rendered = ProjectionImage(target.width, target.height, cam);
    const auto proj = project_scene(s, cam, opts);
    accumulate_splats(proj, opts, res.rendered);
    res.culled.resize(M);
    for (std::size_t i = 0; i < M; ++i) res.culled[i] = proj[i].culled ? 1 : 0;

    // loss value and its image-space gradient
    const std::size_t N = res.rendered.pixels.size();
    std::vector<double> dI(N, 0.0);
    double l1 = 0.0;
    bool identical = true;
    for (std::size_t i = 0; i < N; ++i) {
        const double diff = res.rendered.pixels[i] - target.pixels[i];
        l1 += std::abs(diff);
        if (diff != 0.0) {
            identical = false;
            dI[i] = (diff > 0.0 ? 1.0 : -1.0) * (1.0 - w.lambda_dssim) / double(N);
        }
    }
    res.loss.l1 = l1 / double(N);

    // SSIM of bit-identical images is exactly 1 with zero gradient; skipping
    // the backward pass avoids smearing rounding residue over the kernels.
    if (w.lambda_dssim > 0.0 && !identical) {
        SsimConfig cfg;
        const double range = target.max_value();
        cfg.data_range = range > 0.0 ? range : 1.0;
        std::vector<double> dS;
        const double sval = ssim_mean_with_gradient(res.rendered, target, cfg, dS);
        res.loss.dssim = 0.5 * (1.0 - sval);
        const double scale = -0.5 * w.lambda_dssim;
        for (std::size_t i = 0; i < N; ++i) dI[i] += scale * dS[i];
    }

    res.grads.resize_zero(M);
    const double trunc2 = opts.truncation_sigma * opts.truncation_sigma;
    const SimilarityTransform& T = s.world_transform;
    const Eigen::Matrix3d L = T.scale * cam.pose.R;

    parallel_for(std::int64_t(M), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            const KernelProjection& p = proj[i];
            if (p.culled) continue;

            double g_rho2d = 0.0;
            Eigen::Vector2d g_mean = Eigen::Vector2d::Zero();
            Eigen::Matrix2d g_Q = Eigen::Matrix2d::Zero();
            const double a = p.Qhat(0, 0), bq = p.Qhat(0, 1), c = p.Qhat(1, 1);
            for (int y = p.y0; y <= p.y1; ++y) {
                const double dy = (y + 0.5) - p.splat.mean2d.y();
                const double* drow = &dI[std::size_t(y) * target.width];
                for (int x = p.x0; x <= p.x1; ++x) {
                    const double dL = drow[x];
                    if (dL == 0.0) continue;
                    const double dx = (x + 0.5) - p.splat.mean2d.x();
                    const double r2 = a * dx * dx + 2.0 * bq * dx * dy + c * dy * dy;
                    if (r2 > trunc2) continue;
                    const double g = std::exp(-0.5 * r2);
                    const double wpx = dL * p.splat.density2d * g;
                    g_rho2d += dL * g;
                    const Eigen::Vector2d d(dx, dy);
                    const Eigen::Vector2d qd = p.Qhat * d;
                    g_mean += wpx * qd;
                    g_Q += (-0.5 * wpx) * (d * d.transpose());
                }
            }
            if (g_rho2d == 0.0 && g_mean.isZero(0.0) && g_Q.isZero(0.0)) continue;

            const double mu = p.splat.mu;
            const double dMu = g_rho2d * p.rho;
            res.grads.raw_density[i] =
                g_rho2d * mu * softplus_grad(s.kernels[i].raw_density);

            // 2D covariance path: Qhat = SigmaHat^-1
            Eigen::Matrix2d dHat = -(p.Qhat * g_Q * p.Qhat);
            // rectification factor mu = sqrt(2 pi detT / detH)
            Eigen::Matrix3d dTilde = (0.5 * dMu * mu) * p.SigmaTildeInv;
            dHat += (-0.5 * dMu * mu) * p.Qhat;
            dTilde.topLeftCorner<2, 2>() += dHat;

            // SigmaTilde = M Sigma M^T
            const Eigen::Matrix3d sym = dTilde + dTilde.transpose();
            const Eigen::Matrix3d dM = sym * p.M * p.Sigma;
            const Eigen::Matrix3d dSigma = p.M.transpose() * dTilde * p.M;
            const Eigen::Matrix3d dJ = dM * L.transpose();

            covariance_backward(dSigma, p.Rq, p.sigmas, s.kernels[i].rotation,
                                res.grads.log_scales[i], res.grads.rotation[i]);

            // center path: the projected mean and the Jacobian linearization
            // point both move with the kernel position
            Eigen::Vector3d dxc = p.J.row(0).transpose() * g_mean.x() +
                                  p.J.row(1).transpose() * g_mean.y();
            dxc += jacobian_pullback(p.x_cam, cam.intr, dJ);
            res.grads.position[i] = L.transpose() * dxc;
        }
    });

    if (tv) {
        if (w.lambda_tv > 0.0) {
            KernelGradients tvg;
            res.loss.tv = tv_loss(s, *tv, &tvg);
            res.grads.axpy(w.lambda_tv, tvg);
        } else {
            res.loss.tv = tv_loss(s, *tv, nullptr);
        }
    }

    res.loss.total = (1.0 - w.lambda_dssim) * res.loss.l1 +
                     w.lambda_dssim * res.loss.dssim + w.lambda_tv * res.loss.tv;
    return res;
}

}  // namespace xsplat
