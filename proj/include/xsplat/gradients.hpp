#pragma once

#include "xsplat/loss.hpp"
#include "xsplat/projector.hpp"

namespace xsplat {

/// Per-kernel partials of the total loss, index-aligned with the scene's
/// kernel list. Culled kernels carry exact zeros.
struct KernelGradients {
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Vector3d> log_scales;
    std::vector<Eigen::Vector4d> rotation;
    std::vector<double> raw_density;

    void resize_zero(std::size_t n);
    void axpy(double a, const KernelGradients& other);  // this += a * other
};

/// TV sampling grid in scene units; voxel (0,0,0) center sits at `origin`.
struct TvGridSpec {
    Eigen::Vector3i dims = Eigen::Vector3i(32, 32, 32);
    double spacing = 0.03125;
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    double truncation_sigma = 3.0;
};

/// TV of the voxelized mixture over the grid; optionally also its gradients
/// with respect to every kernel parameter.
double tv_loss(const SplatScene& s, const TvGridSpec& grid,
               KernelGradients* grads);

struct GradientResult {
    KernelGradients grads;
    LossBreakdown loss;
    ProjectionImage rendered;
    std::vector<char> culled;  // per kernel, for this view
};

/// Analytic reverse-mode gradients of
///   (1-lambda_dssim) L1 + lambda_dssim DSSIM + lambda_tv TV
/// through the rectified projector (mu, the 2D covariance, and the ray-space
/// Jacobian's dependence on the kernel center included) and through the TV
/// voxelization. Pass tv = nullptr to drop the TV term.
GradientResult compute_gradients(const SplatScene& s, const ProjectionImage& target,
                                 const LossWeights& w, const TvGridSpec* tv,
                                 const RenderOptions& opts = {});

}  // namespace xsplat
