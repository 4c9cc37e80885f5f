#pragma once

#include "xsplat/image.hpp"
#include "xsplat/ssim.hpp"
#include "xsplat/volume.hpp"

namespace xsplat {

struct LossWeights {
    double lambda_dssim = 0.25;
    double lambda_tv = 0.05;
};

struct LossBreakdown {
    double total = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;  // (1 - SSIM) / 2
    double tv = 0.0;
};

/// Mean absolute difference.
double l1_loss(const ProjectionImage& rendered, const ProjectionImage& target);

/// Mean anisotropic forward-difference magnitude over the volume.
double tv_mean(const Volume& v);

/// total = (1 - lambda_dssim) * L1 + lambda_dssim * (1 - SSIM)/2
///         + lambda_tv * TV(tv_sample).
/// The SSIM data range is the target's max pixel value; the SSIM term is
/// skipped entirely when lambda_dssim is zero.
LossBreakdown compute_loss(const ProjectionImage& rendered,
                           const ProjectionImage& target,
                           const Volume* tv_sample, const LossWeights& w);

}  // namespace xsplat
