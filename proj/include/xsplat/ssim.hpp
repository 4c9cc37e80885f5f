#pragma once

#include <vector>

#include "xsplat/image.hpp"

namespace xsplat {

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Mean local SSIM over all fully interior windows (valid mode), Gaussian
/// weighting. Both images must be at least window x window.
double ssim_mean(const ProjectionImage& a, const ProjectionImage& b,
                 const SsimConfig& cfg);

/// Same value plus d(mean SSIM)/d(a) for every pixel of `a`.
double ssim_mean_with_gradient(const ProjectionImage& a, const ProjectionImage& b,
                               const SsimConfig& cfg, std::vector<double>& grad_a);

}  // namespace xsplat
