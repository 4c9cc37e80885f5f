#include "xsplat/loss.hpp"

#include <cmath>

#include "xsplat/errors.hpp"

namespace xsplat {

double l1_loss(const ProjectionImage& rendered, const ProjectionImage& target) {
    if (rendered.width != target.width || rendered.height != target.height)
        throw ShapeMismatch("l1_loss: image sizes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < rendered.pixels.size(); ++i)
        acc += std::abs(rendered.pixels[i] - target.pixels[i]);
    return acc / double(rendered.pixels.size());
}

double tv_mean(const Volume& v) {
    const int nx = v.dims.x(), ny = v.dims.y(), nz = v.dims.z();
    const std::int64_t n_terms = std::int64_t(nx - 1) * ny * nz +
                                 std::int64_t(nx) * (ny - 1) * nz +
                                 std::int64_t(nx) * ny * (nz - 1);
    if (n_terms <= 0) return 0.0;
    double acc = 0.0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double c = v.at(x, y, z);
                if (x + 1 < nx) acc += std::abs(v.at(x + 1, y, z) - c);
                if (y + 1 < ny) acc += std::abs(v.at(x, y + 1, z) - c);
                if (z + 1 < nz) acc += std::abs(v.at(x, y, z + 1) - c);
            }
    return acc / double(n_terms);
}

LossBreakdown compute_loss(const ProjectionImage& rendered,
                           const ProjectionImage& target,
                           const Volume* tv_sample, const LossWeights& w) {
    if (rendered.width != target.width || rendered.height != target.height)
        throw ShapeMismatch("compute_loss: image sizes differ");

    LossBreakdown out;
    out.l1 = l1_loss(rendered, target);
    if (w.lambda_dssim > 0.0) {
        SsimConfig cfg;
        const double range = target.max_value();
        cfg.data_range = range > 0.0 ? range : 1.0;
        out.dssim = 0.5 * (1.0 - ssim_mean(rendered, target, cfg));
    }
    if (tv_sample) out.tv = tv_mean(*tv_sample);
    out.total = (1.0 - w.lambda_dssim) * out.l1 + w.lambda_dssim * out.dssim +
                w.lambda_tv * out.tv;
    return out;
}

}  // namespace xsplat
